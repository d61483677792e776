from fractions import Fraction

import pytest

from theta_lab.cartan import LWeight, build_cartan, inverse_quantum_cartan, lambda_eigen, quantum_cartan
from theta_lab.core_arith import SparseMatrix, as_scalar, var

q, z = var("q"), var("z")


@pytest.mark.parametrize("letter,rank", [("A", 1), ("A", 3), ("B", 3), ("C", 2), ("D", 4), ("E", 6), ("F", 4),
                                         ("G", 2)])
def test_symmetrized_cartan_is_symmetric(letter, rank):
    cd = build_cartan(letter, rank)
    for i in range(rank):
        assert cd.b[i][i] == 2 * cd.d[i]
        for j in range(rank):
            assert cd.b[i][j] == cd.b[j][i]


def test_rank_one_data():
    cd = build_cartan("A", 1)
    assert cd.cartan == ((2,),)
    assert cd.kappa == 1


def test_dual_coxeter_like_constant_for_a2():
    # (theta, theta + 2 rho) / 4 with theta = a1 + a2: (2 + 4) / 4
    assert build_cartan("A", 2).kappa == Fraction(3, 2)


def test_invalid_type():
    with pytest.raises(ValueError):
        build_cartan("D", 3)


def test_quantum_cartan_inverse():
    cd = build_cartan("A", 2)
    B = quantum_cartan(cd)
    assert (B @ inverse_quantum_cartan(cd)).map(as_scalar) == SparseMatrix.identity(2)


def test_lweight_algebra():
    p = LWeight.psi("yangian", 1, 0)
    r = LWeight.psi("yangian", 1, 2)
    ratio = p / r
    assert ratio * r == p
    assert not ratio.is_polynomial()
    assert ratio.coweight().values == (0,)
    assert (p * r).coweight().values == (2,)
    assert as_scalar(p.component(1)) == as_scalar(z)
    assert p.tau_shift(1) == LWeight.psi("yangian", 1, 1)


def test_quantum_lweight_component_and_eigenvalue():
    p = LWeight.psi("quantum", 1, q ** 2)
    assert as_scalar(p.component(1)) == as_scalar(1 - z * q ** 2)
    assert lambda_eigen(p, 1, 1) == as_scalar(q ** 2 / (q ** -1 - q))
    with pytest.raises(ValueError):
        lambda_eigen(p.inverse(), 1, 1)


def test_sides_do_not_mix():
    with pytest.raises(ValueError):
        LWeight.psi("yangian", 1, 0) * LWeight.psi("quantum", 1, 1)
