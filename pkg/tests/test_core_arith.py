from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from theta_lab.core_arith import (PolyZW, PreconditionError, RatFunc, SparseMatrix, TruncSeries, as_scalar,
                                  matrix_from_json, matrix_inverse, matrix_to_json, q_binomial, q_factorial,
                                  q_number, scalar_from_json, scalar_to_json, series_exp, series_from_json,
                                  series_inverse, series_log, series_to_json, solve_additive_difference, subs, var)

q, z, w = var("q"), var("z"), var("w")

fractions = st.fractions(min_value=-20, max_value=20, max_denominator=12)
small_ints = st.integers(min_value=-4, max_value=4)


def laurent(coeffs):
    """A Laurent polynomial in q from a list of (exponent, coefficient)."""
    out = RatFunc.const(0)
    for e, c in coeffs:
        out = out + c * q ** e
    return out


laurent_polys = st.lists(st.tuples(small_ints, st.integers(-3, 3)), max_size=4).map(laurent)


def test_ratfunc_reduces_to_lowest_terms():
    f = (q ** 2 - 1) / (q - 1)
    assert f == q + 1
    assert as_scalar(f / (q + 1)) == 1
    assert isinstance(as_scalar(f / (q + 1)), Fraction)


def test_division_by_zero_raises():
    with pytest.raises(ZeroDivisionError):
        RatFunc.coerce(q) / 0


@given(laurent_polys, laurent_polys, laurent_polys)
def test_field_axioms_on_laurent_polynomials(a, b, c):
    assert (a + b) * c == a * c + b * c
    assert a * b == b * a
    if b:
        assert as_scalar(a / b * b) == as_scalar(a)


@given(st.integers(-6, 6))
def test_q_number_is_antisymmetric_and_specializes(n):
    assert q_number(-n) == -q_number(n)
    assert subs(q_number(n), {"q": 1}) == n


def test_q_factorial_and_binomial():
    # round brackets: (m) = q^(m-1) [m]
    assert q_factorial(3) == q ** 3 * q_number(1) * q_number(2) * q_number(3)
    assert q_binomial(4, 2) == as_scalar(q_factorial(4) / (q_factorial(2) * q_factorial(2)))


def test_sparse_matrix_basics():
    A = SparseMatrix.from_dense([[1, 2], [3, 4]])
    B = SparseMatrix.from_dense([[0, 1], [1, 0]])
    assert (A @ B).to_dense() == [[2, 1], [4, 3]]
    assert A.transpose().get(0, 1) == 3
    assert A.kron(SparseMatrix.identity(2)).nrows == 4
    assert (matrix_inverse(A) @ A) == SparseMatrix.identity(2)
    assert A.submatrix([1], [0, 1]).to_dense() == [[3, 4]]
    assert SparseMatrix.zero(3).is_zero()


@given(st.lists(st.lists(fractions, min_size=3, max_size=3), min_size=3, max_size=3))
def test_inverse_of_unitriangular_plus_identity(data):
    # strictly lower part plus identity is always invertible
    M = SparseMatrix.from_dense([[Fraction(1) if i == j else (data[i][j] if j < i else 0) for j in range(3)]
                                 for i in range(3)])
    assert M @ matrix_inverse(M) == SparseMatrix.identity(3)


series_terms = st.dictionaries(st.integers(1, 6), fractions, max_size=4)


@given(series_terms)
def test_exp_log_round_trip(terms):
    f = TruncSeries(terms, 8, "z")
    assert series_log(series_exp(f)) == f


@given(series_terms)
def test_inverse_series(terms):
    g = TruncSeries({**terms, 0: Fraction(1)}, 8, "z")
    assert g * series_inverse(g) == TruncSeries.one(8, "z")


def test_series_tracks_order():
    a = TruncSeries({0: 1, 1: 2}, 5, "z")
    b = TruncSeries({0: 1}, 3, "z")
    assert (a * b).order == 3
    assert (a + b).order == 3


def test_log_needs_unit_constant_term():
    with pytest.raises(PreconditionError):
        series_log(TruncSeries({0: 2, 1: 1}, 4, "z"))


def test_trivial_difference_equation():
    one = TruncSeries.one(12, "zinv", 1)
    S = solve_additive_difference(one, 1, SparseMatrix.zero(1))
    assert S.coeffs == {0: SparseMatrix.identity(1)}


@given(laurent_polys, laurent_polys)
def test_scalar_json_round_trip(a, b):
    x = as_scalar(a / b) if b else as_scalar(a)
    assert scalar_from_json(scalar_to_json(x)) == x


def test_multivariate_json_round_trip():
    x = as_scalar((q * z - w) / (1 - q ** 2 * w))
    assert scalar_from_json(scalar_to_json(x)) == x
    assert scalar_to_json(Fraction(-3, 4)) == "-3/4"


def test_matrix_and_series_json():
    M = SparseMatrix.from_dense([[0, q], [Fraction(1, 2), 0]])
    doc = matrix_to_json(M, ["a", "b"], ["a", "b"])
    assert [e[:2] for e in doc["entries"]] == [[0, 1], [1, 0]]
    assert matrix_from_json(doc) == M
    S = TruncSeries({0: SparseMatrix.identity(2), 2: M}, 4, "z", 2)
    assert series_from_json(series_to_json(S)) == S


def test_polyzw_from_scalar():
    p = PolyZW.from_scalar(as_scalar(z * w - 3 * z ** 2))
    assert p.degree_z() == 2
    assert p.degree_w() == 1
    assert as_scalar(p.to_scalar()) == as_scalar(z * w - 3 * z ** 2)
