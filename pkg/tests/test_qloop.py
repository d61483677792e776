
import pytest
from hypothesis import given, strategies as st

from theta_lab import qloop as Q
from theta_lab.core_arith import SparseMatrix, TruncSeries, var

q, z = var("q"), var("z")
q_powers = st.integers(-4, 4).map(lambda k: q ** k)


@given(q_powers)
def test_relations_on_shifted_two_dimensional(a):
    assert Q.check_relations_q(Q.v2dim(a), modes=2) == []


@given(q_powers, q_powers)
def test_relations_on_tensor_products(a, b):
    assert Q.check_relations_q(Q.tensor(Q.v2dim(a), Q.v2dim(b)), modes=2) == []


@pytest.mark.parametrize("make", [lambda: Q.lprime_psi(5), lambda: Q.l_psi(5), lambda: Q.dual_neg_prefund(5),
                                  Q.borel_ratio_2dim, lambda: Q.kr_module(2), lambda: Q.asym_module(None, 5),
                                  lambda: Q.asym_module(q ** 3, 5)])
def test_relations_on_constructed_modules(make):
    assert Q.check_relations_q(make(), modes=2) == []


@given(st.integers(-3, 3))
def test_spectral_shift_composes(k):
    V = Q.v2dim()
    A = Q.spectral_shift(Q.spectral_shift(V, q ** k), q ** 2)
    B = Q.spectral_shift(V, q ** (k + 2))
    for m in range(-2, 3):
        assert A.xplus(m) == B.xplus(m)
        assert A.xminus(m) == B.xminus(m)


def test_kr_module_zero_is_trivial():
    assert Q.kr_module(0).dim == 1


def test_f_g_ratio():
    f, g = Q.f_g_eigen(Q.v2dim(order=10), [1], 10)
    assert g == (f * TruncSeries({0: 1, 1: -1}, 10, "z")).truncate(10)


def test_t_conjugation_on_two_dimensional():
    assert Q.t_conjugation_residuals(Q.v2dim(), 6) == []


def test_rmatrix_times_inverse_is_identity():
    N, V = Q.dual_neg_prefund(5), Q.v2dim()
    F = Q.r_factors(N, V, 5)
    prod = F.full() * F.inverse()
    one = TruncSeries.one(5, "z", N.dim * V.dim)
    assert Q._series_matrix_residuals(prod, one, Q.tensor_cols(N, V, 2), "R R^-1") == []


def test_rmatrix_intertwines():
    N, V = Q.l_psi(5), Q.v2dim()
    R = Q.r_factors(N, V, 5).full()
    assert Q.intertwining_residuals(R, N, V, Q.tensor_cols(N, V, 2)) == []


def test_wrong_factor_order_breaks_intertwining():
    N, W = Q.dual_neg_prefund(5), Q.tensor(Q.v2dim(), Q.v2dim(q ** 3))
    R = Q.r_factors(N, W, 4, minus_order="increasing").full()
    assert Q.intertwining_residuals(R, N, W, Q.tensor_cols(N, W, 2))


def test_theta_closed_zero_is_identity():
    assert Q.theta_closed(Q.v2dim(), Q.v2dim(), 0) == SparseMatrix.identity(4)


def test_theta_closed_vanishes_past_the_weight_range():
    assert Q.theta_closed(Q.v2dim(), Q.v2dim(), 2).is_zero()


def test_theta_from_monodromy_matches_closed_form():
    v = Q.v2dim()
    for n in range(3):
        got = Q.theta_from_monodromy(v, v, n)
        want = Q.theta_closed_series(v, v, n, got.order)
        assert Q._series_matrix_residuals(got, want, None, "Theta") == []


def test_poly_r_on_two_dimensional_w():
    res, bound = Q.poly_r_residuals(Q.l_psi(6), Q.v2dim(), [1], [], 8)
    assert res == []
    assert bound == 1


def test_poly_r_wrong_normalisation_fails():
    # alpha = g(z q^4) instead of g(z) for L(Psi_{q^-4}^-1)
    W = Q.v2dim()
    f, g = Q.f_g_eigen(W, [1], 8)
    wrong = Q.series_rescale(g, q ** 4)
    R = Q.r_factors(Q.dual_neg_prefund(6), W, 8).full()
    A = R * Q._as_matrix_series(wrong, R.dim)
    assert Q._high_coefficients(A, 1, Q.tensor_cols(Q.dual_neg_prefund(6), W, 3), "alpha R")


def test_asymptotic_modules():
    assert Q.asym_check_quantum(q ** 3, depth=5, order=5) == []


def test_dual_modules():
    assert Q.graded_dual_residuals(5) == []
