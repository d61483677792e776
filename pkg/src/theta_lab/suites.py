"""Named verification suites.  Each suite returns a list of residuals (location, expected, got)."""

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

from . import qloop as Q
from . import yangian as Y
from .cartan import LWeight
from .core_arith import (SparseMatrix, TruncSeries, as_scalar, q_number, series_exp, series_log,
                         solve_additive_difference, subs, var)

q, z, w = var("q"), var("z"), var("w")


@dataclass
class Suite:
    name: str
    run: object
    defaults: dict
    criteria: tuple = ()
    summary: str = ""
    params: tuple = field(default=())


REGISTRY = {}


def suite(name, criteria=(), **defaults):
    def wrap(fn):
        REGISTRY[name] = Suite(name, fn, defaults, tuple(criteria), (fn.__doc__ or "").strip().split("\n")[0])
        return fn
    return wrap


def _psi(a):
    return LWeight.psi("yangian", 1, a)


def _scalar_param(x):
    """Parse a spectral parameter: an integer, a fraction, or a variable name."""
    if isinstance(x, str):
        try:
            return Fraction(x)
        except ValueError:
            return var(x)
    return as_scalar(x)


def _matrix(dim, entries):
    return SparseMatrix.from_entries(dim, dim, {k: as_scalar(v) for k, v in entries.items() if v})


def _compare(got, want, cols, location):
    return Y.matrix_residuals(got.map(as_scalar), want.map(as_scalar), cols, location)


# ---------------------------------------------------------------------------
# core


@suite("core.diffeq", order=12)
def core_diffeq(order):
    """Additive difference equation S(z+1) = S(z) A(z): A = 1 gives S = 1; GKLO data of small modules."""
    one = TruncSeries.one(order, "zinv", 1)
    S = solve_additive_difference(one, 1, SparseMatrix.zero(1))
    res = Y.matrix_residuals(S.coeffs.get(0, SparseMatrix.zero(1)), SparseMatrix.identity(1), None, "S u^0")
    for e, c in S.coeffs.items():
        if e and not c.is_zero():
            res.append((f"S u^{e}", 0, c.get(0, 0)))
    for V in (Y.module_2dim(0), Y.module_2dim(Fraction(1, 3))):
        res += Y.difference_residuals(V, min(order, 10))
    return res


@suite("core.series", order=12)
def core_series(order):
    """exp/log inverse pair on fixed series and the q = 1 limit of q-numbers."""
    res = []
    f = TruncSeries({1: Fraction(2), 2: Fraction(-1, 3), 5: Fraction(7)}, order, "z")
    g = series_exp(f)
    back = series_log(g)
    for e in range(order + 1):
        if back.coeffs.get(e, 0) != f.coeffs.get(e, 0):
            res.append((f"log(exp f) z^{e}", f.coeffs.get(e, 0), back.coeffs.get(e, 0)))
    for t in range(-5, 6):
        v = subs(q_number(t), {"q": 1})
        if v != t:
            res.append((f"[{t}]_(q=1)", t, v))
    return res


# ---------------------------------------------------------------------------
# Yangian


@suite("yangian.tbar-2dim", criteria=(1,), a="a")
def tbar_2dim(a):
    """Normalised T-operator of the two-dimensional module: E11 + (a - w) E22."""
    a = _scalar_param(a)
    V = Y.module_2dim(a)
    T = Y.t_bar(V, _psi(0))
    res = _compare(T, _matrix(2, {(0, 0): 1, (1, 1): a - w}), None, "Tbar")
    res += Y.t_intertwining_residuals(V, _psi(0), T)
    return res


@suite("yangian.theta-2dim", criteria=(2,), order=8, a="a", b="b")
def theta_2dim(order, a, b):
    """Theta on 2dim_a (x) 2dim_b, the five-term Tbar of the tensor product and Delta(S(z))."""
    a, b = _scalar_param(a), _scalar_param(b)
    A, B = Y.module_2dim(a), Y.module_2dim(b)
    p = _psi(0)
    # basis e1e1, e1e2, e2e1, e2e2; E21 (x) E12 sends e1e2 to e2e1
    want = _matrix(4, {(0, 0): 1, (1, 1): 1, (2, 2): 1, (3, 3): 1, (2, 1): 1})
    res = _compare(Y.theta_operator(A, B, p), want, None, "Theta closed")
    res += _compare(Y.theta_via_factorization(A, B, p), want, None, "Theta from T")
    five = _matrix(4, {(0, 0): 1, (3, 3): (a - w) * (b - w), (1, 1): b - w, (2, 2): a - w, (2, 1): 1})
    res += _compare(Y.t_bar(Y.tensor(A, B), p), five, None, "Tbar tensor")
    res += Y.coproduct_s_residuals(A, B, order)
    return res


def _negpref_r_expected(dim, kind):
    """Closed-form blocks of the R-matrix between 2dim_z and L(Psi_0^-1) on v_0..v_{dim-1}."""
    e = {(0, 0): {}, (0, 1): {}, (1, 0): {}, (1, 1): {}}
    for n in range(dim):
        up = (n + 1, n) if n + 1 < dim else None
        if kind == "R":
            e[(0, 0)][(n, n)] = 1
            if up:
                e[(0, 1)][up] = n + 1
            if n:
                e[(1, 0)][(n - 1, n)] = 1
            e[(1, 1)][(n, n)] = z + n
        elif kind == "inverse":  # (z - 1) R^-1
            e[(0, 0)][(n, n)] = z + n - 1
            if up:
                e[(0, 1)][up] = -(n + 1)
            if n:
                e[(1, 0)][(n - 1, n)] = -1
            e[(1, 1)][(n, n)] = 1
        else:  # composite with Theta^-1 and Ttilde
            e[(0, 0)][(n, n)] = z - w - n
            if up:
                e[(0, 1)][up] = -(n + 1) * (w + n)
            if n:
                e[(1, 0)][(n - 1, n)] = 1
            e[(1, 1)][(n, n)] = z + n
    return {k: _matrix(dim, v) for k, v in e.items()}


@suite("yangian.rmatrix-2dim-negpref", criteria=(3,), depth=10)
def rmatrix_2dim_negpref(depth):
    """R-matrix 2dim_z (x) L(Psi_0^-1), its inverse times (z - 1), the composite with Theta and T, associativity."""
    M = Y.deform(Y.module_2dim(), z)
    N = Y.negative_prefundamental(depth + 1)
    R = Y.solve_rmatrix(M, N, depth)
    res = Y.rmatrix_residuals(R)
    cols = lambda j: [n for n in range(N.dim) if M.depth[j] + N.depth[n] <= R.depth]
    for (i, j), want in _negpref_r_expected(N.dim, "R").items():
        res += _compare(R.block(i, j), want, cols(j), f"R[{i},{j}]")
    Ri = Y.block_inverse(R)
    for (i, j), want in _negpref_r_expected(N.dim, "inverse").items():
        got = Y.mn_block(Ri, M, N, i, j, R.depth).map(lambda x: as_scalar(x * (z - 1)))
        res += _compare(got, want, cols(j), f"(z-1)R^-1[{i},{j}]")
    comp = Y.compose_rmatrix_triple(M, N, _psi(0), depth)
    for (i, j), want in _negpref_r_expected(N.dim, "composite").items():
        res += _compare(comp.blocks[(i, j)], want, cols(j), f"composite[{i},{j}]")
    res += Y.composite_intertwining_residuals(comp, _psi(0))
    res += Y.associativity_residuals(Y.module_2dim(), Y.negative_prefundamental(6), _psi(0))
    return res


def _difference_modules(depth):
    return [Y.module_2dim(0), Y.module_2dim(Fraction(2, 5)), Y.module_one_dim(_psi(0) * _psi(1), 0),
            Y.negative_prefundamental(depth)]


@suite("yangian.difference", criteria=(4,), order=8, depth=10)
def yangian_difference(order, depth):
    """Difference equation for S, xi_bar through S and T, and A x A^-1 on small modules."""
    res = []
    for V in _difference_modules(depth):
        tag = V.label
        for name, fn in (("S(z+1)", Y.difference_residuals), ("xi S", Y.xi_s_residuals),
                         ("xi T", Y.xi_t_residuals), ("A x", Y.comm_a_x_residuals)):
            res += [(f"{tag} {name} {loc}", e, g) for loc, e, g in fn(V, order=order)]
    return res


def tbar_degree_residuals(V, p):
    """The w-degree of Tbar on the column of depth k must be exactly k deg(p)."""
    T = Y.t_bar(V, p)
    d = len(p.roots(1, "num"))
    res = []
    for j in V.in_window():
        col = T.column(j)
        degs = [v.degree("w") if hasattr(v, "degree") else 0 for v in col.values() if v]
        got = max(degs, default=-1)
        if got != d * V.depth[j]:
            res.append((f"deg_w Tbar[{V.label}, {j}]", d * V.depth[j], got))
    return res


@suite("yangian.polynomiality", criteria=(5,), depth=6)
def yangian_polynomiality(depth):
    """Theta degree bounds, purity and multiplicativity; exact Tbar degrees on small and prefundamental modules."""
    two_a, two_b = Y.module_2dim(Fraction(1, 2)), Y.module_2dim(-3)
    three = Y.irreducible(_psi(-2) / _psi(0), 3, 2)
    N = Y.negative_prefundamental(depth)
    ps = [_psi(0), _psi(0) * _psi(0), _psi(0) * _psi(1)]
    res = []
    for p in ps:
        for V in (two_a, three, Y.tensor(two_a, two_b), N):
            res += tbar_degree_residuals(V, p)
        for A, B in ((two_a, two_b), (three, two_a), (two_a, three)):
            closed = Y.theta_operator(A, B, p)
            factored = Y.theta_via_factorization(A, B, p)
            res += Y.theta_degree_residuals(factored, A, B, p)
            res += Y.theta_degree_residuals(closed, A, B, p)
            res += Y.theta_triangularity_residuals(factored, A, B)
            # the closed form is built by multiplicativity, the other from T-operators
            res += Y.matrix_residuals(closed.map(as_scalar), factored.map(as_scalar), None,
                                      f"Theta {A.label},{B.label}")
    return res


@suite("yangian.lowest-diagonal", criteria=(6,), depth=8)
def yangian_lowest_diagonal(depth):
    """t_{V,W}(z) T_n = lambda T_m with lambda monic, for V of dimension 2 and 3."""
    res = []
    for V in (Y.module_2dim(0), Y.irreducible(_psi(-2) / _psi(0), 3, 2)):
        res += [(f"{V.label} {loc}", e, g) for loc, e, g in Y.lowest_diagonal(V, depth).residuals]
    return res


@suite("yangian.asym", criteria=(7,), depth=8, y="3/2")
def yangian_asym(depth, y):
    """Asymptotic module over the Yangian against the negative prefundamental limit."""
    return Y.asym_check_yangian(_scalar_param(y), depth)


def bounded_partitions(k, m):
    """Number of partitions with at most k parts, each at most m (multisets of size k from m + 1 modes)."""
    table = [[1] * (m + 1)]
    for kk in range(1, k + 1):
        row = []
        for mm in range(m + 1):
            # partitions in a kk x mm box: either fewer than kk parts or every part >= 1
            row.append((table[kk - 1][mm]) + (row[mm - 1] if mm else 0))
        table.append(row)
    return table[k][m]


@suite("yangian.verma", criteria=(8,), depth=6, modes=6)
def yangian_verma(depth, modes):
    """Verma weight spaces versus partition counts; L(Psi_0^-1) has one-dimensional weight spaces."""
    f = _psi(0).inverse()
    V = Y.verma(f, depth, modes)
    res = []
    for k in range(depth + 1):
        got = V.depth.count(k)
        want = bounded_partitions(k, modes)
        if got != want or want != comb(modes + k, k):
            res.append((f"dim M(f)_{k}", want, got))
    L = Y.irreducible(f, depth, 2)
    for k in range(depth + 1):
        if L.depth.count(k) != 1:
            res.append((f"dim L(f)_{k}", 1, L.depth.count(k)))
    N = Y.negative_prefundamental(depth)
    res += Y.isomorphic_by_rescaling(L, N)
    # expected action: x+_0 v_{n+1} = v_n and x-_0 v_n = (n + 1) v_{n+1}
    for n in range(depth):
        if N.xplus(0).get(n, n + 1) != 1:
            res.append((f"x+0 v{n + 1}", 1, N.xplus(0).get(n, n + 1)))
        if N.xminus(0).get(n + 1, n) != n + 1:
            res.append((f"x-0 v{n}", n + 1, N.xminus(0).get(n + 1, n)))
    return res


# ---------------------------------------------------------------------------
# quantum loop algebra


def _relation_modules():
    v, v3 = Q.v2dim(), Q.v2dim(q ** 3)
    return [v, v3, Q.borel_ratio_2dim(), Q.lprime_psi(6), Q.l_psi(6), Q.dual_neg_prefund(6), Q.tensor(v, v3),
            Q.kr_module(3), Q.asym_module(None, 6)]


@suite("qloop.relations", modes=3)
def qloop_relations(modes):
    """Drinfeld relations on every constructed module within its window."""
    res = []
    for V in _relation_modules():
        res += [(f"{V.label} {loc}", e, g) for loc, e, g in Q.check_relations_q(V, modes)]
    return res


@suite("qloop.fg-ratio", criteria=(9,), order=12)
def qloop_fg_ratio(order):
    """g(z) = f(z)(1 - z) for T_{Psi_1} on the two-dimensional module."""
    f, g = Q.f_g_eigen(Q.v2dim(order=order), [1], order)
    want = (f * TruncSeries({0: 1, 1: -1}, order, "z")).truncate(order)
    res = []
    for e in range(order + 1):
        if as_scalar(g.coeffs.get(e, 0)) != as_scalar(want.coeffs.get(e, 0)):
            res.append((f"g - f(1 - z) z^{e}", want.coeffs.get(e, 0), g.coeffs.get(e, 0)))
    f1 = as_scalar(f.coeffs.get(1, 0))
    if f1 != as_scalar(q ** 2 / (q ** 2 + 1)):
        res.append(("f z^1", q ** 2 / (q ** 2 + 1), f1))
    return res


@suite("qloop.t-conjugation", criteria=(9,), order=10)
def qloop_t_conjugation(order):
    """Conjugation of x by T and exp(h) = T(zq^-2)/T(zq^2) on 2-dim, tensor and Borel modules."""
    v = Q.v2dim()
    res = []
    for V in (v, Q.tensor(v, Q.v2dim(q ** 3)), Q.borel_ratio_2dim()):
        res += [(f"{V.label} {loc}", e, g) for loc, e, g in Q.t_conjugation_residuals(V, order)]
    return res


@suite("qloop.rmatrix-gr", criteria=(10,), depth=10, order=8)
def qloop_rmatrix_gr(depth, order):
    """g R-check on L(Psi_{q^-4}^-1) (x) V, the intertwining property and the decomposition matrix."""
    res, _ = Q.full_r_check(depth, order)
    N, V = Q.dual_neg_prefund(depth + 2), Q.v2dim()
    R = Q.r_factors(N, V, order).full()
    res += Q.intertwining_residuals(R, N, V, Q.tensor_cols(N, V, 2))
    res += Q.decomposition_r(depth, order)[0]
    res += Q.decomposition_r(depth, order, w=0)[0]
    return res


@suite("qloop.monodromy", criteria=(11,), depth=8, order=8)
def qloop_monodromy(depth, order):
    """Monodromy blocks of L'(Psi_1): degree and weight bounds, Gauss decomposition, Theta for n <= 4."""
    M = Q.lprime_psi(depth)
    v = Q.v2dim()
    vv = Q.tensor(v, Q.v2dim(q ** 3))
    res = []
    for W in (v, vv):
        mono = Q.Monodromy(M, W, order)
        res += Q.poly_mono_residuals(mono)
        res += Q.gauss_residuals(mono)
        res += Q.monodromy_examples_residuals(mono)
    res += Q.coproduct_residuals(Q.lprime_psi(6), v, Q.v2dim(q ** 3))
    w4 = Q.kr_module(3)
    for W1, W2 in ((w4, w4), (vv, w4), (v, vv)):
        for n in range(5):
            got = Q.theta_from_monodromy(W1, W2, n)
            want = Q.theta_closed_series(W1, W2, n, got.order)
            res += Q._series_matrix_residuals(got, want, None, f"Theta_{n}[{W1.label},{W2.label}]")
            res += Q.theta_degree_residuals(got, n)
    return res


def poly_r_cases(depth):
    v = Q.v2dim()
    ws = [v, Q.v2dim(q ** 3), Q.tensor(v, Q.v2dim(q ** 3))]
    for W in ws:
        K = depth if W.dim == 2 else max(depth - 2, 5)
        yield W, "L(Psi_1)", Q.l_psi(K), [1], []
        yield W, "L(Psi_q-4^-1)", Q.dual_neg_prefund(K), [], [q ** -4]
        yield W, "L(Psi_1/Psi_q2)", Q.borel_ratio_2dim(), [1], [q ** 2]
        yield W, "trivial", Q.kr_module(0), [], []


@suite("qloop.poly-r", criteria=(12,), depth=8, order=10)
def qloop_poly_r(depth, order):
    """alpha R-check and beta R-check^-1 polynomial; f^-1 T_p on W of exact degree."""
    res = []
    for W, name, V, p, n in poly_r_cases(depth):
        got, _ = Q.poly_r_residuals(V, W, p, n, order)
        res += [(f"{name} x {W.label} {loc}", e, g) for loc, e, g in got]
    for W in (Q.v2dim(), Q.tensor(Q.v2dim(), Q.v2dim(q ** 3))):
        for p in ([1], [1, q ** 2], [q ** -4]):
            res += [(f"{W.label} {loc}", e, g) for loc, e, g in Q.poly_t_residuals(W, p, order)]
    return res


@suite("qloop.asym", criteria=(7,), depth=8, c="q^3")
def qloop_asym(depth, c):
    """Asymptotic module rho^c against the shift -1 limit rho_inf."""
    return Q.asym_check_quantum(_q_param(c), depth)


@suite("qloop.dual", depth=8)
def qloop_dual(depth):
    """Graded duals of L'(Psi_1) through the antipode and its inverse."""
    return Q.graded_dual_residuals(depth)


def _q_param(x):
    """Parse values like "q^3", "1", "c" or "q^-2"."""
    if not isinstance(x, str):
        return x
    s = x.replace(" ", "")
    if s.startswith("q^"):
        return q ** int(s[2:].strip("()"))
    if s == "q":
        return q
    return _scalar_param(s)
