"""Named objects the command line can compute and emit.

Each builder returns a document: a dict with the object name, its
parameters, the window on which the values are exact and the values as
matrices (rows, cols, entries) with optional basis labels.
"""

from dataclasses import dataclass
from fractions import Fraction

from . import qloop as Q
from . import yangian as Y
from .cartan import LWeight
from .core_arith import SparseMatrix, as_scalar, var

z = var("z")


class WindowError(ValueError):
    """Requested values lie outside the window where they are exact."""

    def __init__(self, message, window):
        super().__init__(message)
        self.window = window


@dataclass
class Matrix:
    """A matrix to render, with basis labels for rows and columns."""
    value: SparseMatrix
    rows: list
    cols: list


@dataclass
class Document:
    name: str
    parameters: dict
    window: dict
    matrices: dict


OBJECTS = {}


def builder(name, **defaults):
    def wrap(fn):
        fn.defaults = defaults
        fn.summary = (fn.__doc__ or "").strip().split("\n")[0]
        OBJECTS[name] = fn
        return fn
    return wrap


def series_polynomial(S):
    """Sum of a truncated matrix series whose terms all lie below its order."""
    total = SparseMatrix.zero(S.dim) if S.dim else None
    for p, M in sorted(S.coeffs.items()):
        term = M.scale(z ** p).map(as_scalar)
        total = term if total is None else (total + term).map(as_scalar)
    return total


def _labels(n, prefix="v"):
    return [f"{prefix}{i}" for i in range(n)]


def _scalar(x):
    if isinstance(x, str):
        try:
            return as_scalar(Fraction(x))
        except ValueError:
            return var(x)
    return as_scalar(x)


@builder("identity", dim=2)
def identity(dim):
    """Identity matrix of the given size."""
    dim = int(dim)
    if dim < 1:
        raise WindowError("dimension must be positive", {"dim": ">= 1"})
    return Document("identity", {"dim": dim}, {"dim": dim},
                    {"I": Matrix(SparseMatrix.identity(dim), _labels(dim, "e"), _labels(dim, "e"))})


@builder("yangian.tbar-2dim", a="a")
def tbar_2dim(a):
    """Normalised T-operator of the two-dimensional module, a polynomial in w."""
    T = Y.t_bar(Y.module_2dim(_scalar(a)), LWeight.psi("yangian", 1, 0))
    return Document("yangian.tbar-2dim", {"a": a}, {"dim": 2}, {"Tbar": Matrix(T, ["e1", "e2"], ["e1", "e2"])})


@builder("yangian.rmatrix.2dim-negpref", depth=10, zdeg="full")
def rmatrix_2dim_negpref(depth, zdeg):
    """R-matrix between 2dim_z and L(Psi_0^-1) as four blocks acting on v_0..v_depth.

    ``zdeg`` is "full" for the polynomial entries or an integer k for the
    coefficient of z^k.
    """
    depth = int(depth)
    if depth < 0:
        raise WindowError("depth must be non-negative", {"depth": ">= 0"})
    M = Y.deform(Y.module_2dim(), z)
    # one extra level so that every block is exact on v_0..v_depth
    N = Y.negative_prefundamental(depth + 2)
    R = Y.solve_rmatrix(M, N, depth + 1)
    keep = [n for n in range(N.dim) if N.depth[n] <= min(depth, R.depth - 1)]
    out = {}
    for i in range(2):
        for j in range(2):
            B = R.block(i, j).map(as_scalar).submatrix(keep, keep)
            if zdeg != "full":
                B = B.map(lambda v, k=int(zdeg): as_scalar(_z_coefficient(v, k)))
            out[f"R[{i},{j}]"] = Matrix(B, _labels(len(keep)), _labels(len(keep)))
    return Document("yangian.rmatrix.2dim-negpref", {"depth": depth, "zdeg": zdeg},
                    {"depth": len(keep) - 1}, out)


def _z_coefficient(v, k):
    coeffs = Q._poly_coeffs(v)
    return coeffs[k] if k < len(coeffs) else 0


_TEST_MODULES = {
    "v2dim": lambda: Q.v2dim(),
    "v2dim-q3": lambda: Q.v2dim(q_pow(3)),
    "v2dim-tensor": lambda: Q.tensor(Q.v2dim(), Q.v2dim(q_pow(3))),
    "kr3": lambda: Q.kr_module(3),
}


def q_pow(n):
    return var("q") ** n


def _test_module(name):
    try:
        return _TEST_MODULES[name]()
    except KeyError:
        raise WindowError(f"unknown test module {name!r}", {"test-module": sorted(_TEST_MODULES)})


@builder("qloop.theta.closed", n=1, left="v2dim", right="v2dim")
def theta_closed(n, left, right):
    """Component of weight n alpha of Theta on a product of finite modules (n = 0 is the identity)."""
    n = int(n)
    if n < 0:
        raise WindowError("n must be non-negative", {"n": ">= 0"})
    A, B = _test_module(left), _test_module(right)
    labels = [f"{a}{b}" for a in _labels(A.dim, "e") for b in _labels(B.dim, "f")]
    T = Q.theta_closed(A, B, n)
    return Document("qloop.theta.closed", {"n": n, "left": left, "right": right},
                    {"dim": A.dim * B.dim}, {f"Theta_{n}": Matrix(T, labels, labels)})


def _basis_index(s, name):
    s = str(s)
    try:
        return int(s[1:] if s.startswith("v") else s)
    except ValueError:
        raise WindowError(f"bad basis vector {name}={s!r}", {name: "v<index>"})


@builder("qloop.monodromy.tplus", row="v1", col="v0", test_module="v2dim", depth=8, order=8)
def monodromy_tplus(row, col, test_module, depth, order):
    """Entry t+_{row,col}(z) of the monodromy matrix of L'(Psi_1) against a test module, per power of z."""
    depth, order = int(depth), int(order)
    b1, b2 = _basis_index(row, "row"), _basis_index(col, "col")
    M = Q.lprime_psi(depth)
    exact = M.exact_cols
    top = max(exact)
    if not (0 <= b1 <= top and 0 <= b2 <= top):
        raise WindowError(f"basis vectors must lie in v0..v{top}", {"row": f"v0..v{top}", "col": f"v0..v{top}",
                                                                     "depth": depth})
    W = _test_module(test_module)
    S = Q.Monodromy(M, W, order).block("+", b1, b2)
    labels = _labels(W.dim, "w")
    out = {}
    for p in range(order + 1):
        C = S.coeffs.get(p)
        if C is not None and not C.is_zero():
            out[f"z^{p}"] = Matrix(C.map(as_scalar), labels, labels)
    doc = Document("qloop.monodromy.tplus",
                   {"row": f"v{b1}", "col": f"v{b2}", "test_module": test_module, "depth": depth,
                    "order": order},
                   {"order": order, "basis": f"v0..v{top}"}, out)
    doc.window["constant_in_z"] = all(k == "z^0" for k in out)
    return doc


@builder("qloop.gr-matrix", jmax=3, order=8, w="w")
def gr_matrix(jmax, order, w):
    """Decomposition-theorem matrix on L(Psi_{q^-4}^-1) (x) v2dim, truncated to j <= jmax."""
    jmax, order = int(jmax), int(order)
    if jmax < 0:
        raise WindowError("jmax must be non-negative", {"jmax": ">= 0"})
    if order < 2:
        raise WindowError("entries have z-degree 1, so order must be at least 2", {"order": ">= 2"})
    wv = var("w") if w == "w" else _scalar(w)
    res, blocks = Q.decomposition_r(jmax, order, w=None if w == "w" else wv)
    if res:
        raise RuntimeError(f"decomposition check failed with {len(res)} residuals")
    keep = list(range(jmax + 1))
    n = len(keep)
    rows = {}
    for (a, b), S in blocks.items():
        B = series_polynomial(S).submatrix(keep, keep)
        for i, j, v in B.items():
            if v:
                rows.setdefault(a * n + i, {})[b * n + j] = v
    labels = [f"e{a}v{j}" for a in range(2) for j in keep]
    return Document("qloop.gr-matrix", {"jmax": jmax, "order": order, "w": w},
                    {"jmax": jmax, "order": order},
                    {"gR": Matrix(SparseMatrix(2 * n, 2 * n, rows), labels, labels)})
