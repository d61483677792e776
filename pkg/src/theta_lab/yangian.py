"""Shifted Yangians of sl2: modules, GKLO series, S/T operators, Theta and R-matrices.

Conventions (rank one, d = 1, shift m = -<mu, alpha>):

* modes x+_n, x-_n for n >= 0 and xi_p for p >= -m-1, with xi_{-m-1} = 1;
* xi(z) = sum_p xi_p z^{-p-1}, so xi(z) = z^m + ... and xi_bar(z) = z^{-m} xi(z);
* [x+_a, x-_b] = xi_{a+b};
* [xi_{p+1}, x(+/-)_n] - [xi_p, x(+/-)_{n+1}] = +/-(xi_p x_n + x_n xi_p), and the
  same shape for two x's of equal sign.

Modules are finite matrix realisations (``WeightModule``) of a window of a
weight module: a list of basis labels, a depth grading (number of x- steps
below the top) and callables returning the matrices of the generators.
``window`` is the largest source depth on which the tables are exact.
"""

from fractions import Fraction
from itertools import combinations_with_replacement

import flint

from .cartan import LWeight
from .core_arith import (PreconditionError, RatFunc, SparseMatrix, TruncSeries, as_scalar, gen_binomial,
                         matrix_inverse, series_exp, series_inverse, series_log, series_pow, solve_additive_difference,
                         solve_linear, subs, var, z_over_z_plus)

HALF = Fraction(1, 2)


def _add_into(acc, key, c):
    v = acc.get(key, 0) + c
    if v:
        acc[key] = v
    else:
        acc.pop(key, None)


def _lincomb(terms):
    """Sum of (coef, dict) pairs as a dict."""
    out = {}
    for c, vec in terms:
        if not c:
            continue
        for k, v in vec.items():
            _add_into(out, k, c * v)
    return out


# ---------------------------------------------------------------------------
# PBW rewriting


XM, XI, XP = "x-", "xi", "x+"
_KIND_RANK = {XM: 0, XI: 1, XP: 2}


class NormalForm:
    """Result of ``normal_order``: PBW words with coefficients, plus the part outside the window."""

    __slots__ = ("terms", "lost")

    def __init__(self, terms, lost):
        self.terms = terms
        self.lost = lost

    def __repr__(self):
        return f"NormalForm({len(self.terms)} terms, {len(self.lost)} lost)"


class PBWRewriter:
    """Rewrites words in the generators of the shifted Yangian Y_{-m} into PBW order.

    PBW order: x- modes weakly decreasing, then xi indices weakly increasing,
    then x+ modes weakly increasing.  ``strategy`` picks the leftmost or the
    rightmost disordered pair, which gives a confluence check.
    """

    def __init__(self, shift, strategy="left"):
        self.m = shift
        self.strategy = strategy
        self._memo = {}

    def _clean(self, word):
        out = []
        for g in word:
            if g[0] == XI:
                if g[1] < -self.m - 1:
                    return None
                if g[1] == -self.m - 1:
                    continue
            out.append(g)
        return tuple(out)

    def _rewrite(self, g, h):
        (k1, a), (k2, b) = g, h
        if k1 == XP and k2 == XM:
            return [(1, ((XM, b), (XP, a))), (1, ((XI, a + b),))]
        if k1 == XI and k2 == XM:
            p, n = a, b
            return [(1, ((XM, n), (XI, p))), (1, ((XI, p - 1), (XM, n + 1))), (-1, ((XM, n + 1), (XI, p - 1))),
                    (-1, ((XI, p - 1), (XM, n))), (-1, ((XM, n), (XI, p - 1)))]
        if k1 == XP and k2 == XI:
            n, p = a, b
            return [(1, ((XI, p), (XP, n))), (-1, ((XI, p - 1), (XP, n + 1))), (1, ((XP, n + 1), (XI, p - 1))),
                    (-1, ((XI, p - 1), (XP, n))), (-1, ((XP, n), (XI, p - 1)))]
        if k1 == XM and k2 == XM and a < b:
            if b == a + 1:
                return [(1, ((XM, a + 1), (XM, a))), (1, ((XM, a), (XM, a)))]
            return [(1, ((XM, a + 1), (XM, b - 1))), (-1, ((XM, b - 1), (XM, a + 1))), (1, ((XM, b), (XM, a))),
                    (1, ((XM, a), (XM, b - 1))), (1, ((XM, b - 1), (XM, a)))]
        if k1 == XP and k2 == XP and a > b:
            if a == b + 1:
                return [(1, ((XP, b), (XP, b + 1))), (1, ((XP, b), (XP, b)))]
            return [(1, ((XP, b), (XP, a))), (1, ((XP, a - 1), (XP, b + 1))), (-1, ((XP, b + 1), (XP, a - 1))),
                    (1, ((XP, a - 1), (XP, b))), (1, ((XP, b), (XP, a - 1)))]
        if k1 == XI and k2 == XI and a > b:
            return [(1, (h, g))]
        if _KIND_RANK[k1] > _KIND_RANK[k2]:
            raise AssertionError(f"unhandled pair {g} {h}")
        return None

    def normal_form(self, word):
        """Dict {PBW word: coefficient} equal to the product ``word``."""
        word = self._clean(tuple(word))
        if word is None:
            return {}
        if word in self._memo:
            return self._memo[word]
        positions = range(len(word) - 1)
        if self.strategy == "right":
            positions = reversed(positions)
        out = None
        for i in positions:
            rule = self._rewrite(word[i], word[i + 1])
            if rule is None:
                continue
            out = {}
            for c, repl in rule:
                for w, v in self.normal_form(word[:i] + repl + word[i + 2:]).items():
                    _add_into(out, w, c * v)
            break
        if out is None:
            out = {word: Fraction(1)}
        self._memo[word] = out
        return out


def normal_order(word, shift, depth=None, modes=None, strategy="left"):
    """Rewrite a word of generators into PBW order.

    ``word`` is a sequence of pairs (kind, index) with kind in "x-", "xi", "x+".
    Terms whose x- count exceeds ``depth`` or whose x modes exceed ``modes``
    are reported separately as lost.  Raises if every term is lost.
    """
    nf = PBWRewriter(shift, strategy).normal_form(word)
    kept, lost = {}, {}
    for w, c in nf.items():
        xm = [g for g in w if g[0] == XM]
        too_deep = depth is not None and len(xm) > depth
        too_high = modes is not None and any(g[0] != XI and g[1] > modes for g in w)
        (lost if too_deep or too_high else kept)[w] = c
    if nf and not kept:
        raise PreconditionError("every term of the normal form left the window")
    return NormalForm(kept, lost)


# ---------------------------------------------------------------------------
# highest l-weight data


def _poly_mul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = out[i + j] + x * y
    return out


def xi_eigenvalues(f, count):
    """Highest-weight eigenvalues {p: xi_p} of xi(z) = f(z) for p = -m-1 .. -m-2+count.

    ``f`` is a Yangian-side rank-one LWeight.  With u = 1/z,
    z^{-m} f(z) = prod(1 - a u) / prod(1 - b u) and xi_{j-m-1} is its u^j coefficient.
    """
    m = f.coweight().values[0]
    series = [Fraction(1)] + [0] * (count - 1)
    for a in f.roots(1, "num"):
        series = _poly_mul(series, [1, -a])[:count]
    for b in f.roots(1, "den"):
        geo = [Fraction(1)]
        for _ in range(count - 1):
            geo.append(geo[-1] * b)
        series = _poly_mul(series, geo)[:count]
    return {j - m - 1: as_scalar(c) for j, c in enumerate(series)}


def poly_shift_coefficients(p, w):
    """Coefficients c_j with p(z - w) = sum_j c_j z^j for a polynomial LWeight p."""
    if not p.is_polynomial():
        raise PreconditionError("expected a polynomial l-weight")
    coeffs = [Fraction(1)]
    for a in p.roots(1, "num"):
        coeffs = _poly_mul(coeffs, [-w - a, 1])
    return [as_scalar(c) for c in coeffs]


# ---------------------------------------------------------------------------
# modules


class WeightModule:
    """Matrix realisation of a window of a module over Y_{-m}(sl2).

    ``xplus(n)``, ``xminus(n)`` and ``xi(p)`` return SparseMatrix tables
    (results are cached).  ``xi`` only needs to handle p >= -m.
    """

    def __init__(self, shift, basis, depth, xplus, xminus, xi, window=None, label="",
                 top_weight=None):
        self.shift = shift
        self.basis = list(basis)
        self.depth = list(depth)
        self.dim = len(self.basis)
        self.complete = window is None
        self.window = max(self.depth, default=0) if window is None else window
        self.label = label
        self._xp, self._xm, self._xi = xplus, xminus, xi
        self._cache = {}
        self.top_weight = top_weight

    def _get(self, key, make):
        m = self._cache.get(key)
        if m is None:
            m = make()
            self._cache[key] = m
        return m

    def xplus(self, n):
        if n < 0:
            raise ValueError("negative mode")
        return self._get(("+", n), lambda: self._xp(n))

    def xminus(self, n):
        if n < 0:
            raise ValueError("negative mode")
        return self._get(("-", n), lambda: self._xm(n))

    def xi(self, p):
        m = self.shift
        if p < -m - 1:
            return SparseMatrix.zero(self.dim)
        if p == -m - 1:
            return SparseMatrix.identity(self.dim)
        return self._get(("xi", p), lambda: self._xi(p))

    def x(self, sign, n):
        return self.xplus(n) if sign > 0 else self.xminus(n)

    def weight(self):
        """The weight operator xi_{-m}."""
        return self.xi(-self.shift)

    def window_arg(self):
        """``window`` argument that reproduces this module's exactness in derived modules."""
        return None if self.complete else self.window

    def in_window(self, depth_margin=0):
        """Basis indices whose depth is at most window - depth_margin."""
        return [i for i, d in enumerate(self.depth) if d <= self.window - depth_margin]

    def max_depth(self):
        return max(self.depth, default=0)

    def top_index(self):
        return self.depth.index(0)

    def bottom_index(self):
        return self.depth.index(self.max_depth())

    def __repr__(self):
        return f"WeightModule({self.label or '?'}, shift={self.shift}, dim={self.dim}, window={self.window})"


def restrict_columns(m, cols):
    keep = set(cols)
    return SparseMatrix(m.nrows, m.ncols, {i: {j: v for j, v in r.items() if j in keep} for i, r in m.rows.items()})


def matrix_residuals(lhs, rhs, cols=None, location=""):
    """List of (location, expected, got) for entries where lhs and rhs differ."""
    diff = lhs - rhs
    if cols is not None:
        diff = restrict_columns(diff, cols)
    return [(f"{location}[{i},{j}]", rhs.get(i, j), lhs.get(i, j)) for i, j, _ in diff.items()]


def module_2dim(a=0):
    """Two-dimensional evaluation module of Y_0 = Y(sl2) at the point a.

    x+_n = a^n E12, x-_n = a^n E21, xi_p = a^p (E11 - E22) for p >= 0.
    """
    a = as_scalar(a)

    def pw(n):
        return a ** n if n else Fraction(1)

    return WeightModule(
        0, ["e1", "e2"], [0, 1],
        lambda n: SparseMatrix.from_entries(2, 2, {(0, 1): pw(n)}),
        lambda n: SparseMatrix.from_entries(2, 2, {(1, 0): pw(n)}),
        lambda p: SparseMatrix.diag([pw(p), -pw(p)]),
        label=f"2dim({a})")


def module_one_dim(p, w=0):
    """One-dimensional module L(p)_w with xi(z) = p(z - w), for a polynomial LWeight p."""
    c = poly_shift_coefficients(p, w)
    deg = len(c) - 1
    # p(z - w) = sum_j e_j z^(deg - j) and xi_{j-deg-1} = e_j
    coeff = {j - deg - 1: c[deg - j] for j in range(deg + 1)}
    zero = lambda n: SparseMatrix.zero(1)
    return WeightModule(deg, ["w"], [0], zero, zero,
                        lambda q: SparseMatrix.diag([coeff.get(q, 0)]), label=f"L({p})_{w}")


def negative_prefundamental(depth, a=0):
    """Truncation to depth <= ``depth`` of L(Psi_a^-1) over Y_1 (shift m = -1).

    Basis v_k; x-_n v_k = (k+1)(-k)^n v_{k+1}, x+_n v_{k+1} = (-k)^n v_k and
    xi(z) v_k = (z-1)/((z+k-1)(z+k)).  A nonzero ``a`` is applied by ``deform``.
    """
    K = depth

    def pw(base, n):
        return Fraction(base) ** n if n else Fraction(1)

    def xm(n):
        return SparseMatrix(K + 1, K + 1, {k + 1: {k: (k + 1) * pw(-k, n)} for k in range(K)})

    def xp(n):
        return SparseMatrix(K + 1, K + 1, {k: {k + 1: pw(-k, n)} for k in range(K)})

    def xi(p):
        # xi_p v_k = (k+1)(-k)^p - k(1-k)^p for p >= 0
        return SparseMatrix.diag([(k + 1) * pw(-k, p) - k * pw(1 - k, p) for k in range(K + 1)])

    mod = WeightModule(-1, [f"v{k}" for k in range(K + 1)], list(range(K + 1)), xp, xm, xi,
                       window=K - 1, label=f"L(Psi_0^-1)[<= {K}]")
    return deform(mod, a) if a else mod


def _binomial_tables(V, w):
    """Mode tables of the spectral shift tau_w: X_P -> sum_k C(P, k) w^k X_{P-k}."""
    m = V.shift

    def xmode(sign):
        def make(n):
            out = SparseMatrix.zero(V.dim)
            for k in range(n + 1):
                out = out + V.x(sign, n - k).scale(gen_binomial(n, k) * (w ** k if k else 1))
            return out
        return make

    def xi(P):
        out = SparseMatrix.zero(V.dim)
        for k in range(0, P + m + 2):
            c = gen_binomial(P, k)
            if c:
                out = out + V.xi(P - k).scale(c * (w ** k if k else 1))
        return out

    return xmode(+1), xmode(-1), xi


def deform(V, w=None):
    """Pull back along the spectral shift tau_w (z -> z - w in all series)."""
    w = var("z") if w is None else as_scalar(w)
    xp, xm, xi = _binomial_tables(V, w)
    return WeightModule(V.shift, V.basis, V.depth, xp, xm, xi, V.window_arg(), label=f"{V.label}_({w})")


def twist_modes(V, coeffs, sign):
    """Replace x(sign)_n by sum_j c_j x(sign)_{n+j}; everything else unchanged."""
    def make(n):
        out = SparseMatrix.zero(V.dim)
        for j, c in enumerate(coeffs):
            if c:
                out = out + V.x(sign, n + j).scale(c)
        return out
    xp = make if sign > 0 else V.xplus
    xm = make if sign < 0 else V.xminus
    return WeightModule(V.shift, V.basis, V.depth, xp, xm, V.xi, V.window_arg(), label=V.label)


def tensor_onedim(p, w, V, side="left"):
    """Realise L(p)_w (x) V (side='left') or V (x) L(p)_w (side='right') on V.

    Left: x+_n -> sum_j c_j x+_{n+j}, xi_P -> sum_j c_j xi_{P+j}.  Right: the
    same substitution for x- instead of x+.  Here p(z - w) = sum_j c_j z^j.
    """
    c = poly_shift_coefficients(p, as_scalar(w))
    deg = len(c) - 1
    sign = +1 if side == "left" else -1
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    twisted = twist_modes(V, c, sign)

    def xi(P):
        out = SparseMatrix.zero(V.dim)
        for j, cj in enumerate(c):
            if cj:
                out = out + V.xi(P + j).scale(cj)
        return out

    label = f"L({p})_{w}*{V.label}" if side == "left" else f"{V.label}*L({p})_{w}"
    return WeightModule(V.shift + deg, V.basis, V.depth, twisted.xplus, twisted.xminus, xi, V.window_arg(), label=label)


def check_relations(V, modes=3, margin=None):
    """Residuals of the defining relations of Y_{-m} on V.

    Checks modes 0..``modes`` (xi indices -m-1..``modes``), on source columns
    of depth at most ``window - margin`` (default margin 2, enough for the
    quadratic relations).
    """
    m = V.shift
    margin = 2 if margin is None else margin
    cols = V.in_window(margin)
    res = []
    xi_range = range(-m - 1, modes + 1)
    for a in range(modes + 1):
        for b in range(modes + 1):
            if a + b >= -m - 1:
                lhs = V.xplus(a).commutator(V.xminus(b))
                res += matrix_residuals(lhs, V.xi(a + b), cols, f"[x+{a},x-{b}]")
    for sign in (+1, -1):
        s = "+" if sign > 0 else "-"
        for p in xi_range:
            for n in range(modes):
                lhs = V.xi(p + 1).commutator(V.x(sign, n)) - V.xi(p).commutator(V.x(sign, n + 1))
                rhs = (V.xi(p) @ V.x(sign, n) + V.x(sign, n) @ V.xi(p)).scale(sign)
                res += matrix_residuals(lhs, rhs, cols, f"xi{p}/x{s}{n}")
        for a in range(modes):
            for b in range(modes):
                lhs = V.x(sign, a + 1).commutator(V.x(sign, b)) - V.x(sign, a).commutator(V.x(sign, b + 1))
                rhs = (V.x(sign, a) @ V.x(sign, b) + V.x(sign, b) @ V.x(sign, a)).scale(sign)
                res += matrix_residuals(lhs, rhs, cols, f"x{s}{a}/x{s}{b}")
    for p in xi_range:
        for r in xi_range:
            if p < r:
                res += matrix_residuals(V.xi(p) @ V.xi(r), V.xi(r) @ V.xi(p), cols, f"[xi{p},xi{r}]")
    return res


# ---------------------------------------------------------------------------
# Verma modules and irreducible quotients


class VermaEngine:
    """Action of the generators on the Verma module M(f), vectors as {x- word: coef}.

    Words are weakly decreasing tuples of x- modes applied to the highest
    vector.  Nothing is truncated, so all pairings are exact.
    """

    def __init__(self, f):
        self.f = f
        self.m = f.coweight().values[0]
        rational = all(isinstance(r, Fraction) for r in list(f.num) + list(f.den) for r in [r[1]])
        # flint rationals are much faster than Fraction for the long linear combinations here
        self.one = flint.fmpq(1) if rational else self.one
        self._eig = {}
        self._xm, self._xp, self._xi, self._xixm = {}, {}, {}, {}

    def eigen(self, p):
        if p < -self.m - 1:
            return 0
        if p not in self._eig:
            for q, v in xi_eigenvalues(self.f, p + self.m + 2 + 8).items():
                if isinstance(v, Fraction) and isinstance(self.one, flint.fmpq):
                    v = flint.fmpq(v.numerator, v.denominator)
                self._eig[q] = v
        return self._eig[p]

    def _xi_past_xm(self, p, n):
        """xi_p x-_n = sum c x-_{n'} xi_{p'}, returned as {(n', p'): c}."""
        key = (p, n)
        if key in self._xixm:
            return self._xixm[key]
        m = self.m
        if p < -m - 1:
            out = {}
        elif p == -m - 1:
            out = {(n, p): 1}
        else:
            out = {(n, p): 1}
            for k, c in self._xi_past_xm(p - 1, n + 1).items():
                _add_into(out, k, c)
            _add_into(out, (n + 1, p - 1), -1)
            for k, c in self._xi_past_xm(p - 1, n).items():
                _add_into(out, k, -c)
            _add_into(out, (n, p - 1), -1)
        self._xixm[key] = out
        return out

    def xm_word(self, n, word):
        key = (n, word)
        if key in self._xm:
            return self._xm[key]
        if not word or n >= word[0]:
            out = {(n,) + word: self.one}
        else:
            a, b, rest = n, word[0], word[1:]
            if b == a + 1:
                pairs = [(1, a + 1, a), (1, a, a)]
            else:
                pairs = [(1, a + 1, b - 1), (-1, b - 1, a + 1), (1, b, a), (1, a, b - 1), (1, b - 1, a)]
            out = _lincomb((c, self.xm(p, self.xm_word(r, rest))) for c, p, r in pairs)
        self._xm[key] = out
        return out

    def xm(self, n, vec):
        return _lincomb((c, self.xm_word(n, w)) for w, c in vec.items())

    def xi_word(self, p, word):
        key = (p, word)
        if key in self._xi:
            return self._xi[key]
        if p < -self.m - 1:
            out = {}
        elif p == -self.m - 1:
            out = {word: self.one}
        elif not word:
            e = self.eigen(p)
            out = {(): e} if e else {}
        else:
            n, rest = word[0], word[1:]
            out = _lincomb((c, self.xm(n2, self.xi_word(p2, rest)))
                           for (n2, p2), c in self._xi_past_xm(p, n).items())
        self._xi[key] = out
        return out

    def xi(self, p, vec):
        return _lincomb((c, self.xi_word(p, w)) for w, c in vec.items())

    def xp_word(self, a, word):
        key = (a, word)
        if key in self._xp:
            return self._xp[key]
        if not word:
            out = {}
        else:
            n, rest = word[0], word[1:]
            out = _lincomb([(1, self.xm(n, self.xp_word(a, rest))), (1, self.xi_word(a + n, rest))])
        self._xp[key] = out
        return out

    def xp(self, a, vec):
        return _lincomb((c, self.xp_word(a, w)) for w, c in vec.items())

    def pairing(self, word, vec):
        """<x-_word w, vec> = coefficient of the highest vector in sigma(x-_word) vec."""
        for n in word:
            vec = self.xp(n, vec)
            if not vec:
                return 0
        return _from_engine(vec.get((), 0))


def _from_engine(x):
    if isinstance(x, flint.fmpq):
        return Fraction(int(x.p), int(x.q))
    return x


def verma_basis(depth, modes):
    """PBW words (weakly decreasing x- modes <= modes) of length <= depth."""
    out = []
    for k in range(depth + 1):
        for combo in combinations_with_replacement(range(modes, -1, -1), k):
            out.append(tuple(combo))
    return out


def _window_tables(engine, basis, coords):
    """Generator tables on ``basis`` from the engine, using ``coords(vec, depth)``."""
    index = {w: i for i, w in enumerate(basis)}
    dim = len(basis)

    def table(act):
        def make(n):
            rows = {}
            for j, w in enumerate(basis):
                for i, c in coords(act(n, {w: engine.one})).items():
                    rows.setdefault(i, {})[j] = c
            return SparseMatrix(dim, dim, rows)
        return make

    return table(engine.xp), table(engine.xm), table(engine.xi), index


def verma(f, depth, modes):
    """Window of the Verma module M(f): x- words with modes <= ``modes``, length <= ``depth``.

    Components that leave the window are dropped, so the tables are exact on
    depth <= depth - 1 only when all produced modes stay <= ``modes``.
    """
    engine = VermaEngine(f)
    basis = verma_basis(depth, modes)
    index = {w: i for i, w in enumerate(basis)}

    def coords(vec):
        return {index[w]: _from_engine(c) for w, c in vec.items() if w in index}

    xp, xm, xi, _ = _window_tables(engine, basis, coords)
    return WeightModule(engine.m, ["".join(map(str, w)) or "1" for w in basis], [len(w) for w in basis],
                        xp, xm, xi, window=depth - 1, label=f"M({f})")


def _independent_subset(gram, size):
    """Indices of a maximal set of linearly independent rows of a symmetric matrix."""
    from .core_arith import rref
    rows = [dict((j, gram[i][j]) for j in range(size) if gram[i][j]) for i in range(size)]
    _, pivots = rref(rows, size)
    return sorted(pivots)


def irreducible(f, depth, modes):
    """Window of the irreducible module L(f) up to depth ``depth``.

    Each weight space is the span of x- words with modes <= ``modes``
    modulo the radical of the contravariant pairing.  A basis is chosen among
    the words with nonsingular Gram block; coordinates come from pairing, so
    the tables are exact (provided ``modes`` is large enough for the words to
    span, which holds e.g. for modes = depth).  If some weight space up to
    ``depth`` vanishes, the module is finite-dimensional and marked complete.
    """
    engine = VermaEngine(f)
    chosen = []
    gram_inv = []
    for k in range(depth + 1):
        words = sorted(w for w in verma_basis(k, modes) if len(w) == k)
        gram = [[engine.pairing(a, {b: engine.one}) for b in words] for a in words]
        for i in range(len(words)):
            for j in range(i):
                if gram[i][j] != gram[j][i]:
                    raise PreconditionError(f"contravariant pairing not symmetric at depth {k}")
        idx = _independent_subset(gram, len(words))
        block = [words[i] for i in idx]
        chosen.append(block)
        if block:
            g = SparseMatrix.from_dense([[gram[i][j] for j in idx] for i in idx])
            gram_inv.append(matrix_inverse(g))
        else:
            gram_inv.append(None)
    basis, depths, offset = [], [], []
    for k, block in enumerate(chosen):
        offset.append(len(basis))
        basis += block
        depths += [k] * len(block)

    def coords(vec):
        if not vec:
            return {}
        k = len(next(iter(vec)))
        if k > depth or not chosen[k]:
            return {}
        pair = {i: engine.pairing(b, vec) for i, b in enumerate(chosen[k])}
        out = {}
        for i, row in gram_inv[k].rows.items():
            s = sum((v * pair[j] for j, v in row.items() if pair[j]), Fraction(0))
            if s:
                out[offset[k] + i] = s
        return out

    xp, xm, xi, _ = _window_tables(engine, basis, coords)
    # an empty weight space ends the module: it is finite-dimensional and complete
    finite = any(not block for block in chosen)
    return WeightModule(engine.m, ["".join(map(str, w)) or "1" for w in basis], depths, xp, xm, xi,
                        window=None if finite else depth - 1, label=f"L({f})")


def rescale_basis(V, factors):
    """Same module in the basis b'_i = factors[i] * b_i."""
    d = SparseMatrix.diag([as_scalar(c) for c in factors])
    dinv = SparseMatrix.diag([1 / as_scalar(c) for c in factors])
    conj = lambda get: (lambda n: dinv @ get(n) @ d)
    return WeightModule(V.shift, V.basis, V.depth, conj(V.xplus), conj(V.xminus), conj(V.xi), V.window_arg(), V.label)


# ---------------------------------------------------------------------------
# GKLO series, S-series and T-operators


def xi_bar_series(V, order):
    """xi_bar(z) = z^{-m} xi(z) as a matrix series in 1/z."""
    m = V.shift
    return TruncSeries({j: V.xi(j - m - 1) for j in range(order + 1)}, order, "zinv", V.dim)


def x_series(V, sign, order):
    """x(sign)(z) = sum_n x_n z^{-n-1}."""
    return TruncSeries({n + 1: V.x(sign, n) for n in range(order)}, order, "zinv", V.dim)


def gklo_series(V, order):
    """GKLO series A(z) with xi_bar(z) = 1/(A(z) A(z-1)); returns (A, a0).

    Writing log A = sum_m a_m u^{m+1}, the u^j coefficient of -log xi_bar equals
    2 a_{j-1} + sum_{m<j-1} a_m C(-m-1, j-m-1) (-1)^{j-m-1}.
    """
    L = series_log(xi_bar_series(V, order))
    a = []
    for j in range(1, order + 1):
        acc = -L.coeffs.get(j, 0)
        for mm in range(j - 1):
            if a[mm]:
                acc = acc - a[mm].scale(gen_binomial(-mm - 1, j - mm - 1) * (-1) ** (j - mm - 1))
        a.append(acc.scale(HALF) if acc else SparseMatrix.zero(V.dim))
    A = series_exp(TruncSeries({mm + 1: c for mm, c in enumerate(a)}, order, "zinv", V.dim))
    return A, a[0] if a else SparseMatrix.zero(V.dim)


def s_series(V, p, order):
    """S_p(w) = prod_k S(w + a_k) for p = prod_k Psi_{a_k}; S solves S(z+1) = S(z) A(z) (z/(z+1))^{a0}.

    Returned to order ``order`` in 1/w.
    """
    A, a0 = gklo_series(V, order + 1)
    S1 = solve_additive_difference(A, 1, a0)
    out = TruncSeries.one(order, "zinv", V.dim)
    for a in p.roots(1, "num"):
        out = out * (S1.shift(as_scalar(a)) if a else S1)
    return out.truncate(order)


def _p_minus_w_power(p, k, order):
    """p(-w)^k as a Laurent series in u = 1/w, exact up to u^order."""
    roots = p.roots(1, "num")
    d = len(roots)
    # p(-w) = (-1)^d w^d prod(1 + a u)
    body = TruncSeries.one(order + d * abs(k) + 1, "zinv")
    for a in roots:
        a = as_scalar(a)
        if k >= 0:
            factor = TruncSeries({1: a} if a else {}, body.order, "zinv") + 1
            for _ in range(k):
                body = body * factor
        else:
            body = body * TruncSeries({j: gen_binomial(k, j) * (a ** j if j else 1) for j in range(body.order + 1)},
                                      body.order, "zinv")
    sign = Fraction(-1) ** (d * k)
    return TruncSeries({j - d * k: sign * c for j, c in body.coeffs.items()}, order, "zinv")


def grading(V, kind="top"):
    """Root grading in multiples of alpha: -depth ('top') or height above the bottom ('bottom')."""
    if kind == "top":
        return [-d for d in V.depth]
    top = V.max_depth()
    return [top - d for d in V.depth]


def _dressing(V, p, order, kind, inverse=False):
    """Diagonal series multiplying the degree-beta part by p(-w)^{-<varpi, beta>} (or its inverse)."""
    g = grading(V, kind)
    sign = 1 if inverse else -1
    powers = {k: _p_minus_w_power(p, sign * k, order) for k in set(g)}
    low = min(min(s.coeffs, default=0) for s in powers.values())
    coeffs = {}
    for i, gi in enumerate(g):
        for e, c in powers[gi].coeffs.items():
            coeffs.setdefault(e, {})[i] = c
    D = TruncSeries({e: SparseMatrix.diag([row.get(i, 0) for i in range(V.dim)]) for e, row in coeffs.items()},
                    order, "zinv", V.dim)
    return D, low


def t_operator(V, p, order, kind="top"):
    """T_p(w) = D_{p,w} S_p(w), D multiplying the degree-beta part by p(-w)^{-<varpi, beta>}."""
    S = s_series(V, p, order)
    D, low = _dressing(V, p, order, kind)
    return (D * S).truncate(order + low)


def series_to_wmatrix(T, cols=None, var_name="w"):
    """Turn a series in 1/w whose positive powers vanish into a matrix of polynomials in w."""
    w = var(var_name)
    if T.order < 1:
        raise PreconditionError("need at least one positive power of 1/w to certify polynomiality")
    out = SparseMatrix.zero(T.dim)
    for e, c in T.coeffs.items():
        if cols is not None:
            c = restrict_columns(c, cols)
        if e >= 1:
            if not c.is_zero():
                raise PreconditionError(f"series has a nonzero w^{-e} coefficient")
            continue
        out = out + c.map(lambda x: as_scalar(x * w ** (-e)))
    return out.map(as_scalar)


def _default_order(V, p, extra=8):
    return len(p.roots(1, "num")) * V.max_depth() + extra


def t_bar(V, p, order=None):
    """Normalized T-operator f^{-1} T_p(w) (top grading) as a polynomial matrix in w.

    f is the eigenvalue of T_p(w) on the top space, where the dressing is trivial.
    """
    order = _default_order(V, p) if order is None else order
    S = s_series(V, p, order)
    top = V.top_index()
    f = TruncSeries({e: c.get(top, top) for e, c in S.coeffs.items()}, S.order, "zinv")
    D, low = _dressing(V, p, order, "top")
    Tb = (D * (S * series_inverse(f))).truncate(order + low)
    return series_to_wmatrix(Tb, V.in_window())


def t_tilde(V, p, order=None):
    """g T_p(w)^{-1} for the bottom grading, g the eigenvalue on the bottom vector."""
    order = _default_order(V, p) if order is None else order
    S = s_series(V, p, order)
    bot = V.bottom_index()
    g = TruncSeries({e: c.get(bot, bot) for e, c in S.coeffs.items()}, S.order, "zinv")
    Dinv, low = _dressing(V, p, order, "bottom", inverse=True)
    Tt = ((series_inverse(S) * g) * Dinv).truncate(order + low)
    return series_to_wmatrix(Tt, V.in_window())


def t_intertwining_residuals(V, p, Tb, modes=2):
    """Residuals of T (L(p)_w (x) V) = (V (x) L(p)_w) T on generators, Tb polynomial in w."""
    w = var("w")
    left = tensor_onedim(p, w, V, "left")
    right = tensor_onedim(p, w, V, "right")
    cols = V.in_window(1)
    res = []
    for n in range(modes + 1):
        res += matrix_residuals(Tb @ left.xminus(n), right.xminus(n) @ Tb, cols, f"T x-{n}")
        res += matrix_residuals(Tb @ left.xplus(n), right.xplus(n) @ Tb, cols, f"T x+{n}")
    for P in range(-left.shift, -left.shift + modes + 1):
        res += matrix_residuals(Tb @ left.xi(P), right.xi(P) @ Tb, cols, f"T xi{P}")
    return res


# ---------------------------------------------------------------------------
# identity checks on modules


def _restricted_series_residuals(lhs, rhs, order, cols, location):
    out = []
    for e in range(min(lhs.order, rhs.order, order) + 1):
        a = lhs.coeffs.get(e, SparseMatrix.zero(lhs.dim))
        b = rhs.coeffs.get(e, SparseMatrix.zero(rhs.dim))
        out += matrix_residuals(a if a else SparseMatrix.zero(lhs.dim), b if b else SparseMatrix.zero(lhs.dim),
                                cols, f"{location} u^{e}")
    return out


def difference_residuals(V, order=8):
    """Residuals of S(z+1) = S(z) A(z) (z/(z+1))^{a0}, to order ``order``."""
    A, a0 = gklo_series(V, order + 1)
    S = solve_additive_difference(A, 1, a0)
    lhs = S.shift(1)
    rhs = (S * A * series_pow(z_over_z_plus(1, order), a0)).truncate(order)
    return _restricted_series_residuals(lhs, rhs, order, V.in_window(), "S(z+1)")


def xi_s_residuals(V, order=8):
    """Residuals of xi_bar(z) = S(z-1) S(z+1)^{-1} ((z-1)/(z+1))^{a0}."""
    A, a0 = gklo_series(V, order + 1)
    S = solve_additive_difference(A, 1, a0)
    ratio = TruncSeries({0: 1, 1: -1}, order, "zinv") * series_inverse(TruncSeries({0: 1, 1: 1}, order, "zinv"))
    rhs = (S.shift(-1) * series_inverse(S.shift(1)) * series_pow(ratio, a0)).truncate(order)
    return _restricted_series_residuals(xi_bar_series(V, order), rhs, order, V.in_window(), "xi_bar")


def xi_t_residuals(V, order=8):
    """Residuals of xi_bar(w) = ((w-1)/(w+1))^kappa T(w-1) T(w+1)^{-1}, T = T_{Psi_0} top graded.

    kappa = a0 - depth must be a scalar; it is -1/2 times the top weight.
    """
    A, a0 = gklo_series(V, order + 1)
    kappa_op = a0 - SparseMatrix.diag([Fraction(d) for d in V.depth])
    cols = V.in_window()
    kappas = {kappa_op.get(i, i) for i in cols}
    if len(kappas) != 1 or restrict_columns(kappa_op - SparseMatrix.diag([kappa_op.get(i, i) for i in range(V.dim)]),
                                            cols).nnz():
        raise PreconditionError("a0 - depth is not a scalar on this module")
    kappa = kappas.pop()
    p = LWeight.psi("yangian", 1, 0)
    depth = V.max_depth()
    T = t_operator(V, p, order + depth + 2)
    ratio = TruncSeries({0: 1, 1: -1}, order + depth + 2, "zinv") * series_inverse(
        TruncSeries({0: 1, 1: 1}, order + depth + 2, "zinv"))
    lhs = (T.shift(-1) * series_inverse_laurent(T.shift(1))) * series_pow(ratio, kappa)
    return _restricted_series_residuals(xi_bar_series(V, order), lhs.truncate(order), order, cols, "xi_bar(w)")


def series_inverse_laurent(T):
    """Inverse of a matrix Laurent series T = diag(u^{v_i}) U with U(0) invertible, v_i the row valuations."""
    n = T.dim
    val = [min((e for e, c in T.coeffs.items() if c.rows.get(i)), default=None) for i in range(n)]
    if None in val:
        raise PreconditionError("series has a zero row")
    top = max(val)
    order = T.order - top
    U = {}
    for e, c in T.coeffs.items():
        for i, row in c.rows.items():
            if e - val[i] <= order:
                U.setdefault(e - val[i], {})[i] = row
    U = TruncSeries({e: SparseMatrix(n, n, rows) for e, rows in U.items()}, order, "zinv", n)
    u0inv = matrix_inverse(U.coeffs[0])
    inv = series_inverse(TruncSeries({e: u0inv @ c for e, c in U.coeffs.items()}, order, "zinv", n))
    inv = TruncSeries({e: c @ u0inv for e, c in inv.coeffs.items()}, order, "zinv", n)
    # right multiplication by diag(u^{-v_j}) shifts column j
    out = {}
    for e, c in inv.coeffs.items():
        for i, j, x in c.items():
            out.setdefault(e - val[j], {}).setdefault(i, {})[j] = x
    return TruncSeries({e: SparseMatrix(n, n, rows) for e, rows in out.items()}, order - top, "zinv", n)


def comm_a_x_residuals(V, order=8, modes=2):
    """Residuals of A x-_n A^{-1} = x-_n + sum_j x-_{n+j} z^{-j-1} and the x+ analogue."""
    A, _ = gklo_series(V, order)
    Ainv = series_inverse(A)
    res = []
    for n in range(modes + 1):
        for sign in (-1, 1):
            x = V.x(sign, n)
            if sign < 0:
                lhs = A * x * Ainv
                cols = V.in_window(1)
            else:
                lhs = Ainv * x * A
                cols = V.in_window()
            rhs = TruncSeries({j + 1: V.x(sign, n + j) for j in range(order)}, order, "zinv", V.dim) + x
            s = "-" if sign < 0 else "+"
            res += _restricted_series_residuals(lhs, rhs, order, cols, f"A x{s}{n}")
    return res


# ---------------------------------------------------------------------------
# tensor products


def _kron_id(A, n, left=True):
    I = SparseMatrix.identity(n)
    return A.kron(I) if left else I.kron(A)


def tensor(M, N, constant=None):
    """M (x) N through the (shifted) coproduct; one factor must have shift 0, the other <= 0.

    On the generating modes (s = -(shift of the product)):
    x+_0 -> x+_0 (x) 1 + 1 (x) x+_0 (second term only if M has shift 0),
    x-_0 -> 1 (x) x-_0 + x-_0 (x) 1 (second term only if N has shift 0),
    xi_s -> xi (x) 1 + 1 (x) xi on the weight modes,
    xi_{s+1} -> xi_{.+1} (x) 1 + 1 (x) xi_{.+1} + xi (x) xi + c x-_0 (x) x+_0.
    Higher modes follow from the defining relations.  ``constant`` is c
    (default: the value fixed by ``coproduct_constant``).
    """
    mM, mN = M.shift, N.shift
    if max(mM, mN) != 0 or min(mM, mN) > 0:
        raise NotImplementedError("tensor products need one factor of shift 0 and the other of shift <= 0")
    c = coproduct_constant() if constant is None else constant
    dM, dN = M.dim, N.dim
    m = mM + mN
    s = -m
    IM, IN = SparseMatrix.identity(dM), SparseMatrix.identity(dN)

    def both(A, B):
        return A.kron(IN) + IM.kron(B)

    xp0 = M.xplus(0).kron(IN) + (IM.kron(N.xplus(0)) if mM == 0 else SparseMatrix.zero(dM * dN))
    xm0 = IM.kron(N.xminus(0)) + (M.xminus(0).kron(IN) if mN == 0 else SparseMatrix.zero(dM * dN))
    h0 = both(M.xi(-mM), N.xi(-mN))
    h1 = (both(M.xi(-mM + 1), N.xi(-mN + 1)) + M.xi(-mM).kron(N.xi(-mN))
          + M.xminus(0).kron(N.xplus(0)).scale(c))

    def xmode(sign):
        def make(n):
            if n == 0:
                return xp0 if sign > 0 else xm0
            prev = T.x(sign, n - 1)
            return (h1.commutator(prev).scale(sign * HALF) - (h0 @ prev + prev @ h0).scale(HALF))
        return make

    def xi(p):
        if p == s:
            return h0
        if p == s + 1:
            return h1
        return T.xplus(p).commutator(T.xminus(0))

    basis = [(a, b) for a in M.basis for b in N.basis]
    depth = [dm + dn for dm in M.depth for dn in N.depth]
    if M.complete and N.complete:
        window = None
    elif M.complete:
        window = N.window
    elif N.complete:
        window = M.window
    else:
        window = min(M.window, N.window)
    T = WeightModule(m, basis, depth, xmode(+1), xmode(-1), xi, window=window,
                     label=f"({M.label})*({N.label})")
    return T


_COPRODUCT_CONSTANT = []


def coproduct_constant():
    """The constant c in Delta(xi_1) = xi_1 (x) 1 + 1 (x) xi_1 + xi_0 (x) xi_0 + c x-_0 (x) x+_0.

    Determined by requiring [x+_1, x-_0] = xi_1 on 2dim(a) (x) 2dim(b) with c a
    free symbol, x+_1 being generated from xi_0, xi_1 and x+_0.
    """
    if _COPRODUCT_CONSTANT:
        return _COPRODUCT_CONSTANT[0]
    c = var("c")
    T = tensor(module_2dim(var("a")), module_2dim(var("b")), constant=c)
    diff = T.xplus(1).commutator(T.xminus(0)) - T.xi(1)
    rows, rhs = [], []
    for _, _, v in diff.items():
        # v is affine in c: v = alpha c + beta
        beta = subs(v, {"c": 0})
        alpha = as_scalar(subs(v, {"c": 1}) - beta)
        rows.append({0: alpha})
        rhs.append(-beta)
    sol, null = solve_linear(rows, rhs, 1)
    if null:
        raise PreconditionError("coproduct constant is not determined")
    value = as_scalar(sol.get(0, 0))
    if not isinstance(value, Fraction):
        raise PreconditionError(f"coproduct constant depends on parameters: {value}")
    _COPRODUCT_CONSTANT.append(value)
    return value


# ---------------------------------------------------------------------------
# Theta series


def _nilpotent_exp(X):
    out = SparseMatrix.identity(X.nrows)
    power = SparseMatrix.identity(X.nrows)
    n = 1
    while True:
        power = (power @ X).scale(Fraction(1, n))
        if power.is_zero():
            return out
        out = out + power
        n += 1
        if n > X.nrows + 1:
            raise PreconditionError("operator is not nilpotent")


def theta_operator(M, N, p, w=None):
    """Closed form of Theta_p(w) on M (x) N, for a polynomial l-weight p.

    Theta_{Psi_a} = exp(x-_0 (x) x+_0) and, writing p = Psi_a r,
    Theta_p = (Id (x) psi+_r)(Theta_{Psi_a}) (psi-_{Psi_a} (x) Id)(Theta_r)
    where psi+-_r replaces x(+-)_0 by the mode 0 part of r(z - w) x(+-)(z).
    """
    w = var("w") if w is None else w
    roots = p.roots(1, "num")
    if not p.is_polynomial():
        raise PreconditionError("Theta needs a polynomial l-weight")
    if not roots:
        return SparseMatrix.identity(M.dim * N.dim)
    a, rest = roots[0], LWeight("yangian", 1, [(1, b) for b in roots[1:]])
    Nt = twist_modes(N, poly_shift_coefficients(rest, w), +1)
    first = _nilpotent_exp(M.xminus(0).kron(Nt.xplus(0)))
    Mt = twist_modes(M, poly_shift_coefficients(LWeight.psi("yangian", 1, a), w), -1)
    return first @ theta_operator(Mt, N, rest, w)


def theta_via_factorization(M, N, p, order=None):
    """Theta_p(w) = (1 (x) Tbar^N)^{-1} Tbar^{M (x) N} (Tbar^M (x) 1)^{-1} from exact T-operators."""
    MN = tensor(M, N)
    TM, TN, TMN = t_bar(M, p, order), t_bar(N, p, order), t_bar(MN, p, order)
    left = matrix_inverse(SparseMatrix.identity(M.dim).kron(TN))
    right = matrix_inverse(TM.kron(SparseMatrix.identity(N.dim)))
    return (left @ TMN @ right).map(as_scalar)


def theta_components(Th, M, N):
    """Split Theta by the root degree n: the part moving M-depth up by n and N-depth down by n."""
    comps = {}
    dN = N.dim
    for r, c, v in Th.items():
        n = M.depth[r // dN] - M.depth[c // dN]
        comps.setdefault(n, {}).setdefault(r, {})[c] = v
    return {n: SparseMatrix(Th.nrows, Th.ncols, rows) for n, rows in comps.items()}


def theta_degree_residuals(Th, M, N, p, var_name="w"):
    """Entries of the degree-n part whose w-degree exceeds n * deg p."""
    d = len(p.roots(1, "num"))
    res = []
    for n, comp in sorted(theta_components(Th, M, N).items()):
        for i, j, v in comp.items():
            deg = RatFunc.coerce(v).degree(var_name) if isinstance(v, RatFunc) else 0
            if not (isinstance(v, Fraction) or RatFunc.coerce(v).is_polynomial()) or deg > n * d:
                res.append((f"Theta_{n}[{i},{j}]", f"deg <= {n * d}", v))
    return res


def theta_triangularity_residuals(Th, M, N):
    """Entries of Theta that do not raise M-depth and lower N-depth by the same n >= 0."""
    dN = N.dim
    res = []
    for r, c, v in Th.items():
        up = M.depth[r // dN] - M.depth[c // dN]
        down = N.depth[c % dN] - N.depth[r % dN]
        if up != down or up < 0:
            res.append((f"Theta[{r},{c}]", "pure of weight n alpha", v))
    return res


def coproduct_s_residuals(M, N, order=8):
    """Residuals of Delta(S(z)) = (1 (x) S(z)) exp(-z^{-1} x-_0 (x) x+_0) (S(z) (x) 1), p = Psi_0."""
    p = LWeight.psi("yangian", 1, 0)
    MN = tensor(M, N)
    S = s_series(MN, p, order)
    SM, SN = s_series(M, p, order), s_series(N, p, order)
    IM, IN = SparseMatrix.identity(M.dim), SparseMatrix.identity(N.dim)
    left = SN.map(lambda c: IM.kron(c), MN.dim)
    right = SM.map(lambda c: c.kron(IN), MN.dim)
    X = M.xminus(0).kron(N.xplus(0)).scale(-1)
    omega = series_exp(TruncSeries({1: X}, order, "zinv", MN.dim))
    rhs = (left * omega * right).truncate(order)
    cols = MN.in_window()
    return _restricted_series_residuals(S, rhs, order, cols, "Delta S")


# ---------------------------------------------------------------------------
# R-matrices


class RMatrix:
    """Solved braiding R: M (x) N -> N (x) M on total depth <= ``depth``.

    ``matrix`` is indexed by (N (x) M basis, M (x) N basis).  Convention:
    R(e_j (x) v) = sum_i (R_ij v) (x) e_i for e_j in M, v in N.
    """

    def __init__(self, M, N, matrix, depth):
        self.M, self.N, self.matrix, self.depth = M, N, matrix, depth

    def block(self, i, j):
        """The operator R_ij on N, on columns v_n with depth(e_j) + depth(v_n) <= depth."""
        dM, dN = self.M.dim, self.N.dim
        rows = {}
        for n in range(dN):
            if self.M.depth[j] + self.N.depth[n] > self.depth:
                continue
            for r, v in ((r, self.matrix.get(r, j * dN + n)) for r in range(self.matrix.nrows)):
                if v and r % dM == i:
                    rows.setdefault(r // dM, {})[n] = v
        return SparseMatrix(dN, dN, rows)


def nm_block(X, M, N, i, j):
    """Operator block X_ij on N of an endomorphism X of N (x) M."""
    dM, dN = M.dim, N.dim
    rows = {}
    for r, c, v in X.items():
        if r % dM == i and c % dM == j:
            rows.setdefault(r // dM, {})[c // dM] = v
    return SparseMatrix(dN, dN, rows)


def solve_rmatrix(M, N, depth=None):
    """Solve R (M (x) N)(X) = (N (x) M)(X) R for X in x+_0, x-_0 and the two lowest xi modes.

    The unknowns are the weight blocks of total depth <= ``depth`` (default
    the window of N); R is normalised to 1 on highest (x) highest.  Raises if
    the system is inconsistent or the solution is not unique.
    """
    MN, NM = tensor(M, N), tensor(N, M)
    D = min(MN.window, NM.window) if depth is None else depth
    s = -MN.shift
    unknown = {}
    for u in range(MN.dim):
        if MN.depth[u] > D:
            continue
        for t in range(NM.dim):
            if NM.depth[t] == MN.depth[u]:
                unknown[(t, u)] = len(unknown)
    rows, rhs = [], []
    gens = [(MN.xplus(0), NM.xplus(0), -1), (MN.xminus(0), NM.xminus(0), +1),
            (MN.xi(s), NM.xi(s), 0), (MN.xi(s + 1), NM.xi(s + 1), 0)]
    by_depth = {}
    for t in range(NM.dim):
        by_depth.setdefault(NM.depth[t], []).append(t)
    for XA, XB, delta in gens:
        for u in range(MN.dim):
            d = MN.depth[u]
            if d > D or d + delta > D or d + delta < 0:
                continue
            col = XA.column(u)
            for t in by_depth.get(d + delta, []):
                eq = {}
                for u2, xv in col.items():
                    _add_into(eq, unknown[(t, u2)], xv)
                for t2, xv in XB.rows.get(t, {}).items():
                    if NM.depth[t2] == d:
                        _add_into(eq, unknown[(t2, u)], -xv)
                if eq:
                    rows.append(eq)
                    rhs.append(0)
    top_mn = MN.depth.index(0)
    top_nm = NM.depth.index(0)
    rows.append({unknown[(top_nm, top_mn)]: Fraction(1)})
    rhs.append(Fraction(1))
    sol, null = solve_linear(rows, rhs, len(unknown))
    if null:
        raise PreconditionError(f"R-matrix not unique: {len(null)} free parameters")
    entries = {}
    for (t, u), k in unknown.items():
        v = sol.get(k)
        if v:
            entries[(t, u)] = as_scalar(v)
    return RMatrix(M, N, SparseMatrix.from_entries(NM.dim, MN.dim, entries), D)


def rmatrix_residuals(R, depth=None):
    """Residuals of the intertwining relations for a solved R on x+-_n and xi_p, n, p small."""
    MN, NM = tensor(R.M, R.N), tensor(R.N, R.M)
    D = R.depth if depth is None else depth
    s = -MN.shift
    cols = [u for u in range(MN.dim) if MN.depth[u] <= D - 1]
    res = []
    for n in range(2):
        res += matrix_residuals(R.matrix @ MN.xplus(n), NM.xplus(n) @ R.matrix, cols, f"R x+{n}")
        res += matrix_residuals(R.matrix @ MN.xminus(n), NM.xminus(n) @ R.matrix, cols, f"R x-{n}")
    for p in (s, s + 1, s + 2):
        res += matrix_residuals(R.matrix @ MN.xi(p), NM.xi(p) @ R.matrix, cols, f"R xi{p}")
    return res


def block_inverse(R):
    """Inverse of R weight block by weight block, on the complete blocks of depth <= R.depth."""
    MN, NM = tensor(R.M, R.N), tensor(R.N, R.M)
    entries = {}
    for d in range(R.depth + 1):
        src = [u for u in range(MN.dim) if MN.depth[u] == d]
        tgt = [t for t in range(NM.dim) if NM.depth[t] == d]
        if len(src) != len(tgt):
            raise PreconditionError(f"weight block {d} is not square")
        sub = R.matrix.submatrix(tgt, src)
        inv = matrix_inverse(sub)
        for i, j, v in inv.items():
            entries[(src[i], tgt[j])] = as_scalar(v)
    return SparseMatrix.from_entries(MN.dim, NM.dim, entries)


def mn_block(X, M, N, i, j, depth):
    """Operator block on N of a map X: N (x) M -> M (x) N, X(v (x) e_j) = sum_i e_i (x) X_ij v."""
    dM, dN = M.dim, N.dim
    rows = {}
    for r, c, v in X.items():
        if c % dM == j and r // dN == i and M.depth[j] + N.depth[c // dM] <= depth:
            rows.setdefault(r % dN, {})[c // dM] = v
    return SparseMatrix(dN, dN, rows)


class RCompositeResult:
    def __init__(self, R, theta_inv, t_tilde_op, composite, blocks):
        self.R = R
        self.theta_inverse = theta_inv
        self.t_tilde = t_tilde_op
        self.composite = composite
        self.blocks = blocks


def compose_rmatrix_triple(M, N, p, depth=None):
    """Theta^{-1} (Id (x) Ttilde^M(w)) R on N (x) M, with R solved for M (x) N.

    Returns the pieces and the 2x2 operator blocks of the composite (for a
    two-dimensional M).  ``p`` is a polynomial l-weight with N of coweight -p.
    """
    R = solve_rmatrix(M, N, depth)
    theta = theta_operator(N, M, p)
    theta_inv = matrix_inverse(theta).map(as_scalar)
    Tt = t_tilde(M, p)
    idT = SparseMatrix.identity(N.dim).kron(Tt)
    composite = (theta_inv @ idT @ R.matrix).map(as_scalar)
    blocks = {}
    for i in range(M.dim):
        for j in range(M.dim):
            blocks[(i, j)] = _restrict_block(composite, M, N, i, j, R.depth)
    return RCompositeResult(R, theta_inv, Tt, composite, blocks)


def _restrict_block(X, M, N, i, j, depth):
    dM, dN = M.dim, N.dim
    rows = {}
    for n in range(dN):
        if M.depth[j] + N.depth[n] > depth:
            continue
        for r in range(X.nrows):
            v = X.get(r, j * dN + n)
            if v and r % dM == i:
                rows.setdefault(r // dM, {})[n] = v
    return SparseMatrix(dN, dN, rows)


def composite_intertwining_residuals(result, p, w=None):
    """The composite must intertwine M (x) N' and N' (x) M, N' = N (x) L(p)_w (shift 0)."""
    w = var("w") if w is None else w
    M, N = result.R.M, result.R.N
    N2 = tensor_onedim(p, w, N, "right")
    A, B = tensor(M, N2), tensor(N2, M)
    X = result.composite
    D = result.R.depth
    cols = [u for u in range(A.dim) if A.depth[u] <= D - 1]
    res = []
    for name, gA, gB in [("x+0", A.xplus(0), B.xplus(0)), ("x-0", A.xminus(0), B.xminus(0)),
                         ("xi0", A.xi(0), B.xi(0)), ("xi1", A.xi(1), B.xi(1))]:
        res += matrix_residuals(X @ gA, gB @ X, cols, f"composite {name}")
    return res


def associativity_residuals(M, N, p, w=None, modes=2):
    """M (x) (N (x) L(p)_w) and (M (x) N) (x) L(p)_w agree as modules on the same space."""
    w = var("w") if w is None else w
    A = tensor(M, tensor_onedim(p, w, N, "right"))
    B = tensor_onedim(p, w, tensor(M, N), "right")
    cols = A.in_window(1)
    res = []
    for n in range(modes + 1):
        res += matrix_residuals(A.xplus(n), B.xplus(n), cols, f"x+{n}")
        res += matrix_residuals(A.xminus(n), B.xminus(n), cols, f"x-{n}")
    for P in range(-A.shift, -A.shift + modes + 1):
        res += matrix_residuals(A.xi(P), B.xi(P), cols, f"xi{P}")
    return res


# ---------------------------------------------------------------------------
# lowest diagonal entries and asymptotic modules


def _rational_from_series(coeffs, degree):
    """(num, den) coefficient lists with num/den = sum coeffs[j] u^j, deg <= degree, den(0) = 1."""
    D = degree
    rows, rhs = [], []
    for k in range(D + 1, 2 * D + 1):
        # sum_{i=0..D} den_i coeffs[k - i] = 0, den_0 = 1
        rows.append({i - 1: coeffs[k - i] for i in range(1, D + 1) if coeffs[k - i]})
        rhs.append(-coeffs[k])
    sol, _ = solve_linear(rows, rhs, D)
    den = [Fraction(1)] + [as_scalar(sol.get(i, 0)) for i in range(D)]
    num = [sum((den[i] * coeffs[k - i] for i in range(min(k, D) + 1)), Fraction(0)) for k in range(D + 1)]
    # the reconstruction must reproduce every given coefficient
    check = _poly_mul(num, [1])
    inv = [Fraction(1)]
    for k in range(1, len(coeffs)):
        inv.append(-sum((den[i] * inv[k - i] for i in range(1, min(k, D) + 1)), Fraction(0)))
    series = _poly_mul(check, inv)[:len(coeffs)]
    if [as_scalar(c) for c in series] != [as_scalar(c) for c in coeffs]:
        raise PreconditionError("series is not a rational function of the given degree")
    return num, den


def _reciprocal_roots(coeffs):
    """Numbers a with prod(1 - a u) equal to the given polynomial in u (constant term 1)."""
    while coeffs and coeffs[-1] == 0:
        coeffs = coeffs[:-1]
    if len(coeffs) <= 1:
        return []
    # prod(1 - a u) reversed is prod(x - a)
    poly = flint.fmpq_poly([flint.fmpq(c.numerator, c.denominator) for c in reversed(coeffs)])
    _, factors = poly.factor()
    roots = []
    for fac, mult in factors:
        if fac.degree() != 1:
            raise PreconditionError(f"l-weight has an irrational factor {fac}")
        a = -fac[0] / fac[1]
        roots += [Fraction(int(a.p), int(a.q))] * int(mult)
    return roots


def eigen_lweight(V, index, degree=None):
    """The l-weight of a basis vector on which all xi_p act diagonally, as an LWeight."""
    degree = V.dim if degree is None else degree
    m = V.shift
    coeffs = []
    for j in range(2 * degree + 3):
        X = V.xi(j - m - 1)
        col = X.column(index)
        if any(i != index for i in col):
            raise PreconditionError("basis vector is not an l-weight vector")
        coeffs.append(Fraction(col.get(index, 0)))
    num, den = _rational_from_series(coeffs, degree)
    top, bottom = _reciprocal_roots(num), _reciprocal_roots(den)
    # roots at 0 are invisible in the 1/z expansion; the shift fixes their count
    zeros = m - (len(top) - len(bottom))
    top += [Fraction(0)] * max(zeros, 0)
    bottom += [Fraction(0)] * max(-zeros, 0)
    return LWeight("yangian", 1, [(1, a) for a in top], [(1, b) for b in bottom])


class LowestDiagonal:
    def __init__(self, t, lam, m, n, residuals):
        self.t, self.lam, self.m, self.n, self.residuals = t, lam, m, n, residuals


def lowest_diagonal(V, depth=8):
    """Lowest diagonal entry t_{V,W}(z) of R for W = L(Psi_0^{-1}) and the identity t T_n = lambda T_m.

    V is a finite-dimensional module over Y_0 with lowest l-weight m/n; the
    R-matrix is solved for V_z (x) W with W truncated deep enough for the
    bottom block of V to reach depth ``depth`` of W.
    """
    z = var("z")
    W = negative_prefundamental(depth + V.max_depth() + 1)
    R = solve_rmatrix(deform(V, z), W)
    bottom = V.bottom_index()
    t = R.block(bottom, bottom)
    lam = t.get(0, 0)
    low = eigen_lweight(V, bottom)
    m = LWeight("yangian", 1, list(low.num.elements()))
    n = LWeight("yangian", 1, list(low.den.elements()))
    cols = [k for k in range(W.dim) if k <= depth]
    Tn = t_bar(W, n).map(lambda x: subs(x, {"w": z})) if n.num else SparseMatrix.identity(W.dim)
    Tm = t_bar(W, m).map(lambda x: subs(x, {"w": z})) if m.num else SparseMatrix.identity(W.dim)
    res = matrix_residuals((t @ Tn).map(as_scalar), Tm.scale(lam).map(as_scalar), cols, "t T_n")
    poly = RatFunc.coerce(lam)
    if not poly.is_polynomial():
        res.append(("lambda", "polynomial", lam))
    else:
        lead = _leading_z(poly)
        if lead != 1:
            res.append(("lambda leading coefficient", 1, lead))
    return LowestDiagonal(t, lam, m, n, res)


def _leading_z(p):
    """Leading coefficient in z of a polynomial RatFunc."""
    d = p.degree("z")
    # coefficient of z^d: differentiate-free route via substitution z -> 1/u and u -> 0
    u = var("y")
    q = RatFunc.coerce(subs(p, {"z": 1 / u})) * u ** d
    return as_scalar(subs(q, {"y": 0}))


def isomorphic_by_rescaling(A, B, modes=2):
    """Residuals of B = D^{-1} A D for the diagonal D fixed by matching x-_0 on 1-dimensional weight spaces."""
    if A.dim != B.dim or A.depth != B.depth:
        return [("shape", (B.dim, B.depth), (A.dim, A.depth))]
    factors = [Fraction(1)] * A.dim
    xa, xb = A.xminus(0), B.xminus(0)
    for k in range(1, A.dim):
        va, vb = xa.get(k, k - 1), xb.get(k, k - 1)
        if not va or not vb:
            return [("x-0", vb, va)]
        factors[k] = factors[k - 1] * va / vb
    C = rescale_basis(A, factors)
    cols = A.in_window(1)
    res = []
    for n in range(modes + 1):
        res += matrix_residuals(C.xplus(n), B.xplus(n), cols, f"x+{n}")
        res += matrix_residuals(C.xminus(n), B.xminus(n), cols, f"x-{n}")
        res += matrix_residuals(C.xi(n), B.xi(n), cols, f"xi{n}")
    return res


def asym_check_yangian(y, depth=8, order=8, compare_irreducible=True):
    """Asymptotic module rho^y = L(Psi_0^{-1}) (x) L(Psi_y) over Y_0.

    Returns residuals of: rho^y(xi(z)) = (z - y) rho_inf(xi(z)); rho^y(x-(z)) -
    (z - y) rho_inf(x-(z)) = -rho_inf(x-_0); x+ unchanged; the Y_0 relations;
    the highest l-weight Psi_y/Psi_0; and (optionally) agreement with the
    irreducible module of that highest l-weight up to rescaling (y != 0; for
    y = 0 the highest l-weight is trivial and the module is not irreducible).
    """
    y = as_scalar(y)
    N = negative_prefundamental(depth + 1)
    rho = tensor_onedim(LWeight.psi("yangian", 1, 0), y, N, "right")
    cols = N.in_window()
    dim = N.dim
    z_minus_y = TruncSeries({-1: Fraction(1), 0: -y}, order, "zinv")
    res = []
    # xi(z) = z^{-m-1} ... with the leading xi_{-m-1} = 1 at u^{-m}
    xi_inf = TruncSeries({p + 1: N.xi(p) for p in range(0, order + 1)}, order + 1, "zinv", dim)
    xi_y = TruncSeries({p + 1: rho.xi(p) for p in range(-1, order)}, order, "zinv", dim)
    lhs = (xi_inf * z_minus_y).truncate(order)
    res += _restricted_series_residuals(xi_y, lhs, order, cols, "xi")
    xm_inf = x_series(N, -1, order + 1)
    xm_y = x_series(rho, -1, order)
    diff = (xm_y - (xm_inf * z_minus_y).truncate(order)).truncate(order)
    res += _restricted_series_residuals(diff, TruncSeries({0: -N.xminus(0)}, order, "zinv", dim), order,
                                        N.in_window(1), "x-")
    for n in range(order):
        res += matrix_residuals(rho.xplus(n), N.xplus(n), cols, f"x+{n}")
    res += check_relations(rho, 3)
    f = LWeight.psi("yangian", 1, y) / LWeight.psi("yangian", 1, 0)
    top = eigen_lweight(rho, rho.top_index(), 2)
    if top != f:
        res.append(("highest l-weight", repr(f), repr(top)))
    if compare_irreducible and y != 0:
        L = irreducible(f, depth + 1, 1)
        res += isomorphic_by_rescaling(L, rho)
    return res
