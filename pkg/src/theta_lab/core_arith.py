"""Exact scalars, sparse matrices and truncated series.

Scalars come in two flavours.  Plain rationals are ``fractions.Fraction``.
Rational functions in the formal parameters ``q, a, b, c, w, z, y`` are
``RatFunc`` instances backed by flint multivariate integer polynomials.
Mixed arithmetic promotes to ``RatFunc``.
"""

from fractions import Fraction
from math import comb, factorial

import flint

Rat = Fraction

VARIABLES = ("q", "a", "b", "c", "w", "z", "y")
_CTX = flint.fmpz_mpoly_ctx.get(VARIABLES, "lex")
_INDEX = {name: i for i, name in enumerate(VARIABLES)}
_ONE_POLY = _CTX.constant(1)
_ZERO_POLY = _CTX.constant(0)


class PreconditionError(ArithmeticError):
    """Raised when a precondition of a series or matrix routine fails."""


def _poly_hash_key(p):
    return tuple(sorted(p.to_dict().items()))


class RatFunc:
    """Quotient of two integer polynomials, kept in lowest terms.

    The denominator has positive leading coefficient (lex order with q first)
    and shares no factor, including integer content, with the numerator.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=None, _reduced=False):
        if den is None:
            den = _ONE_POLY
        if not _reduced:
            if den.is_zero():
                raise ZeroDivisionError("RatFunc with zero denominator")
            if num.is_zero():
                den = _ONE_POLY
            elif not den.is_one():
                g = num.gcd(den)
                if not g.is_one():
                    num = num / g
                    den = den / g
                if den.leading_coefficient() < 0:
                    num = -num
                    den = -den
        self.num = num
        self.den = den

    # construction helpers
    @staticmethod
    def const(value):
        value = Fraction(value)
        return RatFunc(_CTX.constant(value.numerator), _CTX.constant(value.denominator), True)

    @staticmethod
    def gen(name):
        return RatFunc(_CTX.gens()[_INDEX[name]], _ONE_POLY, True)

    # coercion
    @staticmethod
    def coerce(x):
        if isinstance(x, RatFunc):
            return x
        if isinstance(x, int):
            return RatFunc(_CTX.constant(x), _ONE_POLY, True)
        if isinstance(x, Fraction):
            return RatFunc(_CTX.constant(x.numerator), _CTX.constant(x.denominator), True)
        return None

    # arithmetic
    def __add__(self, other):
        o = RatFunc.coerce(other)
        if o is None:
            return NotImplemented
        if self.den.is_one() and o.den.is_one():
            return RatFunc(self.num + o.num, _ONE_POLY, True)
        if self.den == o.den:
            return RatFunc(self.num + o.num, self.den)
        return RatFunc(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return RatFunc(-self.num, self.den, True)

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = RatFunc.coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = RatFunc.coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        o = RatFunc.coerce(other)
        if o is None:
            return NotImplemented
        if self.num.is_zero() or o.num.is_zero():
            return RatFunc(_ZERO_POLY, _ONE_POLY, True)
        if self.den.is_one() and o.den.is_one():
            return RatFunc(self.num * o.num, _ONE_POLY, True)
        a, b, c, d = self.num, self.den, o.num, o.den
        g1 = a.gcd(d)
        g2 = c.gcd(b)
        if not g1.is_one():
            a, d = a / g1, d / g1
        if not g2.is_one():
            c, b = c / g2, b / g2
        num, den = a * c, b * d
        if den.leading_coefficient() < 0:
            num, den = -num, -den
        return RatFunc(num, den, True)

    __rmul__ = __mul__

    def inverse(self):
        if self.num.is_zero():
            raise ZeroDivisionError("inverse of zero RatFunc")
        num, den = self.den, self.num
        if den.leading_coefficient() < 0:
            num, den = -num, -den
        return RatFunc(num, den, True)

    def __truediv__(self, other):
        o = RatFunc.coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = RatFunc.coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        return RatFunc(self.num ** k, self.den ** k, True)

    # comparison and hashing
    def __eq__(self, other):
        o = RatFunc.coerce(other)
        if o is None:
            return NotImplemented
        return self.num == o.num and self.den == o.den

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __hash__(self):
        if self.num.is_constant() and self.den.is_constant():
            return hash(Fraction(int(self.num.leading_coefficient()) if not self.num.is_zero() else 0,
                                 int(self.den.leading_coefficient())))
        return hash((_poly_hash_key(self.num), _poly_hash_key(self.den)))

    def __bool__(self):
        return not self.num.is_zero()

    # queries
    def is_constant(self):
        return self.num.is_constant() and self.den.is_constant()

    def to_fraction(self):
        if not self.is_constant():
            raise ValueError(f"{self} is not a constant")
        n = 0 if self.num.is_zero() else int(self.num.leading_coefficient())
        return Fraction(n, int(self.den.leading_coefficient()))

    def is_polynomial(self):
        return self.den.is_constant()

    def variables(self):
        used = set()
        for poly in (self.num, self.den):
            for exps in poly.to_dict():
                for i, e in enumerate(exps):
                    if e:
                        used.add(VARIABLES[i])
        return tuple(v for v in VARIABLES if v in used)

    def degree(self, name):
        """Degree in ``name`` of a polynomial (constant denominator in that variable)."""
        i = _INDEX[name]
        if self.den.degrees()[i] > 0:
            raise ValueError(f"{self} is not polynomial in {name}")
        if self.num.is_zero():
            return -1
        return int(self.num.degrees()[i])

    def subs(self, mapping):
        """Substitute scalars (int, Fraction or RatFunc) for variables."""
        out = self
        for name, value in mapping.items():
            out = out._subs_one(_INDEX[name], RatFunc.coerce(value))
        return out

    def _subs_one(self, idx, value):
        p, q = value.num, value.den
        n1, d1 = _poly_subs(self.num, idx, p, q)
        n2, d2 = _poly_subs(self.den, idx, p, q)
        if d2 >= d1:
            num, den = n1 * q ** (d2 - d1), n2
        else:
            num, den = n1, n2 * q ** (d1 - d2)
        return RatFunc(num, den)

    def __repr__(self):
        if self.den.is_one():
            return str(self.num)
        return f"({self.num})/({self.den})"

    __str__ = __repr__


def _poly_subs(poly, idx, p, q):
    """Return (N, d) with poly(var_idx = p/q) = N / q**d."""
    groups = {}
    for exps, c in poly.to_dict().items():
        e = int(exps[idx])
        rest = exps[:idx] + (0,) + exps[idx + 1:]
        groups.setdefault(e, {})[rest] = c
    if not groups:
        return _ZERO_POLY, 0
    top = max(groups)
    total = _ZERO_POLY
    for e, terms in groups.items():
        total += _CTX.from_dict(terms) * p ** e * q ** (top - e)
    return total, top


def var(name):
    """The generator ``name`` as a RatFunc."""
    return RatFunc.gen(name)


q = var("q")


def as_scalar(x):
    """Canonical scalar: constant RatFuncs collapse to Fraction."""
    if isinstance(x, RatFunc):
        if x.is_constant():
            return x.to_fraction()
        return x
    if isinstance(x, int):
        return Fraction(x)
    return x


def subs(x, mapping):
    if isinstance(x, RatFunc):
        return x.subs(mapping)
    if isinstance(x, SparseMatrix):
        return x.map(lambda v: subs(v, mapping))
    return x


def is_zero(x):
    if isinstance(x, SparseMatrix):
        return x.is_zero()
    return not x


# ---------------------------------------------------------------------------
# q-numbers


def _base(base):
    return q if base is None else RatFunc.coerce(base)


def q_number(t, base=None):
    """Symmetric bracket [t] = (b^t - b^-t)/(b - b^-1) for the base b (default q)."""
    b = _base(base)
    return (b ** t - b ** (-t)) / (b - b ** (-1))


def q_round(t, base=None):
    """Round bracket (t) = (b^(2t) - 1)/(b^2 - 1)."""
    b = _base(base)
    return (b ** (2 * t) - 1) / (b ** 2 - 1)


def q_factorial(n, base=None):
    """(n)! = (1)(2)...(n) with round brackets."""
    if n < 0:
        raise ValueError("q_factorial of a negative integer")
    out = RatFunc.const(1)
    for m in range(1, n + 1):
        out = out * q_round(m, base)
    return out


def q_binomial(n, k, base=None):
    """Round-bracket binomial (n)!/((k)!(n-k)!)."""
    if k < 0 or k > n:
        return RatFunc.const(0)
    return q_factorial(n, base) / (q_factorial(k, base) * q_factorial(n - k, base))


def q_falling(t, n, base=None):
    """Stirling-style product [t][t-1]...[t-n+1] of symmetric brackets."""
    if n < 0:
        raise ValueError("negative length")
    out = RatFunc.const(1)
    for m in range(n):
        out = out * q_number(t - m, base)
    return out


def gen_binomial(x, k):
    """binom(x, k) for an integer or rational x and k >= 0."""
    if isinstance(x, int) and x >= 0:
        return comb(x, k) if k <= x else 0
    out = Fraction(1)
    for i in range(k):
        out *= Fraction(x) - i
    return out / factorial(k)


# ---------------------------------------------------------------------------
# sparse matrices


class SparseMatrix:
    """Matrix stored as ``{row: {col: value}}`` with zero entries dropped."""

    __slots__ = ("nrows", "ncols", "rows")

    def __init__(self, nrows, ncols=None, rows=None):
        self.nrows = nrows
        self.ncols = nrows if ncols is None else ncols
        clean = {}
        if rows:
            for i, row in rows.items():
                r = {j: v for j, v in row.items() if v}
                if r:
                    clean[i] = r
        self.rows = clean

    @classmethod
    def from_entries(cls, nrows, ncols, entries):
        rows = {}
        for (i, j), v in entries.items():
            if not (0 <= i < nrows and 0 <= j < ncols):
                raise IndexError(f"entry ({i}, {j}) outside {nrows}x{ncols}")
            rows.setdefault(i, {})[j] = v
        return cls(nrows, ncols, rows)

    @classmethod
    def identity(cls, n, scalar=Fraction(1)):
        return cls(n, n, {i: {i: scalar} for i in range(n)})

    @classmethod
    def zero(cls, nrows, ncols=None):
        return cls(nrows, ncols)

    @classmethod
    def diag(cls, values):
        values = list(values)
        return cls(len(values), len(values), {i: {i: v} for i, v in enumerate(values)})

    @classmethod
    def from_dense(cls, data):
        nrows = len(data)
        ncols = len(data[0]) if data else 0
        return cls(nrows, ncols, {i: dict(enumerate(r)) for i, r in enumerate(data)})

    @classmethod
    def unit(cls, n, i, j, value=1):
        return cls(n, n, {i: {j: Fraction(value) if isinstance(value, int) else value}})

    def get(self, i, j):
        return self.rows.get(i, {}).get(j, 0)

    def __getitem__(self, ij):
        return self.get(*ij)

    def items(self):
        for i in sorted(self.rows):
            row = self.rows[i]
            for j in sorted(row):
                yield i, j, row[j]

    def nnz(self):
        return sum(len(r) for r in self.rows.values())

    def is_zero(self):
        return not self.rows

    def __bool__(self):
        return bool(self.rows)

    def _check_shape(self, other):
        if (self.nrows, self.ncols) != (other.nrows, other.ncols):
            raise ValueError(f"shape mismatch {self.nrows}x{self.ncols} vs {other.nrows}x{other.ncols}")

    def __add__(self, other):
        if isinstance(other, int) and other == 0:
            return self
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        self._check_shape(other)
        rows = {i: dict(r) for i, r in self.rows.items()}
        for i, r in other.rows.items():
            tgt = rows.setdefault(i, {})
            for j, v in r.items():
                tgt[j] = tgt[j] + v if j in tgt else v
        return SparseMatrix(self.nrows, self.ncols, rows)

    __radd__ = __add__

    def __neg__(self):
        return SparseMatrix(self.nrows, self.ncols, {i: {j: -v for j, v in r.items()} for i, r in self.rows.items()})

    def __sub__(self, other):
        if isinstance(other, int) and other == 0:
            return self
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        if isinstance(other, int) and other == 0:
            return -self
        return NotImplemented

    def scale(self, c):
        if not c:
            return SparseMatrix(self.nrows, self.ncols)
        return SparseMatrix(self.nrows, self.ncols, {i: {j: c * v for j, v in r.items()} for i, r in self.rows.items()})

    def __mul__(self, other):
        if isinstance(other, SparseMatrix):
            return self.matmul(other)
        if isinstance(other, (int, Fraction, RatFunc)):
            if not other:
                return SparseMatrix(self.nrows, self.ncols)
            return SparseMatrix(self.nrows, self.ncols, {i: {j: v * other for j, v in r.items()} for i, r in self.rows.items()})
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, RatFunc)):
            return self.scale(other)
        return NotImplemented

    def __truediv__(self, c):
        return self.scale(1 / RatFunc.coerce(c) if isinstance(c, RatFunc) else Fraction(1) / c)

    def matmul(self, other):
        if self.ncols != other.nrows:
            raise ValueError(f"cannot multiply {self.nrows}x{self.ncols} by {other.nrows}x{other.ncols}")
        orows = other.rows
        out = {}
        for i, r in self.rows.items():
            acc = {}
            for k, a in r.items():
                br = orows.get(k)
                if not br:
                    continue
                for j, b in br.items():
                    if j in acc:
                        acc[j] = acc[j] + a * b
                    else:
                        acc[j] = a * b
            if acc:
                out[i] = acc
        return SparseMatrix(self.nrows, other.ncols, out)

    __matmul__ = matmul

    def __pow__(self, k):
        out = SparseMatrix.identity(self.nrows)
        for _ in range(k):
            out = out.matmul(self)
        return out

    def apply(self, vec):
        """Apply to a sparse column vector ``{index: value}``."""
        out = {}
        for i, r in self.rows.items():
            acc = 0
            for j, v in r.items():
                x = vec.get(j)
                if x:
                    acc = acc + v * x
            if acc:
                out[i] = acc
        return out

    def column(self, j):
        return {i: r[j] for i, r in self.rows.items() if j in r}

    def transpose(self):
        rows = {}
        for i, j, v in self.items():
            rows.setdefault(j, {})[i] = v
        return SparseMatrix(self.ncols, self.nrows, rows)

    def kron(self, other):
        """Tensor product; basis pair (i, k) maps to index i*other.n + k."""
        n2, m2 = other.nrows, other.ncols
        rows = {}
        for i, ra in self.rows.items():
            for k, rb in other.rows.items():
                row = {}
                for j, a in ra.items():
                    for l, b in rb.items():
                        row[j * m2 + l] = a * b
                rows[i * n2 + k] = row
        return SparseMatrix(self.nrows * n2, self.ncols * m2, rows)

    def map(self, f):
        return SparseMatrix(self.nrows, self.ncols, {i: {j: f(v) for j, v in r.items()} for i, r in self.rows.items()})

    def submatrix(self, row_idx, col_idx):
        cpos = {c: k for k, c in enumerate(col_idx)}
        rows = {}
        for a, i in enumerate(row_idx):
            r = self.rows.get(i)
            if not r:
                continue
            sub = {cpos[j]: v for j, v in r.items() if j in cpos}
            if sub:
                rows[a] = sub
        return SparseMatrix(len(row_idx), len(col_idx), rows)

    def commutator(self, other):
        return self.matmul(other) - other.matmul(self)

    def to_dense(self):
        return [[self.get(i, j) for j in range(self.ncols)] for i in range(self.nrows)]

    def __eq__(self, other):
        if isinstance(other, int) and other == 0:
            return self.is_zero()
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        if (self.nrows, self.ncols) != (other.nrows, other.ncols):
            return False
        return (self - other).is_zero()

    __hash__ = None

    def __repr__(self):
        body = ", ".join(f"({i},{j}): {v}" for i, j, v in self.items())
        return f"SparseMatrix({self.nrows}x{self.ncols}; {body})"


def _field_inv(x):
    if isinstance(x, RatFunc):
        return x.inverse()
    return Fraction(1) / x


def rref(rows, ncols):
    """Reduced row echelon form of a list of sparse rows ``{col: value}``.

    Returns (reduced_rows, pivot_columns).  Works over Fraction or RatFunc.
    """
    work = [dict((j, v) for j, v in r.items() if v) for r in rows]
    work = [r for r in work if r]
    pivots = []
    done = []
    for col in range(ncols):
        k = next((i for i, r in enumerate(work) if col in r), None)
        if k is None:
            continue
        piv = work.pop(k)
        inv = _field_inv(piv[col])
        piv = {j: v * inv for j, v in piv.items()}
        for lst in (work, done):
            for i, r in enumerate(lst):
                c = r.get(col)
                if c:
                    for j, v in piv.items():
                        nv = r.get(j, 0) - c * v
                        if nv:
                            r[j] = nv
                        else:
                            r.pop(j, None)
        work = [r for r in work if r]
        done.append(piv)
        pivots.append(col)
    return done, pivots


def solve_linear(rows, rhs, ncols):
    """Solve sum_j rows[i][j] x_j = rhs[i].

    Returns (particular_solution, nullspace_basis); raises PreconditionError
    if the system is inconsistent.  Free variables are set to zero.
    """
    aug = []
    for r, b in zip(rows, rhs):
        row = dict(r)
        if b:
            row[ncols] = b
        aug.append(row)
    red, piv = rref(aug, ncols + 1)
    if ncols in piv:
        raise PreconditionError("inconsistent linear system")
    sol = {}
    for r, c in zip(red, piv):
        if r.get(ncols):
            sol[c] = r[ncols]
    free = [j for j in range(ncols) if j not in set(piv)]
    basis = []
    for f in free:
        vec = {f: Fraction(1)}
        for r, c in zip(red, piv):
            v = r.get(f)
            if v:
                vec[c] = -v
        basis.append(vec)
    return sol, basis


def matrix_inverse(m):
    """Inverse of a square SparseMatrix over a field."""
    n = m.nrows
    rows = []
    for i in range(n):
        r = dict(m.rows.get(i, {}))
        r[n + i] = Fraction(1)
        rows.append(r)
    red, piv = rref(rows, 2 * n)
    if piv[:n] != list(range(n)) or len(piv) < n:
        raise PreconditionError("matrix is singular")
    out = {}
    for r, c in zip(red, piv):
        if c < n:
            out[c] = {j - n: v for j, v in r.items() if j >= n}
    return SparseMatrix(n, n, out)


def _one_like(dim):
    return Fraction(1) if dim is None else SparseMatrix.identity(dim)


def _scale(c, x):
    """Scalar times scalar-or-matrix."""
    if isinstance(x, SparseMatrix):
        return x.scale(c)
    return c * x


def _dim_of(x):
    return x.nrows if isinstance(x, SparseMatrix) else None


# ---------------------------------------------------------------------------
# truncated series


class TruncSeries:
    """Truncated series sum c_p u^p, exact for p <= order.

    ``var`` is "zinv" (u = 1/z) or "z" (u = z).  Coefficients are scalars or
    square SparseMatrix objects of size ``dim`` (``dim`` is None for scalars).
    """

    __slots__ = ("var", "coeffs", "order", "dim")

    def __init__(self, coeffs, order, var="zinv", dim=None):
        if var not in ("zinv", "z"):
            raise ValueError(f"unknown series variable {var!r}")
        self.var = var
        self.order = order
        clean = {}
        for p, c in coeffs.items():
            if p <= order and c:
                clean[p] = c
                if dim is None and isinstance(c, SparseMatrix):
                    dim = c.nrows
        self.coeffs = clean
        self.dim = dim

    @classmethod
    def one(cls, order, var="zinv", dim=None):
        return cls({0: _one_like(dim)}, order, var, dim)

    @classmethod
    def constant(cls, c, order, var="zinv"):
        return cls({0: c}, order, var, _dim_of(c))

    @classmethod
    def monomial(cls, c, power, order, var="zinv"):
        return cls({power: c}, order, var, _dim_of(c))

    @classmethod
    def from_list(cls, values, order=None, var="zinv", low=0):
        order = low + len(values) - 1 if order is None else order
        return cls({low + k: v for k, v in enumerate(values)}, order, var)

    def valuation(self):
        """Lowest power with a nonzero coefficient; order + 1 if none is known."""
        return min(self.coeffs) if self.coeffs else self.order + 1

    low = property(valuation)

    def coeff(self, p):
        if p > self.order:
            raise PreconditionError(f"coefficient of u^{p} beyond truncation order {self.order}")
        return self.coeffs.get(p, 0)

    def __getitem__(self, p):
        return self.coeff(p)

    def truncate(self, order):
        return TruncSeries(self.coeffs, min(order, self.order), self.var, self.dim)

    def map(self, f, dim=None):
        return TruncSeries({p: f(c) for p, c in self.coeffs.items()}, self.order, self.var, dim)

    def _compat(self, other):
        if self.var != other.var:
            raise ValueError("series in different variables")

    def _lift(self, other):
        if isinstance(other, TruncSeries):
            return other
        return TruncSeries({0: other}, self.order, self.var, _dim_of(other))

    def __add__(self, other):
        other = self._lift(other)
        self._compat(other)
        order = min(self.order, other.order)
        out = {p: c for p, c in self.coeffs.items() if p <= order}
        for p, c in other.coeffs.items():
            if p <= order:
                out[p] = out[p] + c if p in out else c
        return TruncSeries(out, order, self.var, self.dim or other.dim)

    __radd__ = __add__

    def __neg__(self):
        return TruncSeries({p: -c for p, c in self.coeffs.items()}, self.order, self.var, self.dim)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, TruncSeries):
            return TruncSeries({p: c * other for p, c in self.coeffs.items()}, self.order, self.var,
                               self.dim or _dim_of(other))
        self._compat(other)
        va, vb = self.valuation(), other.valuation()
        order = min(self.order + vb, other.order + va)
        out = {}
        for p, a in self.coeffs.items():
            for r, b in other.coeffs.items():
                s = p + r
                if s > order:
                    continue
                t = a * b
                out[s] = out[s] + t if s in out else t
        return TruncSeries(out, order, self.var, self.dim or other.dim)

    def __rmul__(self, other):
        return TruncSeries({p: other * c for p, c in self.coeffs.items()}, self.order, self.var,
                           self.dim or _dim_of(other))

    def scale(self, c):
        return TruncSeries({p: _scale(c, x) for p, x in self.coeffs.items()}, self.order, self.var, self.dim)

    def __pow__(self, k):
        out = TruncSeries.one(self.order, self.var, self.dim)
        for _ in range(k):
            out = out * self
        return out

    def is_zero(self):
        return not self.coeffs

    def __eq__(self, other):
        if not isinstance(other, TruncSeries):
            return NotImplemented
        return (self.var, self.order) == (other.var, other.order) and (self - other).is_zero()

    __hash__ = None

    def agrees_with(self, other, order=None):
        """True if the two series coincide up to the common (or given) order."""
        n = min(self.order, other.order) if order is None else order
        return (self.truncate(n) - other.truncate(n)).is_zero()

    def residuals(self, other, order=None):
        n = min(self.order, other.order) if order is None else order
        diff = self.truncate(n) - other.truncate(n)
        return [(p, self.coeffs.get(p, 0), other.coeffs.get(p, 0)) for p in sorted(diff.coeffs)]

    def shift(self, d):
        """Substitute z -> z + d in a series in 1/z (Laurent powers allowed)."""
        if self.var != "zinv":
            raise ValueError("shift is defined for series in 1/z")
        out = {}
        for p, c in self.coeffs.items():
            for k in range(0, self.order - p + 1):
                b = gen_binomial(-p, k)
                if not b:
                    continue
                t = _scale(b * (d ** k if k else 1), c)
                s = p + k
                out[s] = out[s] + t if s in out else t
        return TruncSeries(out, self.order, self.var, self.dim)

    def rescale(self, c):
        """Substitute z -> c*z."""
        sign = 1 if self.var == "z" else -1
        return TruncSeries({p: _scale(RatFunc.coerce(c) ** (sign * p) if isinstance(c, RatFunc) else Fraction(c) ** (sign * p), x)
                            for p, x in self.coeffs.items()}, self.order, self.var, self.dim)

    def map_scalars(self, f):
        return TruncSeries({p: (x.map(f) if isinstance(x, SparseMatrix) else f(x)) for p, x in self.coeffs.items()},
                           self.order, self.var, self.dim)

    def __repr__(self):
        u = "1/z" if self.var == "zinv" else "z"
        body = " + ".join(f"({c})*({u})^{p}" for p, c in sorted(self.coeffs.items())) or "0"
        return f"{body} + O(({u})^{self.order + 1})"


def series_exp(f):
    if f.coeffs and f.valuation() < 1:
        p = f.valuation()
        raise PreconditionError(f"series_exp needs no u^{p} term (p<1); got coefficient {f.coeffs[p]}")
    out = TruncSeries.one(f.order, f.var, f.dim)
    term = TruncSeries.one(f.order, f.var, f.dim)
    n = 1
    while True:
        term = (term * f).scale(Fraction(1, n))
        term = term.truncate(f.order)
        if term.is_zero():
            break
        out = out + term
        n += 1
    return out


def _split_unit(g, what):
    c0 = g.coeffs.get(0, 0)
    one = _one_like(g.dim)
    if g.coeffs and g.valuation() < 0:
        raise PreconditionError(f"{what} needs a power series; found u^{g.valuation()}")
    if g.dim is None:
        if c0 != 1:
            raise PreconditionError(f"{what} needs constant term 1; got {c0}")
    elif not (isinstance(c0, SparseMatrix) and c0 == one):
        raise PreconditionError(f"{what} needs identity constant term; got {c0}")
    return g - TruncSeries.one(g.order, g.var, g.dim)


def series_log(g):
    h = _split_unit(g, "series_log")
    out = TruncSeries({}, g.order, g.var, g.dim)
    term = TruncSeries.one(g.order, g.var, g.dim)
    n = 1
    while True:
        term = (term * h).truncate(g.order)
        if term.is_zero():
            break
        out = out + term.scale(Fraction((-1) ** (n + 1), n))
        n += 1
    return out


def series_inverse(g):
    if g.dim is None and g.coeffs.get(0, 0) and g.valuation() == 0 and g.coeffs[0] != 1:
        c0 = g.coeffs[0]
        inv = 1 / RatFunc.coerce(c0) if isinstance(c0, RatFunc) else Fraction(1) / c0
        return series_inverse(g.scale(inv)).scale(inv)
    h = _split_unit(g, "series_inverse")
    out = TruncSeries.one(g.order, g.var, g.dim)
    term = TruncSeries.one(g.order, g.var, g.dim)
    while True:
        term = (term * (-h)).truncate(g.order)
        if term.is_zero():
            break
        out = out + term
    return out


def series_pow(G, x):
    """G**x = exp(x log G) for a scalar series G with constant term 1.

    ``x`` may be a scalar (Fraction or RatFunc) or a square SparseMatrix.
    """
    if G.dim is not None:
        raise PreconditionError("series_pow needs a scalar base series")
    L = series_log(G)
    if isinstance(x, SparseMatrix):
        return series_exp(TruncSeries({p: x.scale(c) for p, c in L.coeffs.items()}, L.order, L.var, x.nrows))
    return series_exp(L.scale(x))


def z_over_z_plus(d, order):
    """z/(z+d) as a series in 1/z."""
    return TruncSeries({k: Fraction(-1) ** k * (d ** k if k else 1) for k in range(order + 1)}, order, "zinv")


def q_exponential(x, base=None, order=None):
    """exp_b(x) = sum x^n/(n)_b!  for nilpotent matrices or graded series."""
    if isinstance(x, SparseMatrix):
        out = SparseMatrix.identity(x.nrows)
        power = SparseMatrix.identity(x.nrows)
        for n in range(1, x.nrows + 2):
            power = power.matmul(x)
            if power.is_zero():
                return out
            out = out + power.scale(1 / q_factorial(n, base))
        raise PreconditionError("q_exponential: matrix is not nilpotent")
    if isinstance(x, TruncSeries):
        if order is not None:
            x = x.truncate(order)
        if x.coeffs and x.valuation() < 1:
            raise PreconditionError("q_exponential: series argument has no positive grading")
        out = TruncSeries.one(x.order, x.var, x.dim)
        power = TruncSeries.one(x.order, x.var, x.dim)
        n = 1
        while True:
            power = (power * x).truncate(x.order)
            if power.is_zero():
                return out
            out = out + power.scale(1 / q_factorial(n, base))
            n += 1
    if not x:
        return Fraction(1)
    raise PreconditionError("q_exponential: non-terminating scalar input")


def _coefficient_list(A):
    return [c for _, c in sorted(A.coeffs.items())]


def _commute(a, b):
    if isinstance(a, SparseMatrix) and isinstance(b, SparseMatrix):
        return a.commutator(b).is_zero()
    return True


def solve_additive_difference(A, d, a0):
    """Solve S(z+d) = S(z) A(z) (z/(z+d))^a0 with S = 1 + O(1/z).

    ``A`` is a series in 1/z with identity constant term and commuting
    coefficients which also commute with ``a0``.  The solution is returned to
    order ``A.order - 1``.  The residual of the equation is checked before
    returning.
    """
    d = Fraction(d) if not isinstance(d, RatFunc) else d
    if not (isinstance(d, RatFunc) or d > 0):
        raise PreconditionError("shift d must be positive")
    coeffs = _coefficient_list(A)
    for i, a in enumerate(coeffs):
        if not _commute(a, a0):
            raise PreconditionError("coefficient of A does not commute with a0")
        for b in coeffs[i + 1:]:
            if not _commute(a, b):
                raise PreconditionError("coefficients of A do not commute")
    N = A.order
    dim = A.dim
    L = series_log(A)
    corr = TruncSeries({k: _scale(Fraction(-1) ** k * (d ** k) / k, a0) for k in range(1, N + 1)}, N, "zinv", dim)
    rhs = L + corr
    if rhs.coeffs.get(1):
        raise PreconditionError(f"inconsistent 1/z coefficient: residual {rhs.coeffs[1]}")
    s = []
    for j in range(2, N + 1):
        acc = rhs.coeffs.get(j, 0)
        for m in range(j - 2):
            t = s[m]
            if t:
                acc = acc - _scale(gen_binomial(-m - 1, j - m - 1) * d ** (j - m - 1), t)
        top = -(j - 1) * d
        s.append(_scale(1 / top, acc) if acc else 0)
    log_s = TruncSeries({m + 1: c for m, c in enumerate(s)}, N - 1, "zinv", dim)
    S = series_exp(log_s)
    lhs = S.shift(d)
    rhs_full = (S * A * series_pow(z_over_z_plus(d, N), a0)).truncate(N - 1)
    res = lhs.residuals(rhs_full, N - 1)
    if res:
        raise PreconditionError(f"difference equation residual at u^{res[0][0]}")
    return S


def principal_part(f, order=None):
    """Keep the modes n >= 0 of sum f_n z^(-n-1).

    ``f`` is a mapping ``{n: f_n}`` or a series in 1/z (possibly Laurent).
    """
    if isinstance(f, TruncSeries):
        return TruncSeries({p: c for p, c in f.coeffs.items() if p >= 1}, f.order, f.var, f.dim)
    kept = {n + 1: c for n, c in f.items() if n >= 0}
    if order is None:
        order = max(kept, default=0)
    return TruncSeries(kept, order, "zinv")


# ---------------------------------------------------------------------------
# polynomials in (z, w)


class PolyZW:
    """Exact polynomial sum c[i, j] z^i w^j with scalar coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {k: v for k, v in (terms or {}).items() if v}

    @classmethod
    def from_scalar(cls, x, zvar="z", wvar="w"):
        """Split a RatFunc polynomial in z and w into coefficient form."""
        if not isinstance(x, RatFunc):
            return cls({(0, 0): x})
        iz, iw = _INDEX[zvar], _INDEX[wvar]
        dd = x.den.degrees()
        if dd[iz] or dd[iw]:
            raise ValueError(f"{x} is not polynomial in {zvar}, {wvar}")
        groups = {}
        for exps, c in x.num.to_dict().items():
            key = (int(exps[iz]), int(exps[iw]))
            rest = list(exps)
            rest[iz] = rest[iw] = 0
            groups.setdefault(key, {})[tuple(rest)] = c
        den = RatFunc(x.den, _ONE_POLY, True)
        return cls({k: as_scalar(RatFunc(_CTX.from_dict(v), _ONE_POLY, True) / den) for k, v in groups.items()})

    def to_scalar(self):
        z, w = var("z"), var("w")
        out = RatFunc.const(0)
        for (i, j), c in self.terms.items():
            out = out + c * z ** i * w ** j
        return out

    def degree_z(self):
        return max((i for i, _ in self.terms), default=-1)

    def degree_w(self):
        return max((j for _, j in self.terms), default=-1)

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return PolyZW(out)

    def __mul__(self, other):
        out = {}
        for (i, j), a in self.terms.items():
            for (k, l), b in other.terms.items():
                key = (i + k, j + l)
                out[key] = out[key] + a * b if key in out else a * b
        return PolyZW(out)

    def __eq__(self, other):
        if not isinstance(other, PolyZW):
            return NotImplemented
        keys = set(self.terms) | set(other.terms)
        return all(self.terms.get(k, 0) == other.terms.get(k, 0) for k in keys)

    __hash__ = None

    def __repr__(self):
        return " + ".join(f"({c})z^{i}w^{j}" for (i, j), c in sorted(self.terms.items())) or "0"


# ---------------------------------------------------------------------------
# JSON forms


def scalar_to_json(x):
    if isinstance(x, bool):
        raise TypeError("bool is not a scalar")
    if isinstance(x, int):
        x = Fraction(x)
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, RatFunc):
        used = x.variables()
        if used in ((), ("q",)):
            return {"num": _poly_terms_q(x.num), "den": _poly_terms_q(x.den)}
        idx = [_INDEX[v] for v in used]
        return {"vars": list(used),
                "num": _poly_terms(x.num, idx),
                "den": _poly_terms(x.den, idx)}
    raise TypeError(f"not a scalar: {type(x).__name__}")


def _poly_terms_q(p):
    return [[int(e[0]), int(c)] for e, c in sorted(p.to_dict().items())]


def _poly_terms(p, idx):
    return [[[int(e[i]) for i in idx], int(c)] for e, c in sorted(p.to_dict().items())]


def scalar_from_json(obj):
    if isinstance(obj, str):
        return Fraction(obj)
    names = obj.get("vars", ["q"])
    gens = [var(n) for n in names]

    def build(terms):
        out = RatFunc.const(0)
        for exps, c in terms:
            exps = exps if isinstance(exps, list) else [exps]
            t = RatFunc.const(int(c))
            for g, e in zip(gens, exps):
                t = t * g ** int(e)
            out = out + t
        return out

    return as_scalar(build(obj["num"]) / build(obj["den"]))


def matrix_to_json(m, basis_left=None, basis_right=None):
    out = {"rows": m.nrows, "cols": m.ncols,
           "entries": [[i, j, scalar_to_json(v)] for i, j, v in sorted(m.items(), key=lambda t: t[:2])]}
    if basis_left is not None:
        out["basis_left"] = list(basis_left)
    if basis_right is not None:
        out["basis_right"] = list(basis_right)
    return out


def matrix_from_json(obj):
    return SparseMatrix.from_entries(obj["rows"], obj["cols"],
                                     {(i, j): scalar_from_json(v) for i, j, v in obj["entries"]})


def series_to_json(s):
    terms = []
    for p, c in sorted(s.coeffs.items()):
        terms.append([p, matrix_to_json(c) if isinstance(c, SparseMatrix) else scalar_to_json(c)])
    return {"var": s.var, "order": s.order, "terms": terms}


def series_from_json(obj):
    coeffs = {}
    for p, c in obj["terms"]:
        coeffs[p] = matrix_from_json(c) if isinstance(c, dict) and "entries" in c else scalar_from_json(c)
    return TruncSeries(coeffs, obj["order"], obj["var"])


def polyzw_to_json(p):
    return {"terms": [[i, j, scalar_to_json(c)] for (i, j), c in sorted(p.terms.items())]}
