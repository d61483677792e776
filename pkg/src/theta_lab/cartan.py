"""Cartan data, coweights, root vectors and factored l-weights."""

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

from .core_arith import (RatFunc, SparseMatrix, as_scalar, matrix_inverse, q_number,
                         scalar_to_json, var)


_THETA = {
    "A": lambda n: [1] * n,
    "B": lambda n: [1] + [2] * (n - 1),
    "C": lambda n: [2] * (n - 1) + [1],
    "D": lambda n: [1] + [2] * (n - 3) + [1, 1],
}
_THETA_EXCEPTIONAL = {
    ("E", 6): [1, 2, 2, 3, 2, 1],
    ("E", 7): [2, 2, 3, 4, 3, 2, 1],
    ("E", 8): [2, 3, 4, 6, 5, 4, 3, 2],
    ("F", 4): [2, 3, 4, 2],
    ("G", 2): [3, 2],
}


def _cartan_matrix(letter, n):
    c = [[0] * n for _ in range(n)]
    for i in range(n):
        c[i][i] = 2

    def link(i, j, cij=-1, cji=-1):
        c[i][j] = cij
        c[j][i] = cji

    if letter == "A":
        for i in range(n - 1):
            link(i, i + 1)
    elif letter == "B":
        for i in range(n - 2):
            link(i, i + 1)
        link(n - 2, n - 1, -1, -2)
    elif letter == "C":
        for i in range(n - 2):
            link(i, i + 1)
        link(n - 2, n - 1, -2, -1)
    elif letter == "D":
        for i in range(n - 2):
            link(i, i + 1)
        link(n - 3, n - 1)
    elif letter == "E":
        # Bourbaki labelling: 1-3-4-5-6(-7(-8)) with 2 attached to 4
        for i, j in [(0, 2), (2, 3), (3, 4), (1, 3)] + [(k, k + 1) for k in range(4, n - 1)]:
            link(i, j)
    elif letter == "F":
        link(0, 1)
        link(1, 2, -1, -2)
        link(2, 3)
    elif letter == "G":
        link(0, 1, -3, -1)
    return c


def _valid(letter, n):
    if letter == "A":
        return n >= 1
    if letter in ("B", "C"):
        return n >= 2
    if letter == "D":
        return n >= 4
    return (letter, n) in _THETA_EXCEPTIONAL


def _symmetrizers(c):
    """Smallest positive integers d with d_i c_ij = d_j c_ji (connected diagram)."""
    n = len(c)
    d = [None] * n
    d[0] = Fraction(1)
    stack = [0]
    while stack:
        i = stack.pop()
        for j in range(n):
            if c[i][j] and d[j] is None:
                d[j] = d[i] * c[i][j] / c[j][i]
                stack.append(j)
    den = 1
    for x in d:
        den = den * x.denominator // gcd(den, x.denominator)
    ints = [int(x * den) for x in d]
    g = 0
    for x in ints:
        g = gcd(g, x)
    return [x // g for x in ints]


@dataclass(frozen=True)
class CartanDatum:
    letter: str
    rank: int
    cartan: tuple
    d: tuple
    b: tuple
    theta: tuple
    kappa: Fraction

    def pairing(self, beta, gamma):
        """(beta, gamma) for root-lattice vectors in simple-root coordinates."""
        return sum(beta[i] * self.b[i][j] * gamma[j] for i in range(self.rank) for j in range(self.rank))

    def rho_pairing(self, beta):
        return sum(self.d[i] * beta[i] for i in range(self.rank))

    def d_half(self, i, j):
        return Fraction(self.b[i][j], 2)


def build_cartan(letter, rank):
    letter = letter.upper()
    if not _valid(letter, rank):
        raise ValueError(f"no Cartan type {letter}{rank}")
    c = _cartan_matrix(letter, rank)
    d = _symmetrizers(c)
    b = [[d[i] * c[i][j] for j in range(rank)] for i in range(rank)]
    for i in range(rank):
        for j in range(rank):
            if b[i][j] != b[j][i]:
                raise ValueError(f"{letter}{rank}: Cartan matrix is not symmetrizable")
    theta = _THETA_EXCEPTIONAL.get((letter, rank)) or _THETA[letter](rank)
    tt = sum(theta[i] * b[i][j] * theta[j] for i in range(rank) for j in range(rank))
    kappa = Fraction(tt + 2 * sum(theta[i] * d[i] for i in range(rank)), 4)
    return CartanDatum(letter, rank, tuple(map(tuple, c)), tuple(d), tuple(map(tuple, b)), tuple(theta), kappa)


def quantum_cartan(cd, base=None):
    """B(q) with entries [b_ij] in the base (default q)."""
    return SparseMatrix(cd.rank, cd.rank, {i: {j: q_number(cd.b[i][j], base) for j in range(cd.rank)}
                                           for i in range(cd.rank)})


def inverse_quantum_cartan(cd, base=None):
    """Inverse of B(q); pass ``base=q**s`` for the specialization at q^s."""
    return matrix_inverse(quantum_cartan(cd, base)).map(as_scalar)


# ---------------------------------------------------------------------------
# coweights and root vectors


@dataclass(frozen=True)
class Coweight:
    values: tuple

    def pair(self, beta):
        return sum(n * k for n, k in zip(self.values, beta.coords))

    def is_dominant(self):
        return all(n >= 0 for n in self.values)

    def is_antidominant(self):
        return all(n <= 0 for n in self.values)

    def __add__(self, other):
        return Coweight(tuple(a + b for a, b in zip(self.values, other.values)))

    def to_json(self):
        return list(self.values)


@dataclass(frozen=True)
class RootVec:
    coords: tuple

    def height(self):
        return sum(self.coords)

    def in_positive_cone(self):
        return all(k >= 0 for k in self.coords)

    def in_negative_cone(self):
        return all(k <= 0 for k in self.coords)

    def __add__(self, other):
        return RootVec(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __neg__(self):
        return RootVec(tuple(-a for a in self.coords))


# ---------------------------------------------------------------------------
# l-weights


def _norm_scalar(a):
    return as_scalar(a) if isinstance(a, (RatFunc, int)) else a


class LWeight:
    """Ratio of products of prefundamental l-weights Psi_{i,a}.

    Yangian side: Psi_{i,a} has i-th component z - a.  Quantum side: its
    i-th component is 1 - z a.  Numerator and denominator are multisets of
    pairs (i, a); common pairs cancel.
    """

    __slots__ = ("side", "rank", "num", "den")

    def __init__(self, side, rank, num=(), den=()):
        if side not in ("yangian", "quantum"):
            raise ValueError(f"unknown side {side!r}")
        n = Counter((i, _norm_scalar(a)) for i, a in num)
        d = Counter((i, _norm_scalar(a)) for i, a in den)
        common = n & d
        n -= common
        d -= common
        self.side = side
        self.rank = rank
        self.num = n
        self.den = d

    @classmethod
    def psi(cls, side, i, a, rank=1):
        return cls(side, rank, [(i, a)])

    @classmethod
    def one(cls, side, rank=1):
        return cls(side, rank)

    def _key(self):
        return (self.side, self.rank, frozenset(self.num.items()), frozenset(self.den.items()))

    def __eq__(self, other):
        return isinstance(other, LWeight) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __mul__(self, other):
        if self.side != other.side:
            raise ValueError("cannot multiply l-weights from different sides")
        return LWeight(self.side, self.rank, list((self.num + other.num).elements()),
                       list((self.den + other.den).elements()))

    def inverse(self):
        return LWeight(self.side, self.rank, list(self.den.elements()), list(self.num.elements()))

    def __truediv__(self, other):
        return self * other.inverse()

    def is_polynomial(self):
        return not self.den

    def coweight(self):
        vals = [0] * self.rank
        for (i, _), k in self.num.items():
            vals[i - 1] += k
        for (i, _), k in self.den.items():
            vals[i - 1] -= k
        return Coweight(tuple(vals))

    def tau_shift(self, a):
        """Spectral shift: z -> z - a (Yangian) or z -> z a^-1 (quantum)."""
        if self.side == "yangian":
            f = lambda b: b + a
        else:
            f = lambda b: as_scalar(RatFunc.coerce(b) / RatFunc.coerce(a))
        return LWeight(self.side, self.rank, [(i, f(b)) for i, b in self.num.elements()],
                       [(i, f(b)) for i, b in self.den.elements()])

    def factor_poly(self, b):
        z = var("z")
        return z - b if self.side == "yangian" else 1 - z * b

    def component(self, i):
        """The i-th rational function as a RatFunc in z."""
        out = RatFunc.const(1)
        for (j, b), k in self.num.items():
            if j == i:
                out = out * self.factor_poly(b) ** k
        for (j, b), k in self.den.items():
            if j == i:
                out = out / self.factor_poly(b) ** k
        return out

    def roots(self, i, part="num"):
        ms = self.num if part == "num" else self.den
        return [b for (j, b) in sorted(ms.elements(), key=str) if j == i]

    def to_json(self):
        def enc(ms):
            return sorted(([i, scalar_to_json(a)] for i, a in ms.elements()), key=str)
        return {"side": self.side, "num": enc(self.num), "den": enc(self.den)}

    def __repr__(self):
        def fmt(ms):
            return "*".join(f"Psi[{i},{a}]" for i, a in sorted(ms.elements(), key=str)) or "1"
        return f"LWeight({self.side}: {fmt(self.num)} / {fmt(self.den)})"


def lambda_eigen(p, i, s):
    """Eigenvalue of h_{i,s} on the highest vector of L(p), p polynomial (quantum side)."""
    if p.side != "quantum":
        raise ValueError("lambda_eigen is defined for quantum l-weights")
    if not p.is_polynomial():
        raise ValueError("lambda_eigen needs a polynomial l-weight")
    if s <= 0:
        raise ValueError("lambda_eigen needs s > 0")
    q = var("q")
    total = RatFunc.const(0)
    for b in p.roots(i):
        total = total + RatFunc.coerce(b) ** s
    return as_scalar(total / (s * (q ** -1 - q)))
