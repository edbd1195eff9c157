"""Idempotents, K_0 classes and the trace lattice of a block algebra.

In ``A = sum_j M_{n_j}(C)`` two idempotents are similar (and stably
equivalent) exactly when their ranks agree block by block, so a K_0 class
is a vector of ranks and the trace image of K_0 is the additive subgroup
of R generated by the block weights.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import numpy as np

from . import _kernels
from .algebra import AlgebraElement, FiniteDimAlgebra
from .errors import DomainError, StructuralError

IDEMPOTENT_TOL = 1e-8
LATTICE_TOL = 1e-9
COEFFICIENT_BOUND = 1000
# cap on enumerated coefficient vectors per membership query
SEARCH_CAP = 5_000_000


def idempotent_defect(e: AlgebraElement) -> float:
    """``||e^2 - e||`` relative to ``max(1, ||e||^2)``."""
    scale = max(1.0, e.norm() ** 2)
    return max(np.linalg.norm(b @ b - b, 2) for b in e.blocks) / scale


def idempotent_check(e: AlgebraElement, tol: float = IDEMPOTENT_TOL) -> bool:
    return idempotent_defect(e) <= tol


@dataclass(frozen=True)
class K0Class:
    ranks: tuple

    def __post_init__(self):
        r = tuple(int(k) for k in self.ranks)
        if any(k < 0 for k in r):
            raise StructuralError("ranks are nonnegative")
        object.__setattr__(self, "ranks", r)

    def __add__(self, other: K0Class) -> K0Class:
        if len(self.ranks) != len(other.ranks):
            raise StructuralError("classes of different algebras")
        return K0Class(tuple(a + b for a, b in zip(self.ranks, other.ranks)))


def rank_vector(A: FiniteDimAlgebra, e: AlgebraElement, tol: float = IDEMPOTENT_TOL) -> K0Class:
    """Rank of each block of an idempotent.

    The nonzero singular values of an idempotent are all at least 1, so
    counting singular values above 1/2 is stable under similarity; the
    count is cross-checked against the (real, integral) trace.
    """
    A.check(e)
    defect = idempotent_defect(e)
    if defect > tol:
        raise DomainError(f"not an idempotent: ||e^2 - e|| = {defect:.3g} (relative)")
    ranks = []
    for j, b in enumerate(e.blocks):
        s = np.linalg.svd(b, compute_uv=False)
        r = int(np.count_nonzero(s > 0.5))
        tr = np.trace(b)
        if abs(tr - r) > 1e-6 * max(1.0, np.linalg.norm(b, 2)):
            raise DomainError(f"block {j}: singular-value rank {r} disagrees with trace {tr:.6g}")
        ranks.append(r)
    return K0Class(tuple(ranks))


def projection(A: FiniteDimAlgebra, ranks, rng: np.random.Generator | None = None,
               cond: float = 1.0) -> AlgebraElement:
    """An idempotent with the given block ranks.

    ``cond = 1`` gives diagonal projections; otherwise the projection is
    conjugated by a random invertible of that condition number.
    """
    blocks = []
    for n, r in zip(A.block_sizes, ranks):
        p = np.diag([1.0] * r + [0.0] * (n - r)).astype(complex)
        if rng is not None and cond > 1.0:
            u = random_invertible(n, rng, cond)
            p = u @ p @ np.linalg.inv(u)
        blocks.append(p)
    return AlgebraElement(blocks)


def random_invertible(n: int, rng: np.random.Generator, cond: float) -> np.ndarray:
    """``U diag(s) V*`` with singular values spread log-uniformly over [1/cond, 1]."""
    from .algebra import random_unitary

    s = np.exp(-np.log(cond) * np.linspace(0.0, 1.0, n)) if n > 1 else np.ones(1)
    return (random_unitary(n, rng) * s) @ random_unitary(n, rng)


def stably_compatible(A: FiniteDimAlgebra, B: FiniteDimAlgebra) -> bool:
    """True when one algebra is a matrix amplification of the other."""
    if A.trace_weights != B.trace_weights:
        return False
    ratios = {Fraction(b, a) for a, b in zip(A.block_sizes, B.block_sizes)}
    if len(ratios) != 1:
        return False
    q = ratios.pop()
    return q.denominator == 1 or q.numerator == 1


def equivalent(A: FiniteDimAlgebra, e: AlgebraElement, f: AlgebraElement,
               B: FiniteDimAlgebra | None = None) -> bool:
    """Stable equivalence of idempotents ``e`` in ``A`` and ``f`` in ``B`` (default ``A``)."""
    B = A if B is None else B
    if not stably_compatible(A, B):
        raise StructuralError("idempotents live in algebras that are not amplifications of each other")
    return rank_vector(A, e).ranks == rank_vector(B, f).ranks


def tau_of_class(A: FiniteDimAlgebra, c: K0Class) -> float:
    if len(c.ranks) != len(A.block_sizes):
        raise StructuralError("class and algebra have different numbers of blocks")
    return float(sum(r * w for r, w in zip(c.ranks, A.trace_weights)))


# ---------------------------------------------------------------------------
# the lattice tau(K_0(A)) inside R


@dataclass(frozen=True)
class Membership:
    """Three-valued answer: ``status`` is "member", "nonmember" or "undecided"."""

    status: str
    witness: tuple = ()
    residual: float = float("nan")

    def __bool__(self):
        return self.status == "member"


@dataclass(frozen=True)
class K0Lattice:
    generators: tuple
    tol: float = LATTICE_TOL
    bound: int = COEFFICIENT_BOUND

    def __post_init__(self):
        g = tuple(float(x) for x in self.generators)
        if not g or any(not x > 0 for x in g):
            raise StructuralError("lattice generators must be positive reals")
        object.__setattr__(self, "generators", g)

    def contains(self, v: float) -> Membership:
        return lattice_member(self, v)

    def discrete_generator(self):
        """Single generator ``h`` with lattice ``= hZ`` when all generators are
        commensurable with denominators up to ``bound``; ``None`` otherwise."""
        g0 = self.generators[0]
        fracs = []
        for g in self.generators:
            f = Fraction(g / g0).limit_denominator(self.bound)
            if abs(float(f) * g0 - g) > self.tol:
                return None
            fracs.append(f)
        den = 1
        for f in fracs:
            den = den * f.denominator // gcd(den, f.denominator)
        num = 0
        for f in fracs:
            num = gcd(num, f.numerator * (den // f.denominator))
        return g0 * num / den


def k0_lattice(A: FiniteDimAlgebra, tol: float = LATTICE_TOL,
               bound: int = COEFFICIENT_BOUND) -> K0Lattice:
    """Trace image of K_0: generated by the traces ``w_j`` of minimal projections."""
    return K0Lattice(A.trace_weights, tol, bound)


def _distinct(gens, tol):
    out = []
    index = []
    for g in gens:
        for k, h in enumerate(out):
            if abs(g - h) <= tol:
                index.append(k)
                break
        else:
            index.append(len(out))
            out.append(g)
    return out, index


def lattice_member(L: K0Lattice, v: float) -> Membership:
    """Is ``v`` an integer combination of the generators, up to ``L.tol``?

    A witness with coefficients bounded by ``L.bound`` is searched for,
    preferring the smallest l1 norm. "nonmember" is only reported when
    the generators span a discrete group ``hZ`` and ``v`` is provably off
    it; a failed search over a dense group is "undecided".
    """
    v = float(v)
    gens, index = _distinct(L.generators, L.tol)
    h = L.discrete_generator()
    if h is not None:
        q = np.rint(v / h)
        if abs(v - q * h) > L.tol:
            return Membership("nonmember", residual=float(abs(v - q * h)))
    elif abs(v) > L.bound * max(gens) * len(gens) + L.tol:
        return Membership("undecided")
    bound = L.bound
    k = len(gens)
    while k > 1 and (2 * bound + 1) ** (k - 1) > SEARCH_CAP:
        bound //= 2
    g = np.asarray(gens, dtype=float)
    found, wit, res = _kernels.lattice_search(g, v, np.int64(bound), L.tol)
    if found:
        # spread back onto the (possibly repeated) original generators
        full = [0] * len(L.generators)
        for i, k_ in enumerate(index):
            if index.index(k_) == i:
                full[i] = int(wit[k_])
        return Membership("member", tuple(full), float(res))
    if h is not None:
        # v is on hZ but has no small witness: extended Euclid gives an exact one
        wit = _euclid_witness(L.generators, h, v)
        return Membership("member", wit, float(abs(v - np.dot(wit, L.generators))))
    return Membership("undecided")


def _euclid_witness(gens, h, v):
    ints = [int(round(g / h)) for g in gens]
    coeffs = [1] + [0] * (len(ints) - 1)
    g = ints[0]
    for i in range(1, len(ints)):
        x, y, g = _ext_gcd(g, ints[i])
        coeffs = [c * x for c in coeffs[:i]] + [y] + coeffs[i + 1:]
    scale = int(round(v / h)) // g
    return tuple(c * scale for c in coeffs)


def _ext_gcd(a, b):
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return x0, y0, a
