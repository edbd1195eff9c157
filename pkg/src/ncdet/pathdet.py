"""Path determinants: the integral of ``tau(xi' xi^-1)`` along paths of invertibles.

``integral_delta`` returns ``(1/2 pi i) int tau(xi'(a) xi(a)^-1) da``. The
class of this number modulo the trace lattice ``tau(K_0(A))`` depends only
on the endpoint of a path starting at 1 (``delta_tau``). For ``A = C``
with the identity trace, ``exp(2 pi i delta_tau)`` is the determinant;
``exp(-2 pi Im delta_tau)`` is always the Fuglede-Kadison determinant.

Three path flavours are supported:

* ``SegmentProduct``  ``a -> exp(a L_1) ... exp(a L_k)``, analytic derivative;
* ``SmoothPath``      any callables for the value and the derivative;
* ``SampledPath``     values on a grid, integrated by local logarithms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .algebra import AlgebraElement, FiniteDimAlgebra, trace
from .errors import BudgetError, DomainError, StructuralError
from .ktheory import K0Lattice, Membership, idempotent_defect, k0_lattice
from .mahler import GAUSS_ORDER

TWO_PI_I = 2j * np.pi
PATH_BUDGET = 1 << 18
PATH_TOL = 1e-11
BRANCH_TOL = 1e-12
EIG_COND_MAX = 1e3


class MatrixPath:
    """A piecewise-smooth path ``[0, 1] -> invertible elements``."""

    def value(self, a: float) -> AlgebraElement:
        raise NotImplementedError

    def derivative(self, a: float) -> AlgebraElement:
        raise NotImplementedError

    def value_and_derivative(self, a: float):
        return self.value(a), self.derivative(a)

    @property
    def start(self) -> AlgebraElement:
        return self.value(0.0)

    @property
    def end(self) -> AlgebraElement:
        return self.value(1.0)

    def is_closed(self, atol: float = 1e-9) -> bool:
        return self.start.allclose(self.end, atol)


class _Exponential:
    """``a -> exp(a L)`` for one block, through an eigenbasis when that is well conditioned."""

    def __init__(self, L):
        self.L = L
        lam, v = np.linalg.eig(L)
        if np.linalg.cond(v) <= EIG_COND_MAX:
            self.eig = (lam, v, np.linalg.inv(v))
        else:
            self.eig = None

    def __call__(self, a):
        if self.eig is None:
            return scipy.linalg.expm(a * self.L)
        lam, v, vinv = self.eig
        return (v * np.exp(a * lam)) @ vinv


class SegmentProduct(MatrixPath):
    """``a -> prod_m exp(a L_m)``, running from 1 to ``prod_m exp(L_m)``."""

    def __init__(self, factors: Sequence[AlgebraElement]):
        if not factors:
            raise StructuralError("a segment product needs at least one factor")
        self.factors = tuple(factors)
        nb = len(self.factors[0].blocks)
        self._exp = [[_Exponential(f.blocks[j]) for f in self.factors] for j in range(nb)]

    def _block_terms(self, j, a):
        return [e(a) for e in self._exp[j]]

    def value_and_derivative(self, a):
        vals, ders = [], []
        for j in range(len(self._exp)):
            es = self._block_terms(j, a)
            n = es[0].shape[0]
            prefix = [np.eye(n)]
            for e in es:
                prefix.append(prefix[-1] @ e)
            suffix = np.eye(n)
            total = np.zeros((n, n), dtype=complex)
            for m in range(len(es) - 1, -1, -1):
                L = self.factors[m].blocks[j]
                total += prefix[m] @ (L @ es[m]) @ suffix
                suffix = es[m] @ suffix
            vals.append(prefix[-1])
            ders.append(total)
        return AlgebraElement(vals), AlgebraElement(ders)

    def value(self, a):
        return self.value_and_derivative(a)[0]

    def derivative(self, a):
        return self.value_and_derivative(a)[1]

    def closed_form(self, A: FiniteDimAlgebra) -> complex:
        """``sum_m tau(L_m) / 2 pi i`` (trace cyclicity makes the integrand constant)."""
        return sum(trace(A, f) for f in self.factors) / TWO_PI_I


class BottLoop(SegmentProduct):
    """``a -> exp(2 pi i a e) = exp(2 pi i a) e + (1 - e)`` for an idempotent ``e``."""

    def __init__(self, e: AlgebraElement, winding: int = 1):
        self.idempotent = e
        self.winding = int(winding)
        super().__init__([TWO_PI_I * self.winding * e])

    def value(self, a):
        z = np.exp(TWO_PI_I * self.winding * a)
        return AlgebraElement([z * b + (np.eye(b.shape[0]) - b) for b in self.idempotent.blocks])

    def derivative(self, a):
        z = TWO_PI_I * self.winding * np.exp(TWO_PI_I * self.winding * a)
        return AlgebraElement([z * b for b in self.idempotent.blocks])

    def value_and_derivative(self, a):
        return self.value(a), self.derivative(a)


class SmoothPath(MatrixPath):
    def __init__(self, func: Callable, deriv: Callable):
        self.func = func
        self.deriv = deriv

    def value(self, a):
        return self.func(a)

    def derivative(self, a):
        return self.deriv(a)


@dataclass(frozen=True, eq=False)
class SampledPath(MatrixPath):
    """Values on a strictly increasing grid from 0 to 1."""

    grid: tuple
    values: tuple

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or g.size < 2 or g[0] != 0.0 or g[-1] != 1.0 or np.any(np.diff(g) <= 0):
            raise StructuralError("grid must increase strictly from 0 to 1")
        if len(self.values) != g.size:
            raise StructuralError("one value per grid point required")
        object.__setattr__(self, "grid", tuple(g))
        object.__setattr__(self, "values", tuple(self.values))

    def value(self, a):
        i = int(np.searchsorted(self.grid, a))
        if i < len(self.grid) and self.grid[i] == a:
            return self.values[i]
        raise DomainError(f"sampled path has no value at {a}")

    def derivative(self, a):
        raise DomainError("sampled paths carry no derivative")

    @property
    def start(self):
        return self.values[0]

    @property
    def end(self):
        return self.values[-1]


def sample_path(path: MatrixPath, n: int) -> SampledPath:
    grid = np.linspace(0.0, 1.0, n + 1)
    return SampledPath(tuple(grid), tuple(path.value(a) for a in grid))


def pointwise_product(p: MatrixPath, q: MatrixPath) -> MatrixPath:
    """The path ``a -> p(a) q(a)``."""
    if isinstance(p, SegmentProduct) and isinstance(q, SegmentProduct):
        return SegmentProduct(p.factors + q.factors)
    if isinstance(p, SampledPath) or isinstance(q, SampledPath):
        if not (isinstance(p, SampledPath) and isinstance(q, SampledPath) and p.grid == q.grid):
            raise StructuralError("sampled paths multiply only with sampled paths on the same grid")
        return SampledPath(p.grid, tuple(x @ y for x, y in zip(p.values, q.values)))
    return SmoothPath(lambda a: p.value(a) @ q.value(a),
                      lambda a: p.derivative(a) @ q.value(a) + p.value(a) @ q.derivative(a))


def conjugated(path: SegmentProduct, g: AlgebraElement) -> SegmentProduct:
    """``a -> g path(a) g^-1``; stays a segment product."""
    gi = g.inverse()
    return SegmentProduct([g @ f @ gi for f in path.factors])


# ---------------------------------------------------------------------------
# integration


def _log_derivative_trace(A: FiniteDimAlgebra, path: MatrixPath, a: float) -> complex:
    x, dx = path.value_and_derivative(a)
    total = 0j
    for j, (w, xb, db) in enumerate(zip(A.trace_weights, x.blocks, dx.blocks)):
        if np.linalg.cond(xb) >= 1.0 / np.finfo(float).eps:
            raise DomainError(f"path leaves the invertible group at alpha={a:.6g} (block {j})")
        # tr(dx x^-1) = tr(x^-1 dx)
        total += w * np.trace(np.linalg.solve(xb, db))
    return total


def _gauss_sum(A, path, panels, lo, hi):
    t, w = np.polynomial.legendre.leggauss(GAUSS_ORDER)
    h = (hi - lo) / panels
    total = 0j
    for p in range(panels):
        left = lo + p * h
        for tk, wk in zip(t, w):
            total += wk * h / 2 * _log_derivative_trace(A, path, left + (tk + 1) * h / 2)
    return total


def trace_log_near_identity(A: FiniteDimAlgebra, y: AlgebraElement) -> complex:
    """``tau(log y)`` for ``||y - 1|| < 1``, from the principal logs of the eigenvalues."""
    total = 0j
    for j, (w, b) in enumerate(zip(A.trace_weights, y.blocks)):
        dist = np.linalg.norm(b - np.eye(b.shape[0]), 2)
        if dist >= 1.0:
            raise DomainError(f"sampled increment too large: ||step - 1|| = {dist:.3g} in block {j}")
        total += w * np.sum(np.log(np.linalg.eigvals(b)))
    return total


def integral_delta(A: FiniteDimAlgebra, path: MatrixPath, tol: float = PATH_TOL,
                   budget: int = PATH_BUDGET, interval=(0.0, 1.0)) -> complex:
    """``(1/2 pi i) int tau(xi' xi^-1)`` over ``interval`` (default the whole path).

    Analytic paths use composite Gauss-Legendre, doubling the panel count
    until successive values differ by less than ``tol / 4``. Sampled paths
    sum ``tau(log(xi(a_{i+1}) xi(a_i)^-1))``, exact once steps are small.
    """
    if isinstance(path, SampledPath):
        vals = path.values
        for v in vals:
            A.check(v)
        total = 0j
        for x0, x1 in zip(vals[:-1], vals[1:]):
            total += trace_log_near_identity(A, x1 @ x0.inverse())
        return complex(total / TWO_PI_I)
    lo, hi = interval
    panels = 1
    used = GAUSS_ORDER
    prev = _gauss_sum(A, path, panels, lo, hi)
    while True:
        panels *= 2
        used += GAUSS_ORDER * panels
        if used > budget:
            raise BudgetError(f"path integral not converged within {budget} evaluations",
                              last_values=(prev / TWO_PI_I,))
        cur = _gauss_sum(A, path, panels, lo, hi)
        if abs(cur - prev) / (2 * np.pi) < tol / 4:
            return complex(cur / TWO_PI_I)
        prev = cur


# ---------------------------------------------------------------------------
# canonical paths and Bott loops


def polar_logs(x: np.ndarray):
    """``(H, S)`` hermitian with ``x = exp(iH) exp(S)``; eigenphases of the
    unitary factor in (-pi, pi)."""
    w, s, vh = np.linalg.svd(x)
    if s[-1] <= np.finfo(float).eps * s[0] * x.shape[0]:
        raise DomainError("canonical path needs an invertible element")
    u = w @ vh
    v = vh.conj().T
    S = (v * np.log(s)) @ vh
    T, Z = scipy.linalg.schur(u, output="complex")
    phases = np.angle(np.diag(T))
    if np.any(np.abs(phases) > np.pi - BRANCH_TOL):
        raise DomainError("unitary factor has an eigenvalue at -1: logarithm branch is ambiguous")
    H = (Z * phases) @ Z.conj().T
    return (H + H.conj().T) / 2, (S + S.conj().T) / 2


def build_canonical_path(A: FiniteDimAlgebra, x: AlgebraElement) -> SegmentProduct:
    """``a -> exp(a iH) exp(a S)`` from 1 to ``x = exp(iH) exp(S)`` (polar form)."""
    A.check(x)
    hs = [polar_logs(b) for b in x.blocks]
    iH = AlgebraElement([1j * h for h, _ in hs])
    S = AlgebraElement([s for _, s in hs])
    return SegmentProduct([iH, S])


def bott_loop(A: FiniteDimAlgebra, e: AlgebraElement, winding: int = 1) -> BottLoop:
    A.check(e)
    defect = idempotent_defect(e)
    if defect > 1e-8:
        raise DomainError(f"not an idempotent: ||e^2 - e|| = {defect:.3g} (relative)")
    return BottLoop(e, winding)


# ---------------------------------------------------------------------------
# values modulo the trace lattice


@dataclass(frozen=True)
class QuotientValue:
    """A complex number modulo a real lattice acting on the real part."""

    representative: complex
    lattice: K0Lattice

    def __add__(self, other: QuotientValue) -> QuotientValue:
        self._same_lattice(other)
        return QuotientValue(self.representative + other.representative, self.lattice)

    def __neg__(self):
        return QuotientValue(-self.representative, self.lattice)

    def __sub__(self, other):
        return self + (-other)

    def _same_lattice(self, other):
        if self.lattice.generators != other.lattice.generators:
            raise StructuralError("quotient values over different lattices")

    def compare(self, other: QuotientValue, imag_tol: float | None = None) -> str:
        """"equal", "distinct" or "undecided"."""
        return self.compare_detail(other, imag_tol)[0]

    def compare_detail(self, other: QuotientValue, imag_tol: float | None = None):
        self._same_lattice(other)
        diff = self.representative - other.representative
        itol = self.lattice.tol if imag_tol is None else imag_tol
        if abs(diff.imag) > itol:
            return "distinct", Membership("nonmember", residual=abs(diff.imag))
        m = self.lattice.contains(diff.real)
        status = {"member": "equal", "nonmember": "distinct"}.get(m.status, "undecided")
        return status, m

    def modulus(self) -> float:
        """``|exp(2 pi i v)| = exp(-2 pi Im v)``, well defined for any real lattice."""
        return float(np.exp(-2 * np.pi * self.representative.imag))

    def exp_2pi_i(self) -> complex:
        """``exp(2 pi i v)``; well defined only when the lattice lies in Z."""
        if any(abs(g - round(g)) > self.lattice.tol for g in self.lattice.generators):
            raise DomainError("exp(2 pi i .) is not well defined modulo a lattice outside Z")
        return complex(np.exp(TWO_PI_I * self.representative))

    def to_json(self):
        return {"re": self.representative.real, "im": self.representative.imag,
                "lattice": list(self.lattice.generators)}


def delta_tau(A: FiniteDimAlgebra, x: AlgebraElement, path: MatrixPath | None = None,
              tol: float = PATH_TOL, lattice: K0Lattice | None = None) -> QuotientValue:
    """Class of ``integral_delta`` along a path from 1 to ``x``, modulo ``tau(K_0(A))``."""
    A.check(x)
    if path is None:
        path = build_canonical_path(A, x)
    else:
        scale = max(1.0, x.norm())
        if not path.start.allclose(A.identity(), 1e-9) or not path.end.allclose(x, 1e-9 * scale):
            raise DomainError("supplied path must run from 1 to x")
    lattice = k0_lattice(A) if lattice is None else lattice
    return QuotientValue(integral_delta(A, path, tol), lattice)


def fk_from_delta(A: FiniteDimAlgebra, x: AlgebraElement, path: MatrixPath | None = None,
                  tol: float = PATH_TOL) -> float:
    """``exp(-2 pi Im)`` of the path integral: the Fuglede-Kadison determinant."""
    return delta_tau(A, x, path, tol).modulus()


def primitive_difference(A: FiniteDimAlgebra, path: MatrixPath, a1: float, a2: float) -> complex:
    """``tau(log xi(a2)) - tau(log xi(a1))`` for a path staying within 1 of the identity."""
    return trace_log_near_identity(A, path.value(a2)) - trace_log_near_identity(A, path.value(a1))
