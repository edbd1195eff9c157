"""Mahler measures of Laurent polynomials.

``M(p) = exp of the Haar mean of ln|p| over the torus T^d``. In one
variable this is evaluated from the roots (Jensen's formula); in general by
a randomly shifted composite Gauss-Legendre product rule with dyadic panel
refinement. For an element of the group ring of Z^d, M is its
Fuglede-Kadison determinant for the canonical trace.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import BudgetError, DomainError, StructuralError

GAUSS_ORDER = 8
DEFAULT_BUDGET = 1 << 24
MAX_DIM = 4
# first-axis nodes handed to the kernel per call
CHUNK_NODES = 1 << 18


class LaurentPolynomial:
    """Finitely supported map from exponent vectors in Z^d to complex coefficients."""

    __slots__ = ("d", "terms")

    def __init__(self, d: int, terms: Mapping):
        d = int(d)
        if d < 1:
            raise StructuralError("dimension must be at least 1")
        clean = {}
        for e, c in dict(terms).items():
            e = (int(e),) if np.isscalar(e) else tuple(int(k) for k in e)
            if len(e) != d:
                raise StructuralError(f"exponent {e} does not have length {d}")
            clean[e] = clean.get(e, 0j) + complex(c)
        clean = {e: c for e, c in sorted(clean.items()) if c != 0}
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("LaurentPolynomial is immutable")

    @classmethod
    def from_coeffs(cls, coeffs, shift: int = 0) -> LaurentPolynomial:
        """One variable: ``sum_k coeffs[k] z^(k + shift)``."""
        return cls(1, {(k + shift,): c for k, c in enumerate(coeffs)})

    @classmethod
    def monomial(cls, exp, coeff=1.0) -> LaurentPolynomial:
        exp = (exp,) if np.isscalar(exp) else tuple(exp)
        return cls(len(exp), {exp: coeff})

    @classmethod
    def constant(cls, c, d: int = 1) -> LaurentPolynomial:
        return cls(d, {(0,) * d: c})

    @classmethod
    def from_roots(cls, roots, lead=1.0) -> LaurentPolynomial:
        return cls.from_coeffs(lead * np.poly(roots)[::-1])

    def __repr__(self):
        return f"LaurentPolynomial(d={self.d}, terms={self.terms})"

    def __eq__(self, other):
        return isinstance(other, LaurentPolynomial) and self.d == other.d and self.terms == other.terms

    def __hash__(self):
        return hash((self.d, tuple(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def exps(self) -> np.ndarray:
        return np.array(list(self.terms), dtype=np.int64).reshape(-1, self.d)

    @property
    def coeffs(self) -> np.ndarray:
        return np.array(list(self.terms.values()), dtype=complex)

    def _check(self, other):
        if self.d != other.d:
            raise StructuralError(f"dimension mismatch: {self.d} vs {other.d}")

    def __add__(self, other):
        if not isinstance(other, LaurentPolynomial):
            other = LaurentPolynomial.constant(other, self.d)
        self._check(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0j) + c
        return LaurentPolynomial(self.d, out)

    __radd__ = __add__

    def __neg__(self):
        return LaurentPolynomial(self.d, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, LaurentPolynomial):
            other = LaurentPolynomial.constant(other, self.d)
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, LaurentPolynomial):
            return LaurentPolynomial(self.d, {e: other * c for e, c in self.terms.items()})
        self._check(other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0j) + c1 * c2
        return LaurentPolynomial(self.d, out)

    __rmul__ = __mul__

    def shift(self, exp) -> LaurentPolynomial:
        """Multiply by the monomial ``z^exp``."""
        exp = (exp,) if np.isscalar(exp) else tuple(exp)
        return LaurentPolynomial(self.d, {tuple(a + b for a, b in zip(e, exp)): c
                                          for e, c in self.terms.items()})

    def conjugate(self) -> LaurentPolynomial:
        """Conjugate coefficients and negate exponents (``p(z)`` bar on the torus)."""
        return LaurentPolynomial(self.d, {tuple(-a for a in e): np.conj(c) for e, c in self.terms.items()})

    def substitute_monomial(self, exp) -> LaurentPolynomial:
        """For one-variable ``p``, the ``len(exp)``-variable ``p(z^exp)``."""
        if self.d != 1:
            raise StructuralError("substitution is defined for one-variable polynomials")
        exp = tuple(int(a) for a in exp)
        return LaurentPolynomial(len(exp), {tuple(e[0] * a for a in exp): c for e, c in self.terms.items()})

    def __call__(self, z):
        """Evaluate at points ``z`` of shape ``(..., d)`` (or ``(...)`` when d = 1)."""
        z = np.asarray(z, dtype=complex)
        if self.d == 1 and (z.ndim == 0 or z.shape[-1] != 1):
            z = z[..., None]
        out = np.zeros(z.shape[:-1], dtype=complex)
        for e, c in self.terms.items():
            out = out + c * np.prod(z ** np.array(e), axis=-1)
        return out

    def on_torus(self, angles) -> np.ndarray:
        """Evaluate at ``exp(2 pi i angles)``, angles of shape ``(..., d)``."""
        angles = np.asarray(angles, dtype=float)
        if self.d == 1 and (angles.ndim == 0 or angles.shape[-1] != 1):
            angles = angles[..., None]
        phase = np.tensordot(angles, self.exps.T.astype(float), axes=1)
        return np.exp(2j * np.pi * phase) @ self.coeffs

    def coefficients_1d(self):
        """``(m, [a_0, ..., a_s])`` with ``p = z^m (a_0 + ... + a_s z^s)``, ``a_0 a_s != 0``."""
        if self.d != 1:
            raise DomainError("one-variable polynomial required")
        if self.is_zero():
            raise DomainError("zero polynomial")
        e = self.exps[:, 0]
        m = int(e.min())
        a = np.zeros(int(e.max()) - m + 1, dtype=complex)
        a[e - m] = self.coeffs
        return m, a


# ---------------------------------------------------------------------------
# one variable: Jensen's formula


def polynomial_roots(a) -> np.ndarray:
    """Roots of ``a_0 + a_1 z + ... + a_s z^s`` from a balanced companion matrix."""
    a = np.asarray(a, dtype=complex)
    s = a.size - 1
    if s < 1:
        return np.zeros(0, dtype=complex)
    comp = np.zeros((s, s), dtype=complex)
    comp[1:, :-1] = np.eye(s - 1)
    comp[:, -1] = -a[:-1] / a[-1]
    bal, _ = scipy.linalg.matrix_balance(comp, permute=False)
    return np.linalg.eigvals(bal)


def log_mahler_1d_exact(p: LaurentPolynomial) -> float:
    if p.d != 1:
        raise DomainError(f"exact evaluation needs d = 1, got d = {p.d}")
    _, a = p.coefficients_1d()
    roots = polynomial_roots(a)
    return float(np.log(abs(a[-1])) + np.sum(np.log(np.maximum(1.0, np.abs(roots)))))


def mahler_1d_exact(p: LaurentPolynomial) -> float:
    """``|a_s| prod_j max(1, |xi_j|)`` over the roots ``xi_j``."""
    return float(np.exp(log_mahler_1d_exact(p)))


# ---------------------------------------------------------------------------
# torus quadrature


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int
    log_value: float = 0.0
    log_error: float = 0.0
    seed: int = 0
    trace: tuple = field(default=(), compare=False)

    def to_json(self):
        return {
            "value": self.value,
            "error_estimate": self.error_estimate,
            "log_value": self.log_value,
            "log_error_estimate": self.log_error,
            "evaluations": self.evaluations,
            "seed": self.seed,
            "refinements": [{"panels": p, "evaluations": n, "log_value": v} for p, n, v in self.trace],
        }


def gauss_panels(panels: int, shift: float):
    """Composite Gauss-Legendre rule on the circle [0, 1) with ``panels``
    equal panels, rotated by ``shift``. Returns ``(nodes, weights)``."""
    t, w = np.polynomial.legendre.leggauss(GAUSS_ORDER)
    t = (t + 1.0) / 2.0
    nodes = (np.arange(panels)[:, None] + t[None, :]) / panels
    nodes = np.mod(nodes.ravel() + shift, 1.0)
    weights = np.tile(w / (2.0 * panels), panels)
    return nodes, weights


def torus_shifts(d: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).random(d)


def refine_torus_integral(level: Callable, d: int, tol: float, seed: int = 0,
                          budget: int = DEFAULT_BUDGET, min_levels: int = 3):
    """Dyadic refinement driver for log-type integrals over T^d.

    ``level(panels, shifts)`` returns ``(integral, evaluations)`` for the
    product rule with ``panels`` panels per axis. Stops when twice the
    larger of the last two successive differences (plus a roundoff floor)
    is at most ``tol``. Returns ``(integral, estimate, evaluations, trace)``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    shifts = torus_shifts(d, seed)
    used = 0
    values = []
    trace = []
    panels = 2 if d == 1 else 1
    while True:
        cost = (GAUSS_ORDER * panels) ** d
        if used + cost > budget:
            raise BudgetError(
                f"torus quadrature did not reach tol={tol:g} within {budget} evaluations",
                last_values=values[-2:])
        val, n = level(panels, shifts)
        used += n
        values.append(val)
        trace.append((panels, n, val))
        if not np.isfinite(val):
            raise DomainError("log integrand is -inf on a quadrature node (zero on the grid)")
        if len(values) >= min_levels:
            diffs = [abs(values[-1] - values[-2]), abs(values[-2] - values[-3])]
            est = 2.0 * max(diffs) + 64 * np.finfo(float).eps * max(1.0, abs(val))
            if est <= tol:
                return val, est, used, tuple(trace)
        panels *= 2


def log_abs_mean(p: LaurentPolynomial, panels: int, shifts, use_numba=None):
    """One product-rule evaluation of the Haar mean of ``ln|p|``.

    Returns ``(mean, evaluations)``. ``use_numba`` forces a kernel flavour.
    """
    d = p.d
    kernel = _kernels.torus_log_abs
    if use_numba is not None:
        kernel = _kernels.torus_log_abs_numba if use_numba else _kernels.torus_log_abs_numpy
    axis = [gauss_panels(panels, s) for s in shifts]
    weights = axis[0][1]
    n = weights.size
    coeffs = p.coeffs
    exps = p.exps.astype(float)
    total = 0.0
    if d == 1:
        # the power table is the memory hog in one variable: build it per chunk
        for lo in range(0, n, CHUNK_NODES):
            hi = min(n, lo + CHUNK_NODES)
            powers = np.exp(2j * np.pi * np.outer(exps[:, 0], axis[0][0][lo:hi]))[None]
            for v in kernel(coeffs, powers, np.ascontiguousarray(weights[lo:hi])):
                total += v
    else:
        powers = np.stack([np.exp(2j * np.pi * np.outer(exps[:, a], axis[a][0])) for a in range(d)])
        for v in kernel(coeffs, powers, weights):
            total += v
    return total, n ** d


def mahler_quadrature(p: LaurentPolynomial, tol: float = 1e-8, seed: int = 0,
                      budget: int = DEFAULT_BUDGET) -> QuadratureResult:
    """Mahler measure of ``p`` by randomly shifted product Gauss-Legendre quadrature.

    ``tol`` bounds the estimated error of the log-mean, hence the relative
    error of the returned value.
    """
    if p.is_zero():
        raise DomainError("zero polynomial has no Mahler measure")
    if p.d > MAX_DIM:
        raise DomainError(f"quadrature supports d <= {MAX_DIM}, got {p.d}")

    def level(panels, shifts):
        return log_abs_mean(p, panels, shifts)

    logv, est, used, trace = refine_torus_integral(level, p.d, tol, seed, budget)
    value = float(np.exp(logv))
    return QuadratureResult(value, float(value * np.expm1(est)), used, float(logv), float(est),
                            seed, trace)


def fk_det_zd(p: LaurentPolynomial, tol: float = 1e-8, seed: int = 0,
              budget: int = DEFAULT_BUDGET) -> float:
    """FK determinant of ``sum_n z_n lambda(n)`` in the von Neumann algebra of Z^d."""
    if p.is_zero():
        raise DomainError("zero polynomial")
    if p.d == 1:
        return mahler_1d_exact(p)
    return mahler_quadrature(p, tol, seed, budget).value
