"""Fuglede-Kadison determinants over finite-dimensional traced algebras.

Three variants, which differ only on singular elements:

* ``fk_det``          invertible elements only;
* ``fk_det_extended`` analytic extension, 0 as soon as a kernel has positive trace;
* ``fkl_det``         ignores the zero part of the spectrum (``fkl_det(0) == 1``).

All three are computed from the singular values of the blocks, weighted by
the block trace weights.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import AlgebraElement, FiniteDimAlgebra
from .errors import DomainError

FKL_ETA = 1e-12


@dataclass(frozen=True)
class SingularValueProfile:
    """Spectrum of ``|x| = (x*x)^{1/2}`` as (value, trace weight) pairs, values descending."""

    sigmas: tuple
    weights: tuple

    @property
    def total_weight(self) -> float:
        return float(sum(self.weights))

    @property
    def sigma_max(self) -> float:
        return self.sigmas[0] if self.sigmas else 0.0

    def pairs(self):
        return list(zip(self.sigmas, self.weights))

    def log_integral(self, threshold: float = 0.0) -> float:
        """``sum mu_i ln sigma_i`` over ``sigma_i > threshold``."""
        s = np.asarray(self.sigmas)
        w = np.asarray(self.weights)
        keep = s > threshold
        return float(np.sum(w[keep] * np.log(s[keep])))

    def to_json(self):
        return [[float(s), float(w)] for s, w in zip(self.sigmas, self.weights)]


def _raw_profile(A: FiniteDimAlgebra, x: AlgebraElement):
    A.check(x)
    sig = []
    wts = []
    for w, b in zip(A.trace_weights, x.blocks):
        s = np.linalg.svd(b, compute_uv=False)
        sig.append(s)
        wts.append(np.full(s.shape, w))
    sig = np.concatenate(sig)
    wts = np.concatenate(wts)
    order = np.argsort(-sig, kind="stable")
    return sig[order], wts[order]


def singular_profile(A: FiniteDimAlgebra, x: AlgebraElement) -> SingularValueProfile:
    """Singular values of the blocks of ``x`` with aggregated trace weights.

    Values that agree to a few ulps of the largest one are merged.
    """
    sig, wts = _raw_profile(A, x)
    merge_tol = 8 * np.finfo(float).eps * (sig[0] if sig.size and sig[0] > 0 else 1.0)
    sigmas, weights = [], []
    for s, w in zip(sig, wts):
        if sigmas and abs(sigmas[-1] - s) <= merge_tol:
            weights[-1] += w
        else:
            sigmas.append(float(s))
            weights.append(float(w))
    return SingularValueProfile(tuple(sigmas), tuple(weights))


def zero_threshold(A: FiniteDimAlgebra, sigma_max: float, eta: float = FKL_ETA) -> float:
    """Singular values at or below this count as exact zeros."""
    return eta * sigma_max * A.dim


def log_fk_det(A: FiniteDimAlgebra, x: AlgebraElement) -> float:
    sig, wts = _raw_profile(A, x)
    if sig[-1] <= zero_threshold(A, sig[0]):
        raise DomainError(
            "fk_det needs an invertible element; use fk_det_extended or fkl_det for singular input")
    return float(np.sum(wts * np.log(sig)))


def fk_det(A: FiniteDimAlgebra, x: AlgebraElement) -> float:
    """``exp tau(log |x|)`` for invertible ``x``.

    With the weights of ``A`` this equals ``prod_j |det x_j|^{w_j}``, so
    ``fk_det(lam * 1) == |lam| ** tau(1)``.
    """
    return float(np.exp(log_fk_det(A, x)))


def fk_det_extended(A: FiniteDimAlgebra, x: AlgebraElement, eta: float = FKL_ETA) -> float:
    sig, wts = _raw_profile(A, x)
    if sig[0] == 0.0 or sig[-1] <= zero_threshold(A, sig[0], eta):
        return 0.0
    return float(np.exp(np.sum(wts * np.log(sig))))


def log_fkl_det(A: FiniteDimAlgebra, x: AlgebraElement, eta: float = FKL_ETA) -> float:
    sig, wts = _raw_profile(A, x)
    keep = sig > zero_threshold(A, sig[0], eta)
    return float(np.sum(wts[keep] * np.log(sig[keep])))


def fkl_det(A: FiniteDimAlgebra, x: AlgebraElement, eta: float = FKL_ETA) -> float:
    """Spectral integral of ``ln`` restricted to the nonzero part of ``|x|``."""
    return float(np.exp(log_fkl_det(A, x, eta)))


def absolute_value(x: AlgebraElement) -> AlgebraElement:
    """``(x*x)^{1/2}`` computed from the SVD (exactly positive semidefinite)."""
    out = []
    for b in x.blocks:
        _, s, vh = np.linalg.svd(b)
        out.append((vh.conj().T * s) @ vh)
    return AlgebraElement(out)
