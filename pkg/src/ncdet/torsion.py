"""Torsion of based finite chain complexes over C.

Conventions (fixed once, enforced by the tests):

* ``differentials[k-1]`` is ``d_k : C_k -> C_{k-1}``, a ``dims[k-1] x dims[k]`` matrix.
* Torsion lives in ``C^* / {+-1}``. The odd/even formula is
  ``det((d + delta)|odd)`` with ``C_odd = C_1 + C_3 + ...`` mapped to
  ``C_even = C_0 + C_2 + ...``.
* Milnor's formula is ``prod_i det[b_i h_i b_{i-1}]^((-1)^i)`` where the
  columns of ``[b_i h_i b_{i-1}]`` are the new basis vectors written in
  the preferred basis ``c_i``; with this orientation it agrees with the
  odd/even formula (``0 -> C --a--> C -> 0`` has torsion ``a``).
* Laplacian and L2 expressions come out as ``-ln|torsion|``:
  ``1/2 sum_k (-1)^k k ln det' Lap_k = -ln|tau(C)|`` on acyclic complexes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import _kernels
from .algebra import AlgebraElement, FiniteDimAlgebra, FiniteGroupSpec, left_regular_matrix
from .errors import DomainError, StructuralError
from .fkdet import log_fkl_det
from .mahler import DEFAULT_BUDGET, LaurentPolynomial, gauss_panels, refine_torus_integral

RANK_RTOL = 1e-10
COMPOSITION_RTOL = 1e-10
CONTRACTION_RTOL = 1e-9


# ---------------------------------------------------------------------------
# torsion values


@dataclass(frozen=True)
class TorsionValue:
    """Element of ``C^* / {+-1}``: modulus and a unit-modulus sign class
    normalised to nonnegative real part (nonnegative imaginary part on ties)."""

    log_modulus: float
    sign_class: complex

    @classmethod
    def from_log_polar(cls, log_modulus: float, phase: complex) -> TorsionValue:
        u = complex(phase) / abs(phase)
        if u.real < 0 or (u.real == 0 and u.imag < 0):
            u = -u
        return cls(float(log_modulus), u)

    @classmethod
    def from_complex(cls, z: complex) -> TorsionValue:
        if z == 0:
            raise DomainError("torsion is a unit; got 0")
        return cls.from_log_polar(np.log(abs(z)), z)

    @property
    def modulus(self) -> float:
        return float(np.exp(self.log_modulus))

    def close(self, other: TorsionValue, rtol: float = 1e-8) -> bool:
        s = min(abs(self.sign_class - other.sign_class), abs(self.sign_class + other.sign_class))
        return abs(self.log_modulus - other.log_modulus) <= rtol and s <= rtol

    def to_json(self):
        return {"modulus": self.modulus, "log_modulus": self.log_modulus,
                "sign_class": [self.sign_class.real, self.sign_class.imag]}


def _slogdet(m):
    if m.shape == (0, 0):
        return 1.0 + 0j, 0.0
    sign, logabs = np.linalg.slogdet(m)
    if sign == 0 or not np.isfinite(logabs):
        raise DomainError("singular change-of-basis matrix")
    return complex(sign), float(logabs)


# ---------------------------------------------------------------------------
# complexes


@dataclass(frozen=True, eq=False)
class BasedChainComplex:
    dims: tuple
    differentials: tuple
    homology_bases: tuple | None = None

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if not dims or any(n < 0 for n in dims):
            raise StructuralError("dims must be a nonempty list of nonnegative integers")
        diffs = tuple(np.array(d, dtype=complex).reshape(dims[k], dims[k + 1])
                      if np.size(d) == dims[k] * dims[k + 1] else np.array(d, dtype=complex)
                      for k, d in enumerate(self.differentials))
        if len(diffs) != len(dims) - 1:
            raise StructuralError(f"{len(dims)} chain groups need {len(dims) - 1} differentials")
        for k, d in enumerate(diffs, start=1):
            if d.shape != (dims[k - 1], dims[k]):
                raise StructuralError(f"d_{k} has shape {d.shape}, expected {(dims[k - 1], dims[k])}")
            d.setflags(write=False)
        for k in range(2, len(dims)):
            a, b = diffs[k - 2], diffs[k - 1]
            scale = max(1.0, np.linalg.norm(a, 2) * np.linalg.norm(b, 2)) if a.size and b.size else 1.0
            if a.size and b.size and np.linalg.norm(a @ b, 2) > COMPOSITION_RTOL * scale:
                raise StructuralError(f"d_{k - 1} d_{k} != 0 (norm {np.linalg.norm(a @ b, 2):.3g})")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "differentials", diffs)
        if self.homology_bases is not None:
            hb = tuple(None if h is None else np.array(h, dtype=complex).reshape(dims[i], -1)
                       for i, h in enumerate(self.homology_bases))
            object.__setattr__(self, "homology_bases", hb)

    @property
    def length(self) -> int:
        return len(self.dims) - 1

    def d(self, k: int) -> np.ndarray:
        """``d_k : C_k -> C_{k-1}``, with zero maps outside 1..n."""
        n = self.length
        if 1 <= k <= n:
            return self.differentials[k - 1]
        rows = self.dims[k - 1] if 1 <= k <= n + 1 else 0
        cols = self.dims[k] if 0 <= k <= n else 0
        return np.zeros((rows, cols), dtype=complex)

    def laplacian(self, k: int) -> np.ndarray:
        a = self.d(k)
        b = self.d(k + 1)
        return a.conj().T @ a + b @ b.conj().T

    def direct_sum(self, other: BasedChainComplex) -> BasedChainComplex:
        n = max(self.length, other.length)
        da = list(self.dims) + [0] * (n - self.length)
        db = list(other.dims) + [0] * (n - other.length)
        diffs = []
        for k in range(1, n + 1):
            a = self.d(k) if k <= self.length else np.zeros((da[k - 1], da[k]))
            b = other.d(k) if k <= other.length else np.zeros((db[k - 1], db[k]))
            diffs.append(scipy.linalg.block_diag(a, b).reshape(da[k - 1] + db[k - 1], da[k] + db[k]))
        return BasedChainComplex(tuple(x + y for x, y in zip(da, db)), tuple(diffs))

    def rebased(self, changes: Sequence[np.ndarray]) -> BasedChainComplex:
        """Same complex in new bases: ``changes[i]`` has the new basis of C_i as columns."""
        g = [np.asarray(c, dtype=complex) for c in changes]
        diffs = [np.linalg.solve(g[k - 1], self.d(k) @ g[k]) for k in range(1, self.length + 1)]
        return BasedChainComplex(self.dims, tuple(diffs))


def rank_threshold(C: BasedChainComplex) -> float:
    lam_max = 0.0
    for k in range(len(C.dims)):
        lap = C.laplacian(k)
        if lap.size:
            lam_max = max(lam_max, float(np.linalg.eigvalsh(lap)[-1]))
    return RANK_RTOL * lam_max * max(C.dims)


@dataclass(frozen=True)
class Diagnostics:
    composition_norms: tuple
    spectral_gaps: tuple
    betti: tuple
    threshold: float
    acyclic: bool

    def to_json(self):
        return {"composition_norms": list(self.composition_norms),
                "spectral_gaps": list(self.spectral_gaps), "betti": list(self.betti),
                "threshold": self.threshold, "acyclic": self.acyclic}


def validate_complex(C: BasedChainComplex) -> Diagnostics:
    """``||d_{k-1} d_k||``, smallest Laplacian eigenvalue per degree, and an acyclicity verdict."""
    comps = tuple(float(np.linalg.norm(C.d(k - 1) @ C.d(k), 2)) if C.d(k - 1).size and C.d(k).size
                  else 0.0 for k in range(2, C.length + 1))
    theta = rank_threshold(C)
    gaps, betti = [], []
    for k in range(len(C.dims)):
        lap = C.laplacian(k)
        if lap.size == 0:
            gaps.append(float("inf"))
            betti.append(0)
            continue
        lam = np.linalg.eigvalsh(lap)
        gaps.append(float(lam[0]))
        betti.append(int(np.count_nonzero(lam <= theta)))
    return Diagnostics(comps, tuple(gaps), tuple(betti), theta, all(b == 0 for b in betti))


def _require_acyclic(C: BasedChainComplex) -> Diagnostics:
    diag = validate_complex(C)
    if not diag.acyclic:
        k = next(i for i, b in enumerate(diag.betti) if b)
        raise DomainError(f"complex is not acyclic: homology of rank {diag.betti[k]} in degree {k}")
    return diag


# ---------------------------------------------------------------------------
# chain contractions


def chain_contraction(C: BasedChainComplex, method: str = "laplacian", rng=None) -> list:
    """Degree-one map ``delta`` with ``d delta + delta d = 1``.

    ``delta[i] : C_i -> C_{i+1}``. Methods: ``"laplacian"``
    (``d_{i+1}^* Lap_i^-1``), ``"pinv"`` (Moore-Penrose inverses) and
    ``"complement"`` (inverse of ``d`` on a random complement of the
    cycles, so ``delta`` is generally not orthogonal and ``delta^2 != 0``).
    """
    _require_acyclic(C)
    n = C.length
    if method == "laplacian":
        delta = [C.d(i + 1).conj().T @ np.linalg.inv(C.laplacian(i)) if C.dims[i] else
                 np.zeros((C.dims[i + 1], 0)) for i in range(n)]
    elif method == "pinv":
        delta = [np.linalg.pinv(C.d(i + 1)) for i in range(n)]
    elif method == "complement":
        rng = np.random.default_rng() if rng is None else rng
        delta = _complement_contraction(C, rng)
    else:
        raise ValueError(f"unknown contraction method {method!r}")
    res = contraction_residual(C, delta)
    scale = max([1.0] + [np.linalg.norm(C.d(k), 2) * np.linalg.norm(delta[k - 1], 2)
                         for k in range(1, n + 1) if C.d(k).size])
    if res > CONTRACTION_RTOL * scale:
        raise DomainError(f"chain contraction residual {res:.3g} too large")
    return delta


def contraction_residual(C: BasedChainComplex, delta) -> float:
    n = C.length
    worst = 0.0
    for i in range(n + 1):
        m = C.dims[i]
        if m == 0:
            continue
        acc = np.zeros((m, m), dtype=complex)
        if i < n:
            acc += C.d(i + 1) @ delta[i]
        if i > 0:
            acc += delta[i - 1] @ C.d(i)
        worst = max(worst, float(np.linalg.norm(acc - np.eye(m), 2)))
    return worst


def _complement_contraction(C, rng):
    n = C.length
    cycles, comps = [], []
    for i in range(n + 1):
        m = C.dims[i]
        z = scipy.linalg.null_space(C.d(i)) if i > 0 else np.eye(m)
        k = m - z.shape[1]
        w = rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))
        cycles.append(z)
        comps.append(w)
    delta = []
    for i in range(n):
        # delta_i: C_i -> C_{i+1}, inverse of d_{i+1} restricted to the complement W_{i+1}
        m = C.dims[i]
        basis = np.concatenate([cycles[i], comps[i]], axis=1)
        coords = np.linalg.solve(basis, np.eye(m))[: cycles[i].shape[1]]
        dw = C.d(i + 1) @ comps[i + 1]
        lift = np.linalg.lstsq(dw, cycles[i], rcond=None)[0]
        delta.append(comps[i + 1] @ lift @ coords)
    return delta


# ---------------------------------------------------------------------------
# torsion formulas


def odd_even_matrix(C: BasedChainComplex, delta) -> np.ndarray:
    n = C.length
    odd = [i for i in range(n + 1) if i % 2]
    even = [i for i in range(n + 1) if i % 2 == 0]
    row_at = {}
    r = 0
    for i in even:
        row_at[i] = r
        r += C.dims[i]
    cols = sum(C.dims[i] for i in odd)
    if r != cols:
        raise DomainError(f"odd and even ranks differ ({cols} vs {r}); complex cannot be acyclic")
    m = np.zeros((r, cols), dtype=complex)
    c = 0
    for i in odd:
        w = C.dims[i]
        m[row_at[i - 1]:row_at[i - 1] + C.dims[i - 1], c:c + w] = C.d(i)
        if i < n:
            m[row_at[i + 1]:row_at[i + 1] + C.dims[i + 1], c:c + w] = delta[i]
        c += w
    return m


def torsion_odd_even(C: BasedChainComplex, delta=None) -> TorsionValue:
    """Class of ``(d + delta)|odd : C_odd -> C_even`` in ``C^*/{+-1}``."""
    if delta is None:
        delta = chain_contraction(C)
    m = odd_even_matrix(C, delta)
    sign, logabs = _slogdet(m)
    return TorsionValue.from_log_polar(logabs, sign)


def _column_basis(a: np.ndarray, rank: int, rng=None) -> np.ndarray:
    """``rank`` columns spanning the image of ``a`` (pivoted QR), optionally re-pivoted and mixed."""
    if rank == 0:
        return np.zeros((a.shape[0], 0), dtype=complex)
    perm = rng.permutation(a.shape[1]) if rng is not None else np.arange(a.shape[1])
    q, _, _ = scipy.linalg.qr(a[:, perm], pivoting=True, mode="economic")
    b = q[:, :rank]
    if rng is not None:
        g = rng.standard_normal((rank, rank)) + 1j * rng.standard_normal((rank, rank))
        b = b @ g
    return b


def _rank(a: np.ndarray, theta: float) -> int:
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.count_nonzero(s * s > theta))


def harmonic_basis(C: BasedChainComplex, k: int, theta: float | None = None) -> np.ndarray:
    """Orthonormal basis of ``ker Lap_k``, i.e. of harmonic representatives of H_k."""
    theta = rank_threshold(C) if theta is None else theta
    lap = C.laplacian(k)
    if lap.size == 0:
        return np.zeros((C.dims[k], 0), dtype=complex)
    lam, v = np.linalg.eigh(lap)
    return v[:, lam <= theta]


def torsion_milnor(C: BasedChainComplex, h=None, rng=None) -> TorsionValue:
    """Milnor's alternating product of change-of-basis determinants.

    ``h[i]`` (columns = cycles in C_i) defaults to ``C.homology_bases`` and
    then to the harmonic basis. ``rng`` randomises the choice of the
    boundary bases ``b_i``; the result does not depend on it.
    """
    n = C.length
    theta = rank_threshold(C)
    if h is None:
        h = C.homology_bases
    ranks = [_rank(C.d(i + 1), theta) for i in range(n + 1)]  # rank of B_i = im d_{i+1}
    b = [_column_basis(C.d(i + 1), ranks[i], rng) for i in range(n + 1)]
    log_mod = 0.0
    phase = 1.0 + 0j
    for i in range(n + 1):
        hi = harmonic_basis(C, i, theta) if h is None or h[i] is None else np.asarray(h[i], dtype=complex)
        hi = hi.reshape(C.dims[i], -1)
        if hi.shape[1] and np.linalg.norm(C.d(i) @ hi) > 1e-8 * max(1.0, np.linalg.norm(hi)):
            raise DomainError(f"supplied homology basis in degree {i} does not consist of cycles")
        if i > 0 and ranks[i - 1]:
            lift = np.linalg.lstsq(C.d(i), b[i - 1], rcond=None)[0]
        else:
            lift = np.zeros((C.dims[i], 0), dtype=complex)
        if ranks[i] + hi.shape[1] + lift.shape[1] != C.dims[i]:
            raise DomainError(
                f"degree {i}: boundary rank {ranks[i]} + homology {hi.shape[1]} + "
                f"lifted boundaries {lift.shape[1]} != rank {C.dims[i]}")
        m = np.concatenate([b[i], hi, lift], axis=1)
        sign, logabs = _slogdet(m)
        if i % 2 == 0:
            log_mod += logabs
            phase *= sign
        else:
            log_mod -= logabs
            phase /= sign
    return TorsionValue.from_log_polar(log_mod, phase)


def log_det_prime(m: np.ndarray, theta: float) -> float:
    """Sum of ``ln`` of the eigenvalues of a PSD matrix above ``theta``."""
    if m.size == 0:
        return 0.0
    lam = np.linalg.eigvalsh(m)
    return float(np.sum(np.log(lam[lam > theta])))


def ray_singer_laplacian(C: BasedChainComplex) -> float:
    """``1/2 sum_k (-1)^k k ln det' Lap_k``."""
    theta = rank_threshold(C)
    return 0.5 * sum((-1) ** k * k * log_det_prime(C.laplacian(k), theta) for k in range(len(C.dims)))


def ray_singer_first_line(C: BasedChainComplex) -> float:
    """``1/2 sum_k (-1)^k ln det'(d_k^* d_k)``; equal to the Laplacian form."""
    theta = rank_threshold(C)
    return 0.5 * sum((-1) ** k * log_det_prime(C.d(k).conj().T @ C.d(k), theta)
                     for k in range(1, C.length + 1))


def ray_singer_check(C: BasedChainComplex):
    """``(Laplacian expression, ln|odd/even torsion|)``; they sum to zero."""
    _require_acyclic(C)
    return ray_singer_laplacian(C), torsion_odd_even(C).log_modulus


# ---------------------------------------------------------------------------
# group-ring complexes


class GroupRingComplex:
    """Chain complex of free modules over a group ring."""

    dims: tuple


@dataclass(frozen=True, eq=False)
class FiniteGroupComplex(GroupRingComplex):
    """``differentials[k-1][r, c]`` is the coefficient vector (length |G|) of an
    element of C[G]; array shape ``(dims[k-1], dims[k], |G|)``."""

    group: FiniteGroupSpec
    dims: tuple
    differentials: tuple

    def __post_init__(self):
        G = self.group
        dims = tuple(int(n) for n in self.dims)
        diffs = []
        for k, d in enumerate(self.differentials, start=1):
            d = np.array(d, dtype=complex).reshape(dims[k - 1], dims[k], G.order)
            d.setflags(write=False)
            diffs.append(d)
        if len(diffs) != len(dims) - 1:
            raise StructuralError(f"{len(dims)} chain groups need {len(dims) - 1} differentials")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "differentials", tuple(diffs))
        for k in range(2, len(dims)):
            prod = group_ring_matmul(G, diffs[k - 2], diffs[k - 1])
            if np.abs(prod).max(initial=0.0) > 1e-12 * max(1.0, np.abs(diffs[k - 2]).max(initial=0)
                                                          * np.abs(diffs[k - 1]).max(initial=0)):
                raise StructuralError(f"d_{k - 1} d_{k} != 0 in the group ring")

    def pushforward(self, rep: np.ndarray) -> BasedChainComplex:
        """Substitute ``h(g)`` (``rep[g]``, k x k) for each group element."""
        k = rep.shape[1]
        diffs = []
        for d in self.differentials:
            r, c, _ = d.shape
            big = np.einsum("rcg,gij->ricj", d, rep).reshape(r * k, c * k)
            diffs.append(big)
        return BasedChainComplex(tuple(n * k for n in self.dims), tuple(diffs))

    def regular_pushforward(self) -> BasedChainComplex:
        G = self.group
        rep = np.stack([left_regular_matrix(G, np.eye(G.order)[g]) for g in range(G.order)])
        return self.pushforward(rep)


def group_ring_matmul(G: FiniteGroupSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product over C[G] of arrays shaped ``(r, m, |G|)`` and ``(m, c, |G|)``."""
    r, m, _ = a.shape
    _, c, _ = b.shape
    out = np.zeros((r, c, G.order), dtype=complex)
    table = G.table
    for i in range(r):
        for j in range(c):
            for l in range(m):
                x, y = a[i, l], b[l, j]
                if x.any() and y.any():
                    out[i, j] += _kernels.group_ring_mul(table, np.ascontiguousarray(x),
                                                         np.ascontiguousarray(y))
    return out


def check_representation(G: FiniteGroupSpec, rep: np.ndarray, tol: float = 1e-10, seed: int = 0):
    """Raise unless ``rep`` is an orthogonal (unitary) homomorphism on the group table."""
    rep = np.asarray(rep)
    if rep.ndim != 3 or rep.shape[0] != G.order or rep.shape[1] != rep.shape[2]:
        raise StructuralError(f"representation must have shape (|G|, k, k), got {rep.shape}")
    k = rep.shape[1]
    for g in range(G.order):
        if np.linalg.norm(rep[g].conj().T @ rep[g] - np.eye(k)) > tol:
            raise DomainError(f"h({g}) is not orthogonal")
    if G.order <= 64:
        pairs = [(g, h) for g in range(G.order) for h in range(G.order)]
    else:
        rng = np.random.default_rng(seed)
        pairs = [tuple(p) for p in rng.integers(0, G.order, size=(4096, 2))]
    for g, h in pairs:
        if np.linalg.norm(rep[g] @ rep[h] - rep[G.mul(g, h)]) > tol:
            raise DomainError(f"representation is not a homomorphism: h({g})h({h}) != h({G.mul(g, h)})")


def reidemeister_torsion(K: FiniteGroupComplex, rep) -> float:
    """Modulus of the torsion of the complex pushed forward along an orthogonal representation."""
    rep = np.asarray(rep, dtype=complex)
    check_representation(K.group, rep)
    C = K.pushforward(rep)
    diag = validate_complex(C)
    if not diag.acyclic:
        k = next(i for i, b in enumerate(diag.betti) if b)
        raise DomainError(f"pushed-forward complex is not acyclic (degree {k}, rank {diag.betti[k]})")
    return torsion_odd_even(C).modulus


def _abs_of(d: np.ndarray) -> np.ndarray:
    """``|d| = (d^* d)^{1/2}`` on the source space of a rectangular ``d``."""
    _, s, vh = np.linalg.svd(d, full_matrices=True)
    lam = np.zeros(d.shape[1])
    lam[: s.size] = s
    return (vh.conj().T * lam) @ vh


def l2_torsion_finite_group(K: FiniteGroupComplex) -> float:
    """``sum_k (-1)^k ln det^FKL |d_k|`` over the group von Neumann algebra
    (regular representation, trace weight ``1/|G|``)."""
    C = K.regular_pushforward()
    diag = validate_complex(C)
    if not diag.acyclic:
        k = next(i for i, b in enumerate(diag.betti) if b)
        raise DomainError(f"complex is not weakly acyclic in degree {k}; torsion undefined")
    w = 1.0 / K.group.order
    total = 0.0
    for k in range(1, C.length + 1):
        d = C.d(k)
        if d.size == 0:
            continue
        # degree k algebra: M_{dims_k}(N(G)), one block of size dims_k |G|
        A = FiniteDimAlgebra((d.shape[1],), (w,))
        total += (-1) ** k * log_fkl_det(A, AlgebraElement([_abs_of(d)]))
    return float(total)


@dataclass(frozen=True, eq=False)
class LaurentComplex(GroupRingComplex):
    """Complex over C[Z^d]; ``differentials[k-1][r][c]`` is a LaurentPolynomial."""

    d: int
    dims: tuple
    differentials: tuple

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        diffs = []
        for k, m in enumerate(self.differentials, start=1):
            rows = [tuple(self._poly(e) for e in row) for row in m]
            if len(rows) != dims[k - 1] or any(len(r) != dims[k] for r in rows):
                raise StructuralError(f"d_{k} must be {dims[k - 1]} x {dims[k]}")
            diffs.append(tuple(rows))
        if len(diffs) != len(dims) - 1:
            raise StructuralError(f"{len(dims)} chain groups need {len(dims) - 1} differentials")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "differentials", tuple(diffs))
        for k in range(2, len(dims)):
            a, b = diffs[k - 2], diffs[k - 1]
            for i in range(dims[k - 2]):
                for j in range(dims[k]):
                    acc = LaurentPolynomial(self.d, {})
                    for l in range(dims[k - 1]):
                        acc = acc + a[i][l] * b[l][j]
                    if any(abs(c) > 1e-12 for c in acc.terms.values()):
                        raise StructuralError(f"d_{k - 1} d_{k} != 0 over the Laurent ring")

    def _poly(self, e):
        if isinstance(e, LaurentPolynomial):
            if e.d != self.d:
                raise StructuralError("entry has the wrong number of variables")
            return e
        return LaurentPolynomial.constant(e, self.d) if e != 0 else LaurentPolynomial(self.d, {})

    def fibers(self, k: int, angles: np.ndarray) -> np.ndarray:
        """``d_k`` evaluated at ``exp(2 pi i angles)``; shape ``(N, dims[k-1], dims[k])``."""
        n = angles.shape[0]
        out = np.zeros((n, self.dims[k - 1], self.dims[k]), dtype=complex)
        for r, row in enumerate(self.differentials[k - 1]):
            for c, p in enumerate(row):
                if not p.is_zero():
                    out[:, r, c] = p.on_torus(angles)
        return out


@dataclass(frozen=True)
class L2Result:
    value: float
    error_estimate: float
    evaluations: int
    seed: int = 0
    trace: tuple = field(default=(), compare=False)

    def to_json(self):
        return {"value": self.value, "error_estimate": self.error_estimate,
                "evaluations": self.evaluations, "seed": self.seed,
                "refinements": [{"panels": p, "evaluations": n, "value": v} for p, n, v in self.trace]}


FIBER_CHUNK = 1 << 15


def _fiber_logdets(K: LaurentComplex, angles: np.ndarray, expected=None):
    """Per point ``sum_k (-1)^k 1/2 ln det'(d_k^* d_k)`` and the fiber ranks."""
    total = np.zeros(angles.shape[0])
    ranks = []
    for k in range(1, len(K.dims)):
        if K.dims[k] == 0 or K.dims[k - 1] == 0:
            ranks.append(np.zeros(angles.shape[0], dtype=int))
            continue
        f = K.fibers(k, angles)
        g = np.conj(np.swapaxes(f, 1, 2)) @ f
        lam = np.linalg.eigvalsh(g)
        theta = RANK_RTOL * lam[:, -1:] * K.dims[k]
        keep = lam > theta
        ranks.append(keep.sum(axis=1))
        with np.errstate(divide="ignore"):
            total += (-1) ** k * 0.5 * np.where(keep, np.log(np.where(keep, lam, 1.0)), 0.0).sum(axis=1)
    return total, ranks


def _check_fiber_ranks(K: LaurentComplex, ranks, expected):
    for k, r in enumerate(ranks, start=1):
        if np.any(r != expected[k - 1]):
            raise DomainError(f"fiber rank of d_{k} is not constant on the torus grid")
    dims = K.dims
    for i in range(len(dims)):
        rin = expected[i - 1] if i >= 1 else 0
        rout = expected[i] if i < len(expected) else 0
        if rin + rout != dims[i]:
            raise DomainError(f"fibers are not exact in degree {i}: not weakly acyclic")


def l2_torsion_zd(K: LaurentComplex, tol: float = 1e-8, seed: int = 0,
                  budget: int = DEFAULT_BUDGET) -> L2Result:
    """L2-torsion over the group von Neumann algebra of Z^d via fiberwise
    determinants integrated over the torus."""
    d = K.d
    probe = np.random.default_rng([seed, 1]).random((16, d))
    _, r0 = _fiber_logdets(K, probe)
    expected = [int(r[0]) for r in r0]
    _check_fiber_ranks(K, r0, expected)

    def level(panels, shifts):
        axes = [gauss_panels(panels, s) for s in shifts]
        nodes = np.stack(np.meshgrid(*[a[0] for a in axes], indexing="ij"), axis=-1).reshape(-1, d)
        wts = axes[0][1]
        for a in axes[1:]:
            wts = np.multiply.outer(wts, a[1])
        wts = np.ravel(wts)
        total = 0.0
        for lo in range(0, nodes.shape[0], FIBER_CHUNK):
            vals, ranks = _fiber_logdets(K, nodes[lo:lo + FIBER_CHUNK])
            _check_fiber_ranks(K, ranks, expected)
            total += float(np.dot(wts[lo:lo + FIBER_CHUNK], vals))
        return total, nodes.shape[0]

    val, est, used, trace = refine_torus_integral(level, d, tol, seed, budget)
    return L2Result(float(val), float(est), used, seed, trace)
