"""Finite-dimensional traced *-algebras.

An algebra is a block direct sum of full matrix algebras M_{n_j}(C); the
trace is ``tau(x) = sum_j w_j Tr(x_j)``. Choosing ``w_j = 1/n`` on a single
block gives the normalised trace of M_n(C), ``w_j = 1`` the usual matrix
trace; the caller picks.

Finite groups enter through the left-regular representation, which turns a
group-ring element into a single |G| x |G| block with weight ``1/|G|``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import DomainError, StructuralError

EPS = np.finfo(float).eps
HERMITIAN_RTOL = 1e-10


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FiniteDimAlgebra:
    block_sizes: tuple
    trace_weights: tuple

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.block_sizes)
        weights = tuple(float(w) for w in self.trace_weights)
        if not sizes or len(sizes) != len(weights):
            raise StructuralError("need one trace weight per block, at least one block")
        if any(n < 1 for n in sizes):
            raise StructuralError(f"block sizes must be positive, got {sizes}")
        if any(not (w > 0 and np.isfinite(w)) for w in weights):
            raise StructuralError(f"trace weights must be finite and positive, got {weights}")
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "trace_weights", weights)

    @property
    def tau_one(self) -> float:
        return sum(w * n for w, n in zip(self.trace_weights, self.block_sizes))

    @property
    def normalized(self) -> bool:
        return abs(self.tau_one - 1.0) <= 1e-12

    @property
    def dim(self) -> int:
        """Total matrix size, sum of the block sizes."""
        return sum(self.block_sizes)

    def check(self, x: AlgebraElement) -> None:
        if len(x.blocks) != len(self.block_sizes):
            raise StructuralError(
                f"element has {len(x.blocks)} blocks, algebra has {len(self.block_sizes)}")
        for j, (b, n) in enumerate(zip(x.blocks, self.block_sizes)):
            if b.shape != (n, n):
                raise StructuralError(f"block {j} has shape {b.shape}, expected {(n, n)}")

    def identity(self) -> AlgebraElement:
        return AlgebraElement([np.eye(n) for n in self.block_sizes])

    def zero(self) -> AlgebraElement:
        return AlgebraElement([np.zeros((n, n)) for n in self.block_sizes])

    def scalar(self, lam: complex) -> AlgebraElement:
        return AlgebraElement([lam * np.eye(n) for n in self.block_sizes])

    def amplify(self, k: int) -> FiniteDimAlgebra:
        """M_k of this algebra, with the trace extended by summing diagonal entries."""
        return FiniteDimAlgebra(tuple(k * n for n in self.block_sizes), self.trace_weights)

    def random_element(self, rng: np.random.Generator) -> AlgebraElement:
        return AlgebraElement([rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
                               for n in self.block_sizes])


def matrix_algebra(n: int, normalized: bool = True) -> FiniteDimAlgebra:
    """M_n(C) with weight ``1/n`` (``tau(1) = 1``) or ``1`` (``tau(1_n) = n``)."""
    return FiniteDimAlgebra((n,), (1.0 / n if normalized else 1.0,))


class AlgebraElement:
    """Tuple of square complex blocks; immutable."""

    __slots__ = ("blocks",)

    def __init__(self, blocks: Sequence):
        bl = tuple(_frozen(b) for b in blocks)
        for j, b in enumerate(bl):
            if b.ndim != 2 or b.shape[0] != b.shape[1]:
                raise StructuralError(f"block {j} is not a square matrix: shape {b.shape}")
        object.__setattr__(self, "blocks", bl)

    def __setattr__(self, name, value):
        raise AttributeError("AlgebraElement is immutable")

    def __repr__(self):
        return f"AlgebraElement(shapes={[b.shape[0] for b in self.blocks]})"

    def _same_shape(self, other: AlgebraElement):
        if len(self.blocks) != len(other.blocks) or any(
                a.shape != b.shape for a, b in zip(self.blocks, other.blocks)):
            raise StructuralError("elements live in differently shaped algebras")

    def __add__(self, other):
        self._same_shape(other)
        return AlgebraElement([a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other):
        self._same_shape(other)
        return AlgebraElement([a - b for a, b in zip(self.blocks, other.blocks)])

    def __neg__(self):
        return AlgebraElement([-a for a in self.blocks])

    def __matmul__(self, other):
        self._same_shape(other)
        return AlgebraElement([a @ b for a, b in zip(self.blocks, other.blocks)])

    def __mul__(self, other):
        if isinstance(other, AlgebraElement):
            return self @ other
        return AlgebraElement([other * a for a in self.blocks])

    def __rmul__(self, other):
        return AlgebraElement([other * a for a in self.blocks])

    def adjoint(self) -> AlgebraElement:
        return AlgebraElement([a.conj().T for a in self.blocks])

    def inverse(self) -> AlgebraElement:
        out = []
        for j, a in enumerate(self.blocks):
            cond = np.linalg.cond(a)
            if not np.isfinite(cond) or cond >= 1.0 / EPS:
                raise DomainError(f"block {j} is singular (condition estimate {cond:.3g})")
            out.append(np.linalg.inv(a))
        return AlgebraElement(out)

    def norm(self) -> float:
        """Largest operator norm over the blocks."""
        return max(np.linalg.norm(a, 2) for a in self.blocks)

    def allclose(self, other: AlgebraElement, atol: float = 1e-12) -> bool:
        self._same_shape(other)
        return all(np.allclose(a, b, rtol=0, atol=atol) for a, b in zip(self.blocks, other.blocks))

    def direct_sum(self, other: AlgebraElement) -> AlgebraElement:
        """Blockwise ``diag(x_j, y_j)``: the element x (+) y of M_2 of the algebra."""
        if len(self.blocks) != len(other.blocks):
            raise StructuralError("direct sum needs the same number of blocks")
        return AlgebraElement([scipy.linalg.block_diag(a, b) for a, b in zip(self.blocks, other.blocks)])


def trace(A: FiniteDimAlgebra, x: AlgebraElement) -> complex:
    A.check(x)
    return complex(sum(w * np.trace(b) for w, b in zip(A.trace_weights, x.blocks)))


def block_trace_unweighted(x: AlgebraElement) -> list:
    return [complex(np.trace(b)) for b in x.blocks]


# ---------------------------------------------------------------------------
# finite groups


@dataclass(frozen=True, eq=False)
class FiniteGroupSpec:
    """Finite group given by its multiplication table ``table[g, h] = g*h``."""

    order: int
    multiplication_table: np.ndarray
    identity_index: int = 0
    seed: int = 0

    def __post_init__(self):
        n = int(self.order)
        table = np.asarray(self.multiplication_table)
        if table.shape != (n, n) or n < 1:
            raise StructuralError(f"table must be {n}x{n}, got shape {table.shape}")
        if not np.issubdtype(table.dtype, np.integer):
            if not np.all(table == np.round(table)):
                raise StructuralError("table entries must be integers")
        table = np.ascontiguousarray(table, dtype=np.int64)
        if table.min() < 0 or table.max() >= n:
            raise StructuralError("table entries out of range")
        perm = np.arange(n)
        if not (np.all(np.sort(table, axis=1) == perm) and np.all(np.sort(table, axis=0) == perm[:, None])):
            raise StructuralError("table rows and columns must be permutations")
        e = int(self.identity_index)
        if not (np.all(table[e] == perm) and np.all(table[:, e] == perm)):
            raise StructuralError(f"element {e} is not a two-sided identity")
        if n <= 64:
            triples = np.stack(np.meshgrid(perm, perm, perm, indexing="ij"), axis=-1).reshape(-1, 3)
        else:
            rng = np.random.default_rng(self.seed)
            triples = rng.integers(0, n, size=(10_000, 3))
        bad = _kernels.associativity_failures(table, np.ascontiguousarray(triples, dtype=np.int64))
        if bad:
            raise StructuralError(f"table is not associative ({bad} failing triples)")
        table.setflags(write=False)
        object.__setattr__(self, "order", n)
        object.__setattr__(self, "identity_index", e)
        object.__setattr__(self, "multiplication_table", table)
        inv = np.argmax(table == e, axis=1)
        inv.setflags(write=False)
        object.__setattr__(self, "_inverse", inv)

    @property
    def table(self) -> np.ndarray:
        return self.multiplication_table

    def inverse(self, g: int) -> int:
        return int(self._inverse[g])

    def mul(self, g: int, h: int) -> int:
        return int(self.multiplication_table[g, h])


def cyclic_group(n: int) -> FiniteGroupSpec:
    """Z/nZ with element ``k`` standing for ``g**k``."""
    k = np.arange(n)
    return FiniteGroupSpec(n, (k[:, None] + k[None, :]) % n, 0)


def permutation_group(perms: Sequence[Sequence[int]]) -> FiniteGroupSpec:
    """Group from an explicit list of permutations closed under composition.

    The first permutation must be the identity; ``(p*q)(i) = p(q(i))``.
    """
    perms = [tuple(p) for p in perms]
    index = {p: i for i, p in enumerate(perms)}
    n = len(perms)
    table = np.empty((n, n), dtype=np.int64)
    for i, p in enumerate(perms):
        for j, q in enumerate(perms):
            comp = tuple(p[q[k]] for k in range(len(q)))
            if comp not in index:
                raise StructuralError("permutations are not closed under composition")
            table[i, j] = index[comp]
    return FiniteGroupSpec(n, table, 0)


def symmetric_group(k: int) -> FiniteGroupSpec:
    from itertools import permutations

    return permutation_group(list(permutations(range(k))))


def group_ring_vector(G: FiniteGroupSpec, coeffs: Mapping[int, complex]) -> np.ndarray:
    v = np.zeros(G.order, dtype=complex)
    for g, c in coeffs.items():
        g = int(g)
        if not 0 <= g < G.order:
            raise StructuralError(f"group index {g} out of range for order {G.order}")
        v[g] += complex(c)
    return v


def left_regular_matrix(G: FiniteGroupSpec, coeffs) -> np.ndarray:
    """Matrix of ``sum_g z_g lambda(g)`` on l^2(G) in the basis delta_x."""
    if isinstance(coeffs, Mapping):
        coeffs = group_ring_vector(G, coeffs)
    return _kernels.regular_matrix(G.table, np.ascontiguousarray(coeffs, dtype=complex))


def regular_representation(G: FiniteGroupSpec, coeffs: Mapping[int, complex]):
    """Return ``(A, x)``: the single-block algebra of size |G| with weight
    ``1/|G|`` and the image of the group-ring element under lambda.

    With this weight ``trace(A, x)`` is the coefficient of the identity.
    """
    A = FiniteDimAlgebra((G.order,), (1.0 / G.order,))
    return A, AlgebraElement([left_regular_matrix(G, coeffs)])


# ---------------------------------------------------------------------------
# functional calculus, exp and log


def is_hermitian(x: AlgebraElement, rtol: float = HERMITIAN_RTOL) -> bool:
    scale = x.norm()
    return all(np.linalg.norm(b - b.conj().T, 2) <= rtol * scale for b in x.blocks)


def functional_calculus_hermitian(x: AlgebraElement, f: Callable) -> AlgebraElement:
    """``U f(L) U*`` blockwise from ``x = U L U*``.

    ``f`` is applied to the real eigenvalue array; a non-finite result at
    any eigenvalue is reported as a domain error.
    """
    if not is_hermitian(x):
        raise DomainError("functional calculus needs a hermitian element")
    out = []
    for j, b in enumerate(x.blocks):
        lam, u = np.linalg.eigh((b + b.conj().T) / 2)
        with np.errstate(all="ignore"):
            fl = np.asarray(f(lam), dtype=complex)
        if fl.shape != lam.shape or not np.all(np.isfinite(fl)):
            raise DomainError(f"function undefined on the spectrum of block {j}: {lam}")
        out.append((u * fl) @ u.conj().T)
    return AlgebraElement(out)


def matrix_exp(y: AlgebraElement) -> AlgebraElement:
    return AlgebraElement([scipy.linalg.expm(b) for b in y.blocks])


def _log_branch(b: np.ndarray, j: int) -> str:
    n = b.shape[0]
    if np.linalg.norm(b - np.eye(n), 2) < 1.0:
        return "series"
    lam, v = np.linalg.eig(b)
    scale = max(np.abs(lam).max(), 1.0)
    on_axis = (np.abs(lam.imag) <= 1e-12 * scale) & (lam.real <= 1e-14 * scale)
    if on_axis.any():
        raise DomainError(
            f"block {j}: series branch fails (||x-1|| >= 1) and spectral branch fails "
            f"(eigenvalue {lam[on_axis][0]:.3g} on the closed negative real axis)")
    if np.linalg.cond(v) > 1e10:
        raise DomainError(
            f"block {j}: series branch fails (||x-1|| >= 1) and spectral branch fails "
            "(matrix is not diagonalizable to working precision)")
    return "spectral"


def matrix_log_principal(x: AlgebraElement) -> AlgebraElement:
    """Principal logarithm, blockwise.

    Each block must be within distance 1 of the identity (where the
    principal log is the power series) or be diagonalizable with no
    eigenvalue on the closed negative real axis.
    """
    out = []
    for j, b in enumerate(x.blocks):
        _log_branch(b, j)
        out.append(scipy.linalg.logm(b))
    return AlgebraElement(out)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
