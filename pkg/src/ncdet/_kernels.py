"""Hot inner loops, each in a numba and a pure-numpy flavour.

Both flavours are always importable (``*_numba`` / ``*_numpy``); the
unsuffixed names dispatch to numba unless the environment variable
``NCDET_DISABLE_NUMBA`` is set to a truthy value or numba is missing.

Reductions are split into fixed tiles whose partial sums are combined
serially, so results do not depend on the number of threads.
"""
import os

import numpy as np

try:
    import numba
    from numba import njit, prange

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the bundled TBB is too old on some hosts and numba warns on every import
        numba.config.THREADING_LAYER = "workqueue"

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_FLAG = os.environ.get("NCDET_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")

# target number of complex evaluations per tile
TILE_POINTS = 1 << 16


def configure_threads():
    """Cap numba's thread pool by ``NCDET_THREADS`` when it is set."""
    cap = os.environ.get("NCDET_THREADS")
    if not (HAVE_NUMBA and cap):
        return
    n = max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)


def tile_rows(d, n):
    """Number of first-axis nodes per tile for a ``d``-dimensional grid of side ``n``."""
    rest = n ** (d - 1)
    return max(1, TILE_POINTS // rest)


# ---------------------------------------------------------------------------
# weighted mean of log|p| on a tensor grid of the torus


def torus_log_abs_numpy(coeffs, powers, weights):
    """Per-tile sums of ``w * ln|p|`` over a tensor grid.

    ``powers[a, t, i]`` is ``z_a(i) ** e_{t,a}`` for axis ``a``, term ``t``
    and node ``i``; ``weights`` are the (shared) per-axis node weights.
    """
    d, m, n = powers.shape
    rows = tile_rows(d, n)
    ntiles = -(-n // rows)
    out = np.zeros(ntiles)
    for k in range(ntiles):
        lo, hi = k * rows, min(n, (k + 1) * rows)
        x = coeffs[:, None] * powers[0][:, lo:hi]
        w = weights[lo:hi]
        for a in range(1, d):
            x = x[..., None] * powers[a].reshape((m,) + (1,) * a + (n,))
            w = w[..., None] * weights.reshape((1,) * a + (n,))
        vals = x.sum(axis=0)
        with np.errstate(divide="ignore"):
            out[k] = np.sum(w * np.log(np.abs(vals)))
    return out


if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def torus_log_abs_numba(coeffs, powers, weights):
        d, m, n = powers.shape
        rest = 1
        for _ in range(d - 1):
            rest *= n
        rows = max(1, (1 << 16) // rest)
        ntiles = (n + rows - 1) // rows
        out = np.zeros(ntiles)
        for k in prange(ntiles):
            # odometer over axes 1..d-2; prod[a] holds the term products through axis a
            prod = np.empty((d, m), dtype=np.complex128)
            wprod = np.empty(d)
            idx = np.zeros(d, dtype=np.int64)
            vals = np.empty(max(n, rows), dtype=np.complex128)
            acc = 0.0
            lo, hi = k * rows, min(n, (k + 1) * rows)
            if d == 1:
                vals[: hi - lo] = 0j
                for t in range(m):
                    c = coeffs[t]
                    for i in range(lo, hi):
                        vals[i - lo] += c * powers[0, t, i]
                for i in range(lo, hi):
                    v = vals[i - lo]
                    acc += weights[i] * 0.5 * np.log(v.real * v.real + v.imag * v.imag)
                out[k] = acc
                continue
            for i0 in range(lo, hi):
                for t in range(m):
                    prod[0, t] = coeffs[t] * powers[0, t, i0]
                wprod[0] = weights[i0]
                for a in range(1, d - 1):
                    idx[a] = 0
                for r in range(rest // n):
                    # partial products for the current odometer position
                    for a in range(1, d - 1):
                        for t in range(m):
                            prod[a, t] = prod[a - 1, t] * powers[a, t, idx[a]]
                        wprod[a] = wprod[a - 1] * weights[idx[a]]
                    vals[:] = 0j
                    for t in range(m):
                        c = prod[d - 2, t]
                        for i in range(n):
                            vals[i] += c * powers[d - 1, t, i]
                    inner = 0.0
                    for i in range(n):
                        v = vals[i]
                        inner += weights[i] * 0.5 * np.log(v.real * v.real + v.imag * v.imag)
                    acc += wprod[d - 2] * inner
                    a = d - 2
                    while a >= 1:
                        idx[a] += 1
                        if idx[a] < n:
                            break
                        idx[a] = 0
                        a -= 1
            out[k] = acc
        return out

else:  # pragma: no cover
    torus_log_abs_numba = torus_log_abs_numpy


# ---------------------------------------------------------------------------
# bounded integer search for lattice membership


def lattice_search_numpy(gens, target, bound, tol):
    """Minimal-l1 integer vector ``c`` with ``|target - c.gens| <= tol``.

    Free coefficients range over ``[-bound, bound]``; the last one is
    solved by rounding. Returns ``(found, witness, residual)``.
    """
    k = gens.shape[0]
    axes = [np.arange(-bound, bound + 1, dtype=np.int64)] * (k - 1)
    if k > 1:
        grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    else:
        grid = np.zeros((1, 0), dtype=np.int64)
    partial = grid @ gens[:-1] if k > 1 else np.zeros(1)
    last = np.rint((target - partial) / gens[-1])
    resid = np.abs(target - partial - last * gens[-1])
    ok = (np.abs(last) <= bound) & (resid <= tol)
    if not ok.any():
        return False, np.zeros(k, dtype=np.int64), np.inf
    cand = np.concatenate([grid, last[:, None].astype(np.int64)], axis=1)
    norms = np.abs(cand).sum(axis=1)
    norms = np.where(ok, norms, np.iinfo(np.int64).max)
    best = int(np.argmin(norms))
    return True, cand[best], float(resid[best])


if HAVE_NUMBA:

    @njit(cache=True)
    def lattice_search_numba(gens, target, bound, tol):
        k = gens.shape[0]
        free = k - 1
        span = 2 * bound + 1
        total = 1
        for _ in range(free):
            total *= span
        best = np.zeros(k, dtype=np.int64)
        cur = np.zeros(k, dtype=np.int64)
        best_norm = -1
        best_res = np.inf
        for r in range(total):
            rr = r
            partial = 0.0
            norm = 0
            for a in range(free - 1, -1, -1):
                c = rr % span - bound
                rr //= span
                cur[a] = c
                partial += c * gens[a]
                norm += abs(c)
            last = np.rint((target - partial) / gens[k - 1])
            if abs(last) > bound:
                continue
            res = abs(target - partial - last * gens[k - 1])
            if res > tol:
                continue
            norm += int(abs(last))
            if best_norm < 0 or norm < best_norm:
                best_norm = norm
                best_res = res
                for a in range(free):
                    best[a] = cur[a]
                best[k - 1] = int(last)
        return best_norm >= 0, best, best_res

else:  # pragma: no cover
    lattice_search_numba = lattice_search_numpy


# ---------------------------------------------------------------------------
# finite group tables


def group_ring_mul_numpy(table, a, b):
    """Product in C[G]: ``out[g*h] += a[g] * b[h]``."""
    n = table.shape[0]
    prod = np.outer(a, b).ravel()
    flat = table.ravel()
    return (np.bincount(flat, weights=prod.real, minlength=n)
            + 1j * np.bincount(flat, weights=prod.imag, minlength=n))


def regular_matrix_numpy(table, coeffs):
    """Matrix of ``sum_g coeffs[g] lambda(g)``, with ``lambda(g) delta_x = delta_{gx}``."""
    n = table.shape[0]
    out = np.zeros((n, n), dtype=complex)
    cols = np.broadcast_to(np.arange(n), (n, n))
    np.add.at(out, (table, cols), np.broadcast_to(coeffs[:, None], (n, n)))
    return out


def associativity_failures_numpy(table, triples):
    a, b, c = triples[:, 0], triples[:, 1], triples[:, 2]
    return int(np.count_nonzero(table[table[a, b], c] != table[a, table[b, c]]))


if HAVE_NUMBA:

    @njit(cache=True)
    def group_ring_mul_numba(table, a, b):
        n = table.shape[0]
        out = np.zeros(n, dtype=np.complex128)
        for g in range(n):
            if a[g] == 0:
                continue
            for h in range(n):
                out[table[g, h]] += a[g] * b[h]
        return out

    @njit(cache=True)
    def regular_matrix_numba(table, coeffs):
        n = table.shape[0]
        out = np.zeros((n, n), dtype=np.complex128)
        for g in range(n):
            if coeffs[g] == 0:
                continue
            for x in range(n):
                out[table[g, x], x] += coeffs[g]
        return out

    @njit(cache=True)
    def associativity_failures_numba(table, triples):
        bad = 0
        for r in range(triples.shape[0]):
            a, b, c = triples[r, 0], triples[r, 1], triples[r, 2]
            if table[table[a, b], c] != table[a, table[b, c]]:
                bad += 1
        return bad

else:  # pragma: no cover
    group_ring_mul_numba = group_ring_mul_numpy
    regular_matrix_numba = regular_matrix_numpy
    associativity_failures_numba = associativity_failures_numpy


if USE_NUMBA:
    torus_log_abs = torus_log_abs_numba
    lattice_search = lattice_search_numba
    group_ring_mul = group_ring_mul_numba
    regular_matrix = regular_matrix_numba
    associativity_failures = associativity_failures_numba
else:
    torus_log_abs = torus_log_abs_numpy
    lattice_search = lattice_search_numpy
    group_ring_mul = group_ring_mul_numpy
    regular_matrix = regular_matrix_numpy
    associativity_failures = associativity_failures_numpy
