"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel is run once to trigger compilation, then timed; results of
the two flavours are compared so a speedup never hides a discrepancy.
"""
import argparse
import time

import numpy as np

from ncdet import _kernels
from ncdet.algebra import symmetric_group
from ncdet.mahler import LaurentPolynomial, gauss_panels


def _best(fn, args, repeat):
    fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def torus_case(d, panels):
    rng = np.random.default_rng(0)
    terms = {tuple(rng.integers(-2, 3, size=d)): complex(*rng.standard_normal(2)) for _ in range(6)}
    p = LaurentPolynomial(d, terms)
    nodes, weights = gauss_panels(panels, 0.123)
    exps = p.exps.astype(float)
    powers = np.stack([np.exp(2j * np.pi * np.outer(exps[:, a], nodes)) for a in range(d)])
    return p.coeffs, powers, weights


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    G = symmetric_group(5)
    rng = np.random.default_rng(1)
    a = rng.standard_normal(G.order) + 1j * rng.standard_normal(G.order)
    b = rng.standard_normal(G.order) + 1j * rng.standard_normal(G.order)
    triples = rng.integers(0, G.order, size=(200_000, 3))
    gens = np.array([0.5, 1 / 3, np.sqrt(2) / 7])

    cases = [
        ("torus_log_abs d=1 (2^16 nodes)", "torus_log_abs", torus_case(1, 1 << 13)),
        ("torus_log_abs d=2 (512^2 nodes)", "torus_log_abs", torus_case(2, 64)),
        ("torus_log_abs d=3 (64^3 nodes)", "torus_log_abs", torus_case(3, 8)),
        ("lattice_search k=3 bound=300", "lattice_search", (gens, 0.123, np.int64(300), 1e-9)),
        ("group_ring_mul S5", "group_ring_mul", (G.table, a, b)),
        ("regular_matrix S5", "regular_matrix", (G.table, a)),
        ("associativity_failures 2e5", "associativity_failures", (G.table, triples)),
    ]
    print(f"{'kernel':38s} {'numpy [s]':>11s} {'numba [s]':>11s} {'speedup':>8s}  agree")
    for label, name, case in cases:
        t_np, r_np = _best(getattr(_kernels, name + "_numpy"), case, args.repeat)
        t_nb, r_nb = _best(getattr(_kernels, name + "_numba"), case, args.repeat)
        if name == "torus_log_abs":
            agree = abs(np.sum(r_np) - np.sum(r_nb)) <= 1e-10 * max(1.0, abs(np.sum(r_np)))
        elif name == "lattice_search":
            agree = r_np[0] == r_nb[0] and np.array_equal(r_np[1], r_nb[1])
        else:
            agree = np.allclose(r_np, r_nb)
        print(f"{label:38s} {t_np:11.4f} {t_nb:11.4f} {t_np / t_nb:8.1f}  {agree}")


if __name__ == "__main__":
    main()
