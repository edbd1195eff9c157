"""Command-line front end: ``ncdet <command> FILE [options]``.

Every command reads one JSON file and writes one JSON document (sorted
keys, 15 significant digits). Exit codes: 0 ok, 2 malformed input,
3 mathematical domain error, 4 evaluation budget exhausted.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from . import serialization as ser
from .algebra import cyclic_group, regular_representation
from .errors import BudgetError, DomainError, StructuralError
from .fkdet import fk_det, fk_det_extended, fkl_det, singular_profile
from .mahler import DEFAULT_BUDGET, mahler_1d_exact, mahler_quadrature
from .pathdet import PATH_TOL, SampledPath, SegmentProduct, build_canonical_path, delta_tau
from .torsion import (FiniteGroupComplex, LaurentComplex, l2_torsion_finite_group, l2_torsion_zd,
                      ray_singer_check, ray_singer_first_line, reidemeister_torsion,
                      torsion_milnor, torsion_odd_even, validate_complex)

EXIT_OK, EXIT_PARSE, EXIT_DOMAIN, EXIT_BUDGET = 0, 2, 3, 4
EXACT = "exact-to-roundoff"
MIN_BUDGET = 1 << 10


@dataclass(frozen=True)
class RunConfig:
    tol: float = 1e-8
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    output: str | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise StructuralError(f"--tol must be positive, got {self.tol}")
        if not 0 <= self.seed < 1 << 64:
            raise StructuralError("--seed must be a 64-bit unsigned integer")
        if self.budget < MIN_BUDGET:
            raise StructuralError(f"--budget must be at least {MIN_BUDGET}")


def _element_input(doc):
    """``(algebra, element)`` from either an explicit algebra or a group-ring element."""
    if "group" in doc:
        G = ser.group_from_json(doc["group"])
        entry = doc.get("element", {})
        coeffs = {int(t["g"]): ser.parse_complex(t["coeff"]) for t in entry.get("terms", [])}
        return regular_representation(G, coeffs)
    A = ser.algebra_from_json(doc.get("algebra"))
    x = ser.element_from_json(doc.get("element"))
    A.check(x)
    return A, x


def cmd_fk_det(doc, cfg, args):
    A, x = _element_input(doc)
    if args.extended:
        mode, value = "extended", fk_det_extended(A, x)
    elif args.fkl:
        mode, value = "fkl", fkl_det(A, x)
    else:
        mode, value = "fk", fk_det(A, x)
    return {"mode": mode, "value": value, "error_estimate": EXACT,
            "profile": singular_profile(A, x).to_json()}


def cmd_mahler(doc, cfg, args):
    p = ser.polynomial_from_json(doc.get("polynomial", doc))
    q = mahler_quadrature(p, cfg.tol, cfg.seed, cfg.budget)
    out = {"quadrature": q.to_json(), "value": q.value, "error_estimate": q.error_estimate}
    if p.d == 1:
        out["jensen"] = {"value": mahler_1d_exact(p), "error_estimate": EXACT}
    return out


def cmd_path_det(doc, cfg, args):
    A = ser.algebra_from_json(doc.get("algebra"))
    if "path" in doc:
        path = ser.path_from_json(doc["path"])
        x = path.end
        A.check(x)
        kind = "sampled" if isinstance(path, SampledPath) else "segments"
    else:
        x = ser.element_from_json(doc.get("element"))
        A.check(x)
        path = build_canonical_path(A, x)
        kind = "canonical"
    if not path.start.allclose(A.identity(), 1e-9):
        raise DomainError("path must start at the identity")
    tol = min(cfg.tol, PATH_TOL) if kind != "sampled" else cfg.tol
    val = delta_tau(A, x, path, tol)
    out = {"path": kind, "delta_tilde": val.representative, "lattice": list(val.lattice.generators),
           "fk_det": val.modulus(), "closed": path.is_closed(),
           "error_estimate": EXACT if kind == "sampled" else tol}
    if isinstance(path, SegmentProduct):
        out["closed_form"] = path.closed_form(A)
    try:
        out["exp_2pi_i"] = val.exp_2pi_i()
    except DomainError:
        pass
    return out


def cmd_torsion(doc, cfg, args):
    if args.mode == "reidemeister":
        K = ser.group_ring_complex_from_json(doc)
        if not isinstance(K, FiniteGroupComplex):
            raise StructuralError("reidemeister mode needs a finite-group complex")
        rep = np.array([ser.matrix_from_json(m) for m in doc.get("representation", [])])
        return {"mode": "reidemeister", "value": reidemeister_torsion(K, rep), "error_estimate": EXACT}
    C = ser.chain_complex_from_json(doc)
    diag = validate_complex(C)
    out = {"mode": args.mode, "diagnostics": diag.to_json(), "error_estimate": EXACT}
    if args.mode == "oddeven":
        out["torsion"] = torsion_odd_even(C).to_json()
    elif args.mode == "milnor":
        out["torsion"] = torsion_milnor(C).to_json()
    else:
        lap, logmod = ray_singer_check(C)
        out.update({"laplacian_expression": lap, "log_modulus": logmod,
                    "first_line": ray_singer_first_line(C), "sum": lap + logmod})
    return out


def cmd_l2(doc, cfg, args):
    if "group" in doc or "d" in doc:
        K = ser.group_ring_complex_from_json(doc)
    else:
        C = ser.chain_complex_from_json(doc)
        K = FiniteGroupComplex(cyclic_group(1), C.dims, tuple(d[..., None] for d in C.differentials))
    if isinstance(K, LaurentComplex):
        r = l2_torsion_zd(K, cfg.tol, cfg.seed, cfg.budget)
        return {"value": r.value, "error_estimate": r.error_estimate, "quadrature": r.to_json()}
    return {"value": l2_torsion_finite_group(K), "error_estimate": EXACT}


COMMANDS = {"fk-det": cmd_fk_det, "mahler": cmd_mahler, "path-det": cmd_path_det,
            "torsion": cmd_torsion, "l2": cmd_l2}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="JSON input file")
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="evaluation cap")
    common.add_argument("--output", help="write JSON here instead of stdout")

    parser = argparse.ArgumentParser(prog="ncdet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    fk = sub.add_parser("fk-det", parents=[common], help="Fuglede-Kadison determinant of an element")
    g = fk.add_mutually_exclusive_group()
    g.add_argument("--extended", action="store_true", help="analytic extension (0 on singular input)")
    g.add_argument("--fkl", action="store_true", help="ignore the kernel")
    sub.add_parser("mahler", parents=[common], help="Mahler measure of a Laurent polynomial")
    sub.add_parser("path-det", parents=[common], help="path-integral determinant modulo the trace lattice")
    t = sub.add_parser("torsion", parents=[common], help="torsion of a based chain complex")
    t.add_argument("--mode", choices=["oddeven", "milnor", "rayser", "reidemeister"], default="oddeven")
    sub.add_parser("l2", parents=[common], help="L2-torsion of a group-ring complex")
    return parser


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_PARSE
    _kernels.configure_threads()
    out_path = args.output
    try:
        cfg = RunConfig(args.tol, args.seed, args.budget, args.output)
        doc = ser.load(args.file)
        result = COMMANDS[args.command](doc, cfg, args)
    except BudgetError as exc:
        _report(args, "budget", exc, {"last_values": list(exc.last_values)})
        return EXIT_BUDGET
    except (StructuralError, OSError, KeyError, TypeError) as exc:
        _report(args, "parse", exc)
        return EXIT_PARSE
    except DomainError as exc:
        _report(args, "domain", exc)
        return EXIT_DOMAIN
    config = {k: v for k, v in asdict(cfg).items() if k != "output"}
    config.update({"command": args.command, "file": args.file, "numba": _kernels.USE_NUMBA})
    for flag in ("mode", "extended", "fkl"):
        if hasattr(args, flag):
            config[flag] = getattr(args, flag)
    _emit(ser.dumps({"config": config, "result": result}), out_path)
    return EXIT_OK


def _report(args, kind, exc, extra=None):
    body = {"error": kind, "message": str(exc), "command": args.command}
    if extra:
        body.update(extra)
    sys.stderr.write(json.dumps(ser.to_plain(body), sort_keys=True) + "\n")


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
