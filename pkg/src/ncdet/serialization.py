"""JSON interchange for algebras, elements, groups, polynomials, paths and complexes.

Complex numbers are two-element ``[re, im]`` arrays; plain numbers are
accepted on input as real entries.
"""
from __future__ import annotations

import json
import math

import numpy as np

from .algebra import AlgebraElement, FiniteDimAlgebra, FiniteGroupSpec
from .errors import StructuralError
from .mahler import LaurentPolynomial
from .pathdet import SampledPath, SegmentProduct
from .torsion import BasedChainComplex, FiniteGroupComplex, LaurentComplex


def parse_complex(v) -> complex:
    if isinstance(v, bool):
        raise StructuralError(f"not a number: {v!r}")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in v):
        return complex(v[0], v[1])
    raise StructuralError(f"expected a number or [re, im], got {v!r}")


def complex_to_json(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _need(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise StructuralError(f"{where}: missing key {key!r}")
    return obj[key]


def matrix_from_json(rows) -> np.ndarray:
    if not isinstance(rows, list) or any(not isinstance(r, list) for r in rows):
        raise StructuralError("matrix must be a list of rows")
    if not rows:
        return np.zeros((0, 0), dtype=complex)
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise StructuralError("matrix rows have different lengths")
    return np.array([[parse_complex(v) for v in r] for r in rows], dtype=complex).reshape(len(rows), width)


def matrix_to_json(m) -> list:
    return [[complex_to_json(v) for v in row] for row in np.asarray(m)]


def algebra_from_json(obj) -> FiniteDimAlgebra:
    sizes = _need(obj, "block_sizes", "algebra")
    weights = _need(obj, "trace_weights", "algebra")
    return FiniteDimAlgebra(tuple(sizes), tuple(weights))


def algebra_to_json(A: FiniteDimAlgebra) -> dict:
    return {"block_sizes": list(A.block_sizes), "trace_weights": list(A.trace_weights)}


def element_from_json(obj) -> AlgebraElement:
    blocks = _need(obj, "blocks", "element")
    if not isinstance(blocks, list) or not blocks:
        raise StructuralError("element needs a nonempty list of blocks")
    return AlgebraElement([matrix_from_json(b) for b in blocks])


def element_to_json(x: AlgebraElement) -> dict:
    return {"blocks": [matrix_to_json(b) for b in x.blocks]}


def group_from_json(obj) -> FiniteGroupSpec:
    order = _need(obj, "order", "group")
    table = _need(obj, "table", "group")
    return FiniteGroupSpec(int(order), np.array(table), int(obj.get("identity", 0)))


def group_to_json(G: FiniteGroupSpec) -> dict:
    return {"order": G.order, "table": G.table.tolist(), "identity": G.identity_index}


def polynomial_from_json(obj) -> LaurentPolynomial:
    d = int(_need(obj, "d", "polynomial"))
    terms = {}
    for t in _need(obj, "terms", "polynomial"):
        exp = tuple(int(e) for e in _need(t, "exp", "term"))
        if len(exp) != d:
            raise StructuralError(f"exponent {list(exp)} has length {len(exp)}, expected {d}")
        terms[exp] = terms.get(exp, 0) + parse_complex(_need(t, "coeff", "term"))
    return LaurentPolynomial(d, terms)


def polynomial_to_json(p: LaurentPolynomial) -> dict:
    return {"d": p.d, "terms": [{"exp": list(e), "coeff": complex_to_json(c)} for e, c in p.terms.items()]}


def path_from_json(obj):
    if isinstance(obj, dict) and "segments" in obj:
        return SegmentProduct([element_from_json(s) for s in obj["segments"]])
    if isinstance(obj, dict) and "grid" in obj:
        grid = [float(a) for a in obj["grid"]]
        values = [element_from_json(v) for v in _need(obj, "values", "path")]
        return SampledPath(tuple(grid), tuple(values))
    raise StructuralError("path needs either 'segments' or 'grid' and 'values'")


def path_to_json(path) -> dict:
    if isinstance(path, SegmentProduct):
        return {"segments": [element_to_json(f) for f in path.factors]}
    if isinstance(path, SampledPath):
        return {"grid": list(path.grid), "values": [element_to_json(v) for v in path.values]}
    raise StructuralError(f"cannot serialize {type(path).__name__}")


def _plain_matrix(m):
    # a complex differential may also be given in element form with a single block
    if isinstance(m, dict):
        blocks = _need(m, "blocks", "differential")
        if len(blocks) != 1:
            raise StructuralError("a differential is a single matrix")
        m = blocks[0]
    return matrix_from_json(m)


def chain_complex_from_json(obj) -> BasedChainComplex:
    dims = [int(n) for n in _need(obj, "dims", "complex")]
    diffs = []
    for k, m in enumerate(_need(obj, "differentials", "complex"), start=1):
        a = _plain_matrix(m)
        if k < len(dims) and a.size == 0:
            a = np.zeros((dims[k - 1], dims[k]), dtype=complex)
        diffs.append(a)
    h = obj.get("homology_bases")
    if h is not None:
        h = [None if b is None else _plain_matrix(b) for b in h]
    return BasedChainComplex(tuple(dims), tuple(diffs), None if h is None else tuple(h))


def chain_complex_to_json(C: BasedChainComplex) -> dict:
    return {"dims": list(C.dims), "differentials": [matrix_to_json(d) for d in C.differentials]}


def _group_entry(e, order, identity):
    v = np.zeros(order, dtype=complex)
    if isinstance(e, dict):
        for t in _need(e, "terms", "group-ring entry"):
            g = int(_need(t, "g", "term"))
            if not 0 <= g < order:
                raise StructuralError(f"group index {g} out of range")
            v[g] += parse_complex(_need(t, "coeff", "term"))
    else:
        v[identity] = parse_complex(e)
    return v


def _laurent_entry(e, d):
    if isinstance(e, dict):
        return polynomial_from_json({"d": d, "terms": _need(e, "terms", "Laurent entry")})
    z = parse_complex(e)
    return LaurentPolynomial(d, {(0,) * d: z} if z else {})


def group_ring_complex_from_json(obj):
    """A finite-group complex when ``group`` is present, a Laurent complex when ``d`` is."""
    dims = [int(n) for n in _need(obj, "dims", "complex")]
    raw = _need(obj, "differentials", "complex")
    if "group" in obj:
        G = group_from_json(obj["group"])
        diffs = []
        for k, m in enumerate(raw, start=1):
            arr = np.zeros((dims[k - 1], dims[k], G.order), dtype=complex)
            if len(m) != dims[k - 1] or any(len(r) != dims[k] for r in m):
                raise StructuralError(f"d_{k} must be {dims[k - 1]} x {dims[k]}")
            for i, row in enumerate(m):
                for j, e in enumerate(row):
                    arr[i, j] = _group_entry(e, G.order, G.identity_index)
            diffs.append(arr)
        return FiniteGroupComplex(G, tuple(dims), tuple(diffs))
    if "d" in obj:
        d = int(obj["d"])
        diffs = [[[_laurent_entry(e, d) for e in row] for row in m] for m in raw]
        return LaurentComplex(d, tuple(dims), tuple(diffs))
    raise StructuralError("group-ring complex needs 'group' or 'd'")


def to_plain(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(f"{v:.15g}") + 0.0
    if isinstance(v, complex):
        return [to_plain(v.real), to_plain(v.imag)]
    if isinstance(v, dict):
        return {str(k): to_plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [to_plain(x) for x in v]
    if isinstance(v, np.generic):
        return to_plain(v.item())
    if isinstance(v, np.ndarray):
        return to_plain(v.tolist())
    return v


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, floats rounded to 15 significant digits."""
    return json.dumps(to_plain(obj), sort_keys=True, indent=2) + "\n"


def load(path: str):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise StructuralError(f"{path}: invalid JSON ({exc})") from exc
