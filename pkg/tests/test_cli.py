import json
import math
import pathlib
import subprocess
import sys

import numpy as np
import pytest

from ncdet import cli
from ncdet import serialization as ser
from ncdet.algebra import AlgebraElement, FiniteDimAlgebra, cyclic_group
from ncdet.mahler import LaurentPolynomial
from ncdet.pathdet import SampledPath, SegmentProduct
from ncdet.torsion import BasedChainComplex

DATA = pathlib.Path(__file__).parent / "data"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def result_of(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)["result"]


def as_complex(v):
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def test_path_det_of_full_turn(capsys):
    r = result_of(capsys, "path-det", DATA / "xi0.json")
    assert r["lattice"] == [1.0]
    assert abs(as_complex(r["delta_tilde"]) - 1) <= 1e-8
    assert r["closed"] is True


def test_path_det_canonical(capsys):
    r = result_of(capsys, "path-det", DATA / "m2_element.json")
    assert r["path"] == "canonical"
    assert r["fk_det"] == pytest.approx(math.sqrt(6), rel=1e-10)
    assert r["lattice"] == [0.5]


def test_mahler_commands(capsys):
    r = result_of(capsys, "mahler", DATA / "z_minus_2.json", "--tol", "1e-6")
    assert r["jensen"]["value"] == pytest.approx(2.0, rel=1e-14)
    assert abs(r["value"] - 2.0) <= 2.0 * 1e-6
    r = result_of(capsys, "mahler", DATA / "one_plus_z.json", "--tol", "1e-4")
    assert r["jensen"]["value"] == pytest.approx(1.0, abs=1e-12)
    assert abs(r["value"] - 1.0) <= 1e-4


def test_fk_det_modes(capsys):
    assert result_of(capsys, "fk-det", DATA / "m2_element.json")["value"] == pytest.approx(math.sqrt(6))
    assert result_of(capsys, "fk-det", DATA / "singular.json", "--extended")["value"] == 0.0
    assert result_of(capsys, "fk-det", DATA / "singular.json", "--fkl")["value"] == pytest.approx(math.sqrt(3))


def test_torsion_modes_agree(capsys):
    f = DATA / "complex3.json"
    oe = result_of(capsys, "torsion", f, "--mode", "oddeven")
    mi = result_of(capsys, "torsion", f, "--mode", "milnor")
    assert oe["torsion"]["modulus"] == pytest.approx(mi["torsion"]["modulus"], rel=1e-12)
    assert oe["diagnostics"]["acyclic"] is True
    rs = result_of(capsys, "torsion", f, "--mode", "rayser")
    assert abs(rs["sum"]) <= 1e-10


def test_l2_commands(capsys):
    assert result_of(capsys, "l2", DATA / "z2_two_plus_g.json")["value"] == pytest.approx(-0.5 * math.log(3))
    r = result_of(capsys, "l2", DATA / "l2_z_minus_2.json", "--tol", "1e-6")
    assert abs(r["value"] + math.log(2)) <= 1e-6
    r = result_of(capsys, "l2", DATA / "complex3.json")
    assert abs(r["value"]) <= 1e-12


def test_reidemeister_command(capsys, tmp_path):
    doc = json.loads((DATA / "z2_two_plus_g.json").read_text())
    doc["representation"] = [[[1]], [[-1]]]
    f = tmp_path / "rep.json"
    f.write_text(json.dumps(doc))
    r = result_of(capsys, "torsion", f, "--mode", "reidemeister")
    assert r["value"] == pytest.approx(1.0)


def test_exit_codes(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, _, err = run(capsys, "mahler", bad)
    assert code == cli.EXIT_PARSE and json.loads(err)["error"] == "parse"
    assert run(capsys, "mahler", tmp_path / "missing.json")[0] == cli.EXIT_PARSE
    assert run(capsys, "mahler", DATA / "z_minus_2.json", "--tol", "-1")[0] == cli.EXIT_PARSE
    assert run(capsys, "bogus", DATA / "z_minus_2.json")[0] == cli.EXIT_PARSE
    code, _, err = run(capsys, "fk-det", DATA / "singular.json")
    assert code == cli.EXIT_DOMAIN and "invertible" in json.loads(err)["message"]
    code, _, err = run(capsys, "mahler", DATA / "one_plus_z.json", "--tol", "1e-12", "--budget", "2048")
    assert code == cli.EXIT_BUDGET
    assert len(json.loads(err)["last_values"]) == 2


def test_structural_error_on_bad_composition(capsys, tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"dims": [1, 1, 1], "differentials": [[[1]], [[1]]]}))
    assert run(capsys, "torsion", f)[0] == cli.EXIT_PARSE


def test_output_is_deterministic(capsys, tmp_path):
    for args in (("mahler", DATA / "one_plus_z.json", "--tol", "1e-4", "--seed", "7"),
                 ("l2", DATA / "l2_z_minus_2.json", "--tol", "1e-6"),
                 ("path-det", DATA / "m2_element.json")):
        outs = [run(capsys, *args)[1] for _ in range(2)]
        assert outs[0] == outs[1]
    f1, f2 = tmp_path / "a.json", tmp_path / "b.json"
    for f in (f1, f2):
        assert cli.main(["mahler", str(DATA / "z_minus_2.json"), "--output", str(f)]) == 0
    assert f1.read_bytes() == f2.read_bytes()


def test_seed_changes_shifts_only(capsys):
    a = result_of(capsys, "mahler", DATA / "z_minus_2.json", "--tol", "1e-6", "--seed", "1")
    b = result_of(capsys, "mahler", DATA / "z_minus_2.json", "--tol", "1e-6", "--seed", "2")
    assert a["quadrature"]["seed"] != b["quadrature"]["seed"]
    assert abs(a["value"] - b["value"]) <= 2e-6 * 2.0


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "ncdet", "mahler", str(DATA / "z_minus_2.json"),
                          "--tol", "1e-6"], capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["config"]["command"] == "mahler"


# ---------------------------------------------------------------------------
# serialization round trips


def test_round_trips(rng):
    A = FiniteDimAlgebra((1, 2), (0.25, 0.5))
    x = AlgebraElement([rng.standard_normal((1, 1)) + 0j, rng.standard_normal((2, 2)) + 1j])
    A2 = ser.algebra_from_json(json.loads(json.dumps(ser.algebra_to_json(A))))
    assert A2.block_sizes == A.block_sizes and A2.trace_weights == A.trace_weights
    y = ser.element_from_json(json.loads(json.dumps(ser.element_to_json(x))))
    assert all(np.array_equal(a, b) for a, b in zip(x.blocks, y.blocks))

    p = LaurentPolynomial(2, {(1, -1): 2 - 1j, (0, 3): 0.5})
    q = ser.polynomial_from_json(ser.polynomial_to_json(p))
    assert q.terms == p.terms

    G = cyclic_group(4)
    H = ser.group_from_json(ser.group_to_json(G))
    assert np.array_equal(H.table, G.table) and H.identity_index == G.identity_index

    C = BasedChainComplex((1, 2, 1), ([[1.0, 2.0]], [[2.0], [-1.0]]))
    D = ser.chain_complex_from_json(ser.chain_complex_to_json(C))
    assert D.dims == C.dims
    assert all(np.array_equal(a, b) for a, b in zip(C.differentials, D.differentials))

    seg = SegmentProduct([x, x])
    back = ser.path_from_json(ser.path_to_json(seg))
    assert isinstance(back, SegmentProduct) and len(back.factors) == 2
    one = AlgebraElement([np.eye(1), np.eye(2)])
    sp = SampledPath((0.0, 1.0), (one, one))
    assert isinstance(ser.path_from_json(ser.path_to_json(sp)), SampledPath)


def test_malformed_values_are_structural():
    from ncdet.errors import StructuralError

    for bad in (True, "1", [1, 2, 3], None):
        with pytest.raises(StructuralError):
            ser.parse_complex(bad)
    with pytest.raises(StructuralError):
        ser.matrix_from_json([[1, 2], [3]])
    with pytest.raises(StructuralError):
        ser.polynomial_from_json({"d": 2, "terms": [{"exp": [1], "coeff": 1}]})


def test_json_numbers_are_rounded():
    assert ser.to_plain(0.1 + 0.2) == 0.3
    assert ser.to_plain(-0.0) == 0.0 and str(ser.to_plain(-0.0)) == "0.0"
    assert ser.to_plain(float("nan")) == "nan"
    assert ser.to_plain(np.complex128(1 - 2j)) == [1.0, -2.0]
