import json
import subprocess
import sys

import numpy as np
import pytest

from fockmodel import numerics as nm
from fockmodel.cli import (InputError, dump_operator, dump_tuple, main, parse_operator, parse_tuple,
                           run)
from fockmodel.multianalytic import MultiAnalyticOp, coefficient_distance, multiply

from _fixtures import coisometric_tuple, graded_invariant_subspace, graded_nilpotent, random_op

Z1 = MultiAnalyticOp(1, 1, 1, {(1,): np.eye(1)})


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def machine(argv):
    code, report, _, _ = run(argv + ["--format", "machine"])
    return code, report


def strip_time(text):
    doc = json.loads(text)
    doc.pop("wall_time")
    return json.dumps(doc, sort_keys=True)


@pytest.fixture
def docs(tmp_path):
    rng = np.random.default_rng(0)
    mats, offs, U = graded_nilpotent(rng, 2, [1, 1, 1])
    H1 = graded_invariant_subspace(rng, [1, 1, 1], offs, U)
    nil = dump_tuple(mats)
    nil["subspace"] = nm.to_pairs(H1.basis)
    fac = {"theta1": dump_operator(Z1), "theta2": dump_operator(multiply(Z1, Z1)), "N_w": 6}
    fac2 = {"theta1": dump_operator(multiply(Z1, Z1)), "theta2": dump_operator(Z1), "N_w": 6}
    return {
        "half": write(tmp_path, "half.json", dump_tuple([np.array([[0.5]])])),
        "coiso": write(tmp_path, "coiso.json", dump_tuple(coisometric_tuple(rng, 2, 2))),
        "pair": write(tmp_path, "pair.json", dump_tuple([0.3 * np.eye(2), 0.4 * np.eye(2)])),
        "nil": write(tmp_path, "nil.json", nil),
        "rot": write(tmp_path, "rot.json", dump_tuple(
            [np.array([[1, 1], [0, 1]]) @ np.diag([1j, -1j]) @ np.array([[1, -1], [0, 1]])])),
        "fac": write(tmp_path, "fac.json", fac),
        "fac2": write(tmp_path, "fac2.json", fac2),
    }


def test_tuple_document_round_trip():
    rng = np.random.default_rng(1)
    T = [rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)) for _ in range(3)]
    back, _, _ = parse_tuple(json.loads(json.dumps(dump_tuple(T))))
    assert all(np.array_equal(a, b) for a, b in zip(T, back))


def test_operator_document_round_trip():
    op = random_op(np.random.default_rng(2), 2, 2, 3, 2)
    back = parse_operator(json.loads(json.dumps(dump_operator(op))))
    assert coefficient_distance(op, back) == 0


def test_parse_errors_name_the_field():
    with pytest.raises(InputError, match=r"matrices\[0\]\[0\]\[0\]"):
        parse_tuple({"n": 1, "d": 1, "matrices": [[[0.5]]]})
    with pytest.raises(InputError, match="non-finite"):
        parse_tuple({"n": 1, "d": 1, "matrices": [[[[float("nan"), 0]]]]})
    with pytest.raises(InputError):
        parse_tuple({"n": 2, "d": 1, "matrices": [[[[0.5, 0]]]]})


def test_classify_coisometric(docs):
    code, rep = machine(["classify", docs["coiso"]])
    assert code == 0
    assert rep["result"]["coisometric"] is True and rep["result"]["cnc"] is False


def test_charfn_half(docs):
    code, rep = machine(["charfn", docs["half"], "--deg", "6"])
    assert code == 0 and rep["margins"] == {"deg": 6}
    th = parse_operator(rep["result"]["theta"])
    sign = th.coeff(())[0, 0].real / -0.5
    expect = [-0.5] + [0.75 * 0.5 ** (k - 1) for k in range(1, 7)]
    got = [th.coeff((1,) * k)[0, 0] / sign for k in range(7)]
    assert np.abs(np.array(got) - expect).max() < 1e-12
    assert rep["result"]["intertwining_defect"] <= 1e-10


def test_similarity_reports(docs):
    code, rep = machine(["similarity", docs["pair"]])
    assert code == 0 and rep["result"]["similar"] is False
    assert rep["result"]["reason"].startswith("injectivity")
    code, rep = machine(["similarity", docs["rot"]])
    assert code == 0 and rep["result"]["similar"] is True
    P = nm.from_pairs(rep["result"]["P"])
    assert np.abs(P - [[3, 1], [1, 1]]).max() < 1e-10


def test_exit_codes(tmp_path, docs):
    bad = write(tmp_path, "bad.json", {"n": 1, "d": 1, "matrices": [[[0.5]]]})
    assert main(["classify", bad, "--format", "machine", "--out", str(tmp_path / "r.json")]) == 1
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["status"] == "input error" and "matrices[0][0][0]" in rep["error"]
    assert main(["model", docs["coiso"], "--out", str(tmp_path / "m.txt")]) == 1
    assert main(["classify", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")]) == 1
    slow = write(tmp_path, "slow.json", dump_tuple([np.array([[0.9999]])]))
    code, rep = machine(["similarity", slow, "--horizon", "3"])
    assert code == 2 and rep["result"]["similar"] is None
    code, rep = machine(["model", slow])
    assert code == 2 and rep["status"] == "undetermined"


def test_factor_commands(docs):
    code, rep = machine(["factorize-check", docs["fac"]])
    assert code == 0 and rep["result"]["regular"] is True
    code, rep = machine(["factor-to-invariant", docs["fac"]])
    assert code == 0 and rep["result"]["dim_H1"] == 1 and rep["result"]["dim_H_bold"] == 3
    code, rep = machine(["compare-factors", docs["fac"], docs["fac2"]])
    assert code == 0 and rep["result"]["relation"] == "contained"
    code, rep = machine(["invariant-to-factor", docs["nil"]])
    assert code == 0 and rep["result"]["round_trip_distance"] <= 1e-6
    assert rep["result"]["nontrivial_factorization"] is True


def test_human_format(docs, capsys):
    assert main(["classify", docs["half"]]) == 0
    out = capsys.readouterr().out
    assert "pure_C0" in out and "status" in out


ALL = [("validate", "half"), ("classify", "coiso"), ("charfn", "half"), ("dilate", "half"),
       ("wold", "half"), ("model", "half"), ("factorize-check", "fac"),
       ("invariant-to-factor", "nil"), ("factor-to-invariant", "fac"), ("inner-outer", "nil"),
       ("similarity", "rot")]


def test_machine_reports_byte_stable(tmp_path, docs):
    for cmd, key in ALL + [("compare-factors", "fac")]:
        extra = [docs["fac2"]] if cmd == "compare-factors" else []
        texts = []
        for k in range(2):
            out = tmp_path / f"{cmd}{k}.json"
            code = main([cmd, docs[key], *extra, "--format", "machine", "--out", str(out)])
            assert code in (0, 2), cmd
            texts.append(strip_time(out.read_text()))
        assert texts[0] == texts[1], cmd
        rep = json.loads(texts[0])
        assert rep["status"] == "computed", (cmd, rep.get("error"))
        assert rep["tolerances"] and "margins" in rep


def test_module_entry_point(docs):
    res = subprocess.run([sys.executable, "-m", "fockmodel", "classify", docs["half"],
                          "--format", "machine"], capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["result"]["pure_C0"] is True
