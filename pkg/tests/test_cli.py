import csv
import io
import json

import numpy as np
import pytest

from ebchan import SCHEMA, __version__
from ebchan.channels import choi_array, random_channel
from ebchan.cli import CONFIG_ENV, main
from ebchan.serialize import CSV_COLUMNS, channel_to_dict, encode_matrix, encode_state, parse_channel_file
from ebchan.qmath import DensityMatrix

FAST = ["--restarts", "4", "--iters", "600"]


def strip_timestamp(text):
    doc = json.loads(text)
    doc.pop("timestamp")
    return json.dumps(doc, sort_keys=True)


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def files(tmp_path):
    paths = {}

    def put(name, obj):
        p = tmp_path / name
        p.write_text(json.dumps(obj))
        paths[name] = p
        return p

    put("identity_qubit.json", {"schema": SCHEMA, "type": "special", "kind": "identity", "d": 2})
    put("psi.json", channel_to_dict(random_channel("general", 2, 2, 2, 101)))
    put("phi_eb.json", channel_to_dict(random_channel("eb_holevo", 2, 2, 3, 102)))
    put("bell.json", encode_state(DensityMatrix.from_pure(np.array([1, 0, 0, 1]) / np.sqrt(2), [2, 2])))
    put("half.json", encode_state(DensityMatrix(np.diag([0.7, 0.3]))))
    bad = [np.diag([1.1, 0.0]), np.diag([0.0, 1.0])]
    put("bad_povm.json", {"type": "holevo", "povm": [encode_matrix(x) for x in bad],
                          "outputs": [encode_state(DensityMatrix(np.diag([1.0, 0.0])))] * 2})
    put("nontp.json", {"type": "kraus", "kraus": [encode_matrix(np.eye(2))] * 2})
    paths["dir"] = tmp_path
    return paths


def test_chi_star_identity(capsys, files):
    code, out, _ = run_cli(capsys, "chi-star", files["identity_qubit.json"], *FAST)
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == SCHEMA and doc["tool_version"] == __version__
    assert doc["seed"] == 0 and "tolerances" in doc
    assert doc["result"]["value"] == pytest.approx(1.0, abs=1e-6)


def test_validate(capsys, files):
    code, out, _ = run_cli(capsys, "validate", files["phi_eb.json"])
    doc = json.loads(out)
    assert code == 0 and doc["passed"] and doc["eb_status"] == "EB_certified"
    code, out, _ = run_cli(capsys, "validate", files["identity_qubit.json"])
    assert json.loads(out)["eb_status"] == "NOT_EB_certified"


def test_apply_and_eof(capsys, files):
    code, out, _ = run_cli(capsys, "apply", files["phi_eb.json"], files["half.json"])
    assert code == 0
    assert json.loads(out)["output"]["dims"] == [2]
    code, out, _ = run_cli(capsys, "eof", files["bell.json"], *FAST)
    doc = json.loads(out)
    assert code == 0
    assert doc["result"]["value"] == pytest.approx(1.0, abs=1e-9)
    assert doc["wootters"] == pytest.approx(1.0, abs=1e-12)


def test_min_entropy(capsys, files):
    code, out, _ = run_cli(capsys, "min-entropy", files["identity_qubit.json"], *FAST)
    assert code == 0 and json.loads(out)["result"]["value"] == pytest.approx(0.0, abs=1e-9)


def test_verify_thm1_seed7(capsys, files):
    code, out, _ = run_cli(capsys, "verify", "thm1", files["psi.json"], files["phi_eb.json"], "--seed", 7, *FAST)
    rep = json.loads(out)["report"]
    assert code == 0
    assert abs(rep["slack"]) <= 2e-3
    assert rep["seed"] == 7


def test_verify_csv(capsys, files):
    code, out, _ = run_cli(capsys, "verify", "floor", files["psi.json"], files["phi_eb.json"],
                           "--format", "csv", *FAST)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 2 and rows[1][0] == "floor"


def test_fuzz_csv(capsys):
    code, out, _ = run_cli(capsys, "fuzz", "thm2", "--pairs", 3, "--seed", 1, *FAST)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert len(rows) == 4
    assert len({r[-1] for r in rows[1:]}) == 3  # distinct per-pair seeds


def test_input_errors_exit_2(capsys, files):
    code, _, err = run_cli(capsys, "validate", files["bad_povm.json"])
    assert code == 2 and "0.1" in err
    code, _, err = run_cli(capsys, "validate", files["nontp.json"])
    assert code == 2
    code, _, err = run_cli(capsys, "chi-star", files["dir"] / "missing.json")
    assert code == 2
    code, _, _ = run_cli(capsys, "verify", "thm1", files["psi.json"], files["psi.json"])
    assert code == 2  # second channel not in Holevo form
    code, _, _ = run_cli(capsys, "chi-star", files["psi.json"], "--format", "csv")
    assert code == 2
    code, _, _ = run_cli(capsys, "verify", "thm9", files["psi.json"], files["psi.json"])
    assert code == 2
    code, _, _ = run_cli(capsys, "chi-star", files["psi.json"], "--restarts", 0)
    assert code == 2


def test_malformed_json_exit_2(capsys, tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    code, _, err = run_cli(capsys, "validate", p)
    assert code == 2 and "x.json:1:" in err


def test_theorem_failure_exit_1(capsys, files):
    # a single restart with one iteration cannot locate the joint minimum
    code, out, _ = run_cli(capsys, "verify", "thm1", files["psi.json"], files["phi_eb.json"],
                           "--restarts", 1, "--iters", 1, "--seed", 3)
    rep = json.loads(out)["report"]
    assert code == (0 if rep["passed"] else 1)


def test_gen_round_trip(capsys, files):
    for kind, extra in (("general", ["--rank", 3]), ("eb_holevo", ["--d-out", 3, "--rank", 3])):
        code, out, _ = run_cli(capsys, "gen", kind, "--seed", 5, *extra)
        assert code == 0
        p = files["dir"] / f"gen_{kind}.json"
        p.write_text(out)
        ch = parse_channel_file(p)
        assert json.dumps(channel_to_dict(ch), indent=1) + "\n" == out
        assert np.array_equal(choi_array(ch), choi_array(random_channel(kind, 2, ch.d_out, 3, 5)))


def test_out_file(capsys, files):
    target = files["dir"] / "report.json"
    code, out, _ = run_cli(capsys, "min-entropy", files["identity_qubit.json"], "--out", target, *FAST)
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["command"] == "min-entropy"


def test_config_env(capsys, files, monkeypatch):
    cfg = files["dir"] / "cfg.json"
    cfg.write_text(json.dumps({"restarts": 3, "seed": 11}))
    monkeypatch.setenv(CONFIG_ENV, str(cfg))
    code, out, _ = run_cli(capsys, "min-entropy", files["identity_qubit.json"], "--iters", 200)
    doc = json.loads(out)
    assert doc["optimizer"]["restarts"] == 3 and doc["seed"] == 11
    code, out, _ = run_cli(capsys, "min-entropy", files["identity_qubit.json"], "--seed", 2, "--iters", 200)
    assert json.loads(out)["seed"] == 2
    cfg.write_text(json.dumps({"colour": "blue"}))
    code, _, err = run_cli(capsys, "min-entropy", files["identity_qubit.json"])
    assert code == 2 and "colour" in err


def test_determinism(capsys, files):
    argv = ["verify", "thm2", files["psi.json"], files["phi_eb.json"], "--seed", 4, *FAST]
    _, first, _ = run_cli(capsys, *argv)
    _, second, _ = run_cli(capsys, *argv)
    assert strip_timestamp(first) == strip_timestamp(second)
    assert set(json.loads(first)) - set(json.loads(strip_timestamp(first))) == {"timestamp"}
