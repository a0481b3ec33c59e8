import json
import os
import subprocess
import sys

import pytest

from specflow.cli import main


def run(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, [json.loads(line) for line in err.splitlines() if line.strip()]


@pytest.fixture
def winding(tmp_path, capsys):
    path = tmp_path / "w1.json"
    assert run(["generate", "--model", "winding", "--param", 1, "--out", path], capsys)[0] == 0
    return path


@pytest.fixture
def constant_s3(tmp_path, capsys):
    path = tmp_path / "c.json"
    args = ["generate", "--model", "constant", "--mesh", "s3", "--refine", 6, "--out", path]
    assert run(args, capsys)[0] == 0
    return path


def test_generate_then_sf(winding, capsys):
    code, out, _ = run(["sf", winding], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["loop_evaluations"] == [1]
    assert rep["match"] is True
    assert "gap_margin" in rep["tolerances"]


def test_sf_report_is_deterministic(winding, capsys):
    first = run(["sf", winding, "--no-timings"], capsys)[1]
    second = run(["sf", winding, "--no-timings"], capsys)[1]
    assert first == second


def test_generate_is_deterministic(tmp_path, capsys):
    texts = []
    for name in ("a.json", "b.json"):
        run(["generate", "--model", "monopole", "--param", 1, "--refine", 5,
             "--out", tmp_path / name], capsys)
        texts.append((tmp_path / name).read_bytes())
    assert texts[0] == texts[1]


def test_gerbe_on_monopole(tmp_path, capsys):
    path = tmp_path / "m2.json"
    run(["generate", "--model", "monopole", "--param", 2, "--out", path], capsys)
    code, out, _ = run(["gerbe", path, "--no-timings"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["dd_pair"] == 2
    assert rep["oracle"]["berry"]["chern"] == 2
    assert rep["cover"]["f_vector"] == [5, 10, 10, 5]


def test_verify_constant_family(constant_s3, tmp_path, capsys):
    expected = tmp_path / "exp.json"
    expected.write_text(json.dumps({"sf": 0, "dd": 0}))
    code, out, _ = run(["verify", constant_s3, expected], capsys)
    assert code == 0 and json.loads(out)["passed"]


def test_verify_reports_mismatch(constant_s3, tmp_path, capsys):
    expected = tmp_path / "exp.json"
    expected.write_text(json.dumps({"dd": 3}))
    code, _, err = run(["verify", constant_s3, expected], capsys)
    assert code == 1
    assert err[0]["check"] == "dd_pair" and err[0]["actual"] == 0


def test_validate_cover_flags_bad_level(winding, tmp_path, capsys):
    cover = tmp_path / "cover.json"
    assert run(["validate-cover", winding, "--auto-cover", "--write", cover], capsys)[0] == 0
    d = json.loads(cover.read_text())
    d["levels"][0] = 0.0
    cover.write_text(json.dumps(d))
    code, _, err = run(["validate-cover", winding, "--cover", cover], capsys)
    assert code == 1
    assert any(v.get("set") == 0 for v in err)


def test_errors_are_json_lines(winding, capsys):
    code, out, err = run(["gerbe", winding], capsys)
    assert code == 1 and out == ""
    assert err[0]["error"] == "SpecflowError"


def test_deform_obstruction(tmp_path, capsys):
    path = tmp_path / "m1.json"
    run(["generate", "--model", "monopole", "--param", 1, "--out", path], capsys)
    script = tmp_path / "moves.json"
    script.write_text(json.dumps([{"move": "flatten", "bands": 0},
                                  {"move": "flatten", "bands": 1},
                                  {"move": "scale", "bands": 1}]))
    code, _, err = run(["deform", path, script, "--family-out", tmp_path / "out.json",
                        "--no-invariants"], capsys)
    assert code == 1
    assert err[0]["error"] == "ChernObstructionError" and err[0]["chern"] == -1


def test_standard_form_on_circle(tmp_path, capsys):
    path = tmp_path / "w.json"
    run(["generate", "--model", "winding", "--param", -2, "--out", path], capsys)
    code, out, _ = run(["standard-form", path], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["sf_loops"] == [-2] and rep["k"] == 0


def test_thread_variable(tmp_path):
    env = dict(os.environ, SPECFLOW_NUM_THREADS="1")
    out = tmp_path / "w.json"
    subprocess.run([sys.executable, "-m", "specflow.cli", "generate", "--model", "ladder",
                    "--out", str(out)], env=env, check=True)
    assert json.loads(out.read_text())["format"] == "specflow.family/1"
