from __future__ import annotations

import json
import subprocess
import sys

import pytest

from protoldpc.cli import main


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_certify_passes_on_nonempty_red(capsys):
    code, out, _ = run(capsys, "certify", "pkg:small_red_nonempty", "--info", "1")
    assert code == 0 and "PASS" in out


def test_certify_reports_failure_with_exit_zero(capsys):
    code, out, _ = run(capsys, "certify", "pkg:small_red_empty", "--info", "1")
    assert code == 0 and "FAIL" in out


def test_missing_file_is_a_computation_error(capsys):
    code, _, err = run(capsys, "threshold-bec", "missing.proto")
    assert code == 1 and "missing.proto" in err


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as info:
        main(["optimize"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 2


def test_red_and_rate(capsys):
    code, out, _ = run(capsys, "red", "pkg:small_red_nonempty")
    assert code == 0 and out.strip().splitlines()[-1] == "3 3"
    code, out, _ = run(capsys, "rate", "pkg:small_red_nonempty", "--json")
    assert json.loads(out)["design_rate"] == "1/4"


def test_threshold_json(capsys):
    code, out, _ = run(capsys, "threshold-bec", "pkg:small_red_nonempty", "--precision", "1e-3", "--json")
    data = json.loads(out)
    assert code == 0 and data["lower"] < 0.6541 < data["upper"]


def test_threshold_trace_csv(capsys, tmp_path):
    code, _, _ = run(capsys, "threshold-bec", "pkg:small_red_nonempty", "--precision", "1e-2",
                     "--trace", "t.csv", "--trace-eps", "0.5")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert code == 0 and lines[0] == "iteration,max_x,max_app" and len(lines) > 2
    assert (tmp_path / "t.csv.manifest.json").exists()


def test_certificate_dump(capsys, tmp_path):
    run(capsys, "certify", "pkg:small_red_nonempty", "--dump-cert", "cert.json")
    data = json.loads((tmp_path / "cert.json").read_text())
    assert data["verdict"] is True and len(data["red_edges"]) == 6


def test_lift_then_simulate_is_reproducible(capsys, tmp_path):
    assert run(capsys, "lift", "pkg:small_red_nonempty", "--Z", "8", "-o", "c.alist")[0] == 0
    for name in ("a.csv", "b.csv"):
        code, _, _ = run(capsys, "simulate-bec", "c.alist", "--eps", "0.3", "0.5", "--trials", "2000",
                         "--seed", "4", "--jobs", "1", "-o", name)
        assert code == 0
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["seed"] == 4 and "c.alist" in manifest["input_digests"]
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert header.startswith("epsilon,trials,ber,fer")


def test_optimize_writes_protograph_and_history(capsys, tmp_path):
    code, _, _ = run(capsys, "optimize", "--rows", "2", "--cols", "4", "--generations", "2", "--population", "6",
                     "--seed", "1", "--jobs", "1", "-o", "best.proto", "--history", "h.json")
    assert code == 0
    assert (tmp_path / "best.proto").read_text().startswith("2 4")
    hist = json.loads((tmp_path / "h.json").read_text())
    assert [h["generation"] for h in hist["history"]] == [0, 1, 2]
    assert all(h["certified"] for h in hist["history"])


def test_validate_and_module_entry_point(capsys, tmp_path):
    (tmp_path / "bad.proto").write_text("1 2\n1 x\n")
    code, _, err = run(capsys, "validate", "bad.proto")
    assert code == 1 and "line 2" in err
    proc = subprocess.run([sys.executable, "-m", "protoldpc", "validate", "pkg:small_red_empty"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
