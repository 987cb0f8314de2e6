import json
import subprocess
import sys

import numpy as np
import pytest

from geodex import harness
from geodex.cli import main

KLEIN = {
    "manifold": {"kind": "flat_klein_bottle"},
    "potential": {"kind": "cosine_lattice", "amplitudes": [0.1, 0.3], "frequencies": [1, 0]},
    "seeds": [[0.02, 0.01, 1.01, 0.0], [0.48, 0.01, 0.99, 0.0]],
    "deck": [[0, 1]],
}


@pytest.fixture
def klein_file(tmp_path):
    p = tmp_path / "klein.json"
    p.write_text(json.dumps(KLEIN))
    return p


def test_verify_writes_report(klein_file, tmp_path, capsys):
    report = tmp_path / "report.json"
    assert main(["verify", "--config", str(klein_file), "--report", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert doc["summary"] == {"pass": 2, "fail": 0, "skipped": 0}
    assert [(r["ind"], r["mu_cz"]) for r in doc["reports"]] == [(0, 1), (1, 0)]
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2 and all("PASS" in line for line in out)


def test_verify_report_is_reproducible(klein_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["verify", "--config", str(klein_file), "--report", str(a)])
    main(["verify", "--config", str(klein_file), "--report", str(b), "--threads", "1"])
    ja, jb = json.loads(a.read_text()), json.loads(b.read_text())
    assert ja["reports"] == jb["reports"]


def test_verify_fail_exit_code(klein_file, monkeypatch):
    def fake(config):
        return [harness.IndexReport("orbit-000", "FAIL", reason="forced")]
    monkeypatch.setattr(harness, "verify_index_theorem", fake)
    assert main(["verify", "--config", str(klein_file)]) == 1


def test_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**KLEIN, "solver": {"steps": 10}}))
    assert main(["verify", "--config", str(bad)]) == 2
    assert "configuration error" in capsys.readouterr().err
    assert main(["find-orbits", "--config", str(tmp_path / "nope.json")]) == 2


def test_unwritable_output(tmp_path):
    # the target is an existing directory
    assert main(["emit-figure", "--which", "gamma1", "--out", str(tmp_path)]) == 2


def test_numerics_exit_code(capsys):
    # the zero generator gives the constant identity path, which is not admissible
    assert main(["cz-path", "--which", "exp", "--matrix", "[[0, 0], [0, 0]]", "--steps", "64"]) == 3
    assert "numerical error" in capsys.readouterr().err


def test_find_orbits(klein_file, tmp_path):
    out = tmp_path / "orbits.json"
    assert main(["find-orbits", "--config", str(klein_file), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert [o["id"] for o in doc["orbits"]] == ["orbit-000", "orbit-001"]
    assert all(o["residual"] <= 1e-10 for o in doc["orbits"])
    assert doc["failed_seeds"] == []


@pytest.mark.parametrize("argv, want", [
    (["--which", "gamma1"], "1"),
    (["--which", "gamma2"], "1"),
    (["--which", "exp", "--matrix", "[[-3.0, 0], [0, -3.0]]"], "1"),
    (["--which", "exp", "--matrix", "[[1.0, 0], [0, 1.0]]"], "-1"),
])
def test_cz_path(argv, want, capsys):
    assert main(["cz-path", *argv]) == 0
    assert capsys.readouterr().out.strip() == want


def test_spectral_flow_arctan(capsys):
    assert main(["spectral-flow", "--arctan", "2"]) == 0
    assert json.loads(capsys.readouterr().out) == {"flow": 1}


def test_spectral_flow_needs_input():
    assert main(["spectral-flow"]) == 2


def test_emit_figure(tmp_path, capsys):
    out = tmp_path / "g2.csv"
    assert main(["emit-figure", "--which", "gamma2", "--out", str(out), "--steps", "512"]) == 0
    assert "513 rows" in capsys.readouterr().out
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape == (513, 5)
    assert data[-1, 4] == pytest.approx(2 * (1 + np.cosh(np.pi)), rel=1e-6)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "geodex", "cz-path", "--which", "gamma1",
                           "--steps", "256"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "1"
