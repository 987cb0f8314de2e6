import json

import numpy as np
import pytest

from geodex import harness
from geodex.errors import ConfigError
from geodex.symplectic import f_gamma2

TORUS = {
    "manifold": {"kind": "flat_torus", "n": 2},
    "potential": {"kind": "cosine_lattice", "amplitudes": [0.1, 0.1]},
    "seed_grid": {"lo": [0.02, 0.03], "hi": [1.02, 1.03], "counts": [2, 2]},
}
KLEIN = {
    "manifold": {"kind": "flat_klein_bottle"},
    "potential": {"kind": "cosine_lattice", "amplitudes": [0.1, 0.3], "frequencies": [1, 0]},
    "seeds": [[0.02, 0.01, 1.01, 0.0]],
    "deck": [[0, 1]],
}
FREE = {
    "manifold": {"kind": "flat_torus", "n": 2},
    "potential": {"kind": "zero"},
    "seeds": [[0.0, 0.0, 0.0, 0.0], [0.3, 0.6, 0.0, 0.0]],
}


@pytest.fixture(scope="module")
def torus_reports():
    return harness.verify_index_theorem(harness.load_config(TORUS))


def test_torus_reports(torus_reports):
    got = sorted((r.ind, int(r.mu_cz), r.sigma) for r in torus_reports)
    assert got == [(0, 0, 0), (1, -1, 0), (1, -1, 0), (2, -2, 0)]
    assert all(r.status == "PASS" and r.residual == 0 and r.null == 0 for r in torus_reports)
    assert [r.orbit_id for r in torus_reports] == [f"orbit-{k:03d}" for k in range(4)]
    assert harness.exit_code(torus_reports) == 0


def test_report_rows_carry_all_diagnostics(torus_reports):
    doc = json.loads(harness.report_json(torus_reports))
    assert doc["summary"] == {"pass": 4, "fail": 0, "skipped": 0}
    for row in doc["reports"]:
        assert set(row["diagnostics"]) == set(harness.DIAGNOSTIC_KEYS)
        assert row["diagnostics"]["monodromy_defect"] <= 1e-8
        assert row["diagnostics"]["path_defect"] <= 1e-8
        assert row["diagnostics"]["conjugation_error"] <= 1e-6


def test_klein_report():
    (rep,) = harness.verify_index_theorem(harness.load_config(KLEIN))
    assert rep.status == "PASS"
    assert (rep.sigma, rep.ind, int(rep.mu_cz)) == (1, 0, 1)


def test_free_torus_is_skipped():
    reports = harness.verify_index_theorem(harness.load_config(FREE))
    assert [r.status for r in reports] == ["SKIPPED", "SKIPPED"]
    assert all("DegeneracyError" in r.reason for r in reports)
    assert harness.exit_code(reports) == 0


def test_exit_code_on_fail():
    reps = [harness.IndexReport("orbit-000", "PASS"), harness.IndexReport("orbit-001", "FAIL")]
    assert harness.exit_code(reps) == 1


def test_report_is_deterministic():
    cfg = harness.load_config(KLEIN)
    a = harness.report_json(harness.verify_index_theorem(cfg), cfg)
    b = harness.report_json(harness.verify_index_theorem(harness.load_config(json.dumps(KLEIN))), cfg)
    assert a == b


@pytest.mark.parametrize("bad, where", [
    ({"manifold": {"kind": "torus"}, "potential": {"kind": "zero"}, "seeds": [[0, 0, 0, 0]]}, "manifold"),
    ({**TORUS, "solver": {"steps": 63}}, "solver"),
    ({**TORUS, "solver": {"grid": -1}}, "solver"),
    ({**TORUS, "extra": 1}, "root"),
    ({"manifold": {"kind": "flat_torus"}, "potential": {"kind": "zero"}}, "seeds"),
    ({**TORUS, "seeds": [[0.0, 0.0]]}, "entries"),
    ({**TORUS, "solver": {"power": 2}}, "odd"),
    ({**TORUS, "potential": {"kind": "cosine_lattice", "amplitudes": [0.1]}}, "amplitude"),
    ({**KLEIN, "potential": {"kind": "cosine_lattice", "amplitudes": [0.1, 0.3], "frequencies": [1, 1]}},
     "invariant"),
    ({**TORUS, "potential": {"kind": "sphere_wave"}}, "sphere"),
])
def test_schema_errors(bad, where):
    with pytest.raises(ConfigError):
        harness.load_config(bad)


def test_config_sources(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(TORUS))
    assert len(harness.load_config(str(p)).seeds) == 4
    with pytest.raises(ConfigError):
        harness.load_config(str(tmp_path / "missing.json"))
    with pytest.raises(ConfigError):
        harness.load_config("{not json")


def test_override():
    cfg = harness.override(harness.load_config(TORUS), steps=1024, grid=None)
    assert cfg.solver["steps"] == 1024 and cfg.solver["grid"] == 128


def test_thread_cap(monkeypatch):
    cfg = harness.load_config({**TORUS, "solver": {"threads": 3}})
    monkeypatch.delenv("GEODEX_THREADS", raising=False)
    assert cfg.threads == 3
    monkeypatch.setenv("GEODEX_THREADS", "1")
    assert cfg.threads == 1
    monkeypatch.setenv("GEODEX_THREADS", "8")
    assert cfg.threads == 3
    monkeypatch.setenv("GEODEX_THREADS", "many")
    with pytest.raises(ConfigError):
        _ = cfg.threads


def test_single_thread_matches_parallel(monkeypatch, torus_reports):
    monkeypatch.setenv("GEODEX_THREADS", "1")
    cfg = harness.load_config(TORUS)
    serial = harness.verify_index_theorem(cfg)
    assert harness.report_json(serial) == harness.report_json(torus_reports)


def _rows(path):
    return path.read_text().splitlines()


def test_gamma1_csv(tmp_path):
    out = tmp_path / "g1.csv"
    assert harness.emit_figure_data("gamma1", out, {"steps": 256}) == 257
    rows = _rows(out)
    assert rows[0] == "t,theta,u,v,det1m"
    assert rows[1] == "0,0,0,0,0"
    assert len(rows) == 258


def test_gamma2_csv(tmp_path):
    out = tmp_path / "g2.csv"
    harness.emit_figure_data("gamma2", out, {"mu_hat": -np.pi ** 2})
    rows = _rows(out)
    assert len(rows) == 2050
    last = [float(v) for v in rows[-1].split(",")]
    assert last[0] == 1.0
    assert last[4] == pytest.approx(2 * (1 + np.cosh(np.pi)), abs=1e-6)
    assert last[4] == pytest.approx(f_gamma2(1.0, np.pi), abs=1e-6)


def test_orbit_path_csv_and_determinism(tmp_path):
    cfg = harness.load_config(KLEIN)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    harness.emit_figure_data("orbit-path", a, {"orbit": "orbit-000"}, cfg)
    harness.emit_figure_data("orbit-path", b, {"orbit": "orbit-000"}, cfg)
    assert a.read_bytes() == b.read_bytes()
    data = np.loadtxt(a, delimiter=",", skiprows=1)
    assert not np.isnan(data).any()
    assert np.all(np.diff(data[:, 0]) > 0)
    assert data[0].tolist() == [0.0, 0.0, 0.0, 0.0, 0.0]


def test_figure_errors(tmp_path):
    with pytest.raises(ConfigError):
        harness.emit_figure_data("orbit-path", tmp_path / "x.csv")
    with pytest.raises(ConfigError):
        harness.emit_figure_data("orbit-path", tmp_path / "x.csv", {"orbit": "orbit-009"},
                                 harness.load_config(KLEIN))
