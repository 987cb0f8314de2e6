"""Run configuration, index-theorem verification and figure data."""
from __future__ import annotations

import copy
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import geometry
from .errors import ConfigError, DegeneracyError, DomainError, GeodexError, RegularityError
from .framing import frame_for_orbit, linearized_flow_in_frame
from .jacobi import morse_index
from .maslov import HalfInteger, cz_index, regularized_cz_index
from .orbits import deduplicate, find_orbit, seed_grid
from .symplectic import gamma1_path, gamma2_path, write_path_csv

_VEC = {"type": "array", "items": {"type": "number"}}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["manifold", "potential"],
    "additionalProperties": False,
    "properties": {
        "manifold": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["flat_torus", "flat_klein_bottle", "sphere2"]},
                "n": _POS_INT,
                "radius": _POS,
                "pole_margin": _POS,
            },
        },
        "potential": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["zero", "cosine_lattice", "sphere_wave"]},
                "amplitudes": _VEC,
                "wavenumbers": {"type": "array", "items": {"type": "integer"}},
                "frequencies": {"type": "array", "items": {"type": "integer"}},
                "wave_amplitude": {"type": "number"},
                "zonal_amplitude": {"type": "number"},
                "frequency": {"type": "integer"},
            },
        },
        "seeds": {"type": "array", "items": _VEC},
        "seed_grid": {
            "type": "object",
            "required": ["lo", "hi", "counts"],
            "additionalProperties": False,
            "properties": {
                "lo": _VEC, "hi": _VEC,
                "counts": {"type": "array", "items": _POS_INT},
                "momenta": {"type": "array", "items": _VEC},
            },
        },
        "deck": {"type": "array",
                 "items": {"type": "array", "items": {"type": "integer"},
                           "minItems": 2, "maxItems": 2}},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "steps": {"type": "integer", "minimum": 64, "multipleOf": 2},
                "grid": {"type": "integer", "minimum": 8},
                "max_grid": {"type": "integer", "minimum": 8},
                "lambda_steps": {"type": "integer", "minimum": 4},
                "newton_tol": _POS,
                "max_iter": _POS_INT,
                "dedup_tol": _POS,
                "null_tol": _POS,
                "defect_bound": _POS,
                "margin": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
                "power": {"type": "integer"},
                "regularize_delta": _POS,
                "threads": _POS_INT,
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "report": {"type": "string"},
                "figures": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["which", "path"],
                        "additionalProperties": False,
                        "properties": {
                            "which": {"enum": ["gamma1", "gamma2", "orbit-path"]},
                            "path": {"type": "string"},
                            "mu_hat": {"type": "number"},
                            "steps": _POS_INT,
                            "orbit": {"type": "string"},
                        },
                    },
                },
            },
        },
    },
}

SOLVER_DEFAULTS = {
    "steps": 2048,
    "grid": 128,
    "max_grid": 1024,
    "lambda_steps": 64,
    "newton_tol": 1e-10,
    "max_iter": 40,
    "dedup_tol": 1e-6,
    "null_tol": None,
    "defect_bound": 1e-8,
    "margin": 0.1,
    "power": 1,
    "regularize_delta": 1e-7,
    "threads": None,
}


@dataclass(frozen=True, eq=False)
class RunConfig:
    raw: dict
    model: geometry.ManifoldModel
    potential: geometry.Potential
    seeds: tuple
    deck: tuple
    solver: dict
    outputs: dict

    @property
    def threads(self) -> int:
        cap = self.solver.get("threads")
        env = os.environ.get("GEODEX_THREADS")
        if env:
            try:
                env_cap = max(1, int(env))
            except ValueError as exc:
                raise ConfigError(f"GEODEX_THREADS must be a positive integer, got {env!r}") from exc
            cap = env_cap if cap is None else min(cap, env_cap)
        return int(cap or min(4, os.cpu_count() or 1))


def _build_model(spec: dict) -> geometry.ManifoldModel:
    kind = spec["kind"]
    if kind == "flat_torus":
        return geometry.flat_torus(spec.get("n", 2))
    if kind == "flat_klein_bottle":
        return geometry.flat_klein_bottle()
    return geometry.sphere2(spec.get("radius", 1.0), spec.get("pole_margin", 0.05))


def _build_potential(spec: dict, model: geometry.ManifoldModel) -> geometry.Potential:
    kind = spec["kind"]
    if kind == "zero":
        return geometry.zero_potential()
    if kind == "cosine_lattice":
        if "amplitudes" not in spec:
            raise ConfigError("cosine_lattice needs 'amplitudes'")
        if len(spec["amplitudes"]) != model.n:
            raise ConfigError("one amplitude per chart coordinate is required")
        return geometry.cosine_lattice(spec["amplitudes"], spec.get("wavenumbers"),
                                       spec.get("frequencies"))
    if model.kind != "sphere2":
        raise ConfigError("sphere_wave is only defined on sphere2")
    return geometry.sphere_wave(spec.get("wave_amplitude", 0.0), spec.get("zonal_amplitude", 0.0),
                                spec.get("frequency", 1))


def load_config(source) -> RunConfig:
    """Validate a config given as a dict, a JSON string or a path."""
    if isinstance(source, dict):
        raw = copy.deepcopy(source)
    else:
        text = str(source)
        try:
            if text.lstrip().startswith("{"):
                raw = json.loads(text)
            else:
                raw = json.loads(Path(text).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    try:
        model = _build_model(raw["manifold"])
        pot = _build_potential(raw["potential"], model)
        geometry.check_deck_invariance(model, pot)
        deck_word = tuple(tuple(w) for w in raw.get("deck", []))
        model.deck_from_word(deck_word)
    except GeodexError as exc:
        raise ConfigError(str(exc)) from exc
    seeds = [np.asarray(s, dtype=float) for s in raw.get("seeds", [])]
    if "seed_grid" in raw:
        g = raw["seed_grid"]
        if not len(g["lo"]) == len(g["hi"]) == len(g["counts"]) == model.n:
            raise ConfigError("seed_grid lo/hi/counts must have one entry per chart coordinate")
        seeds += seed_grid(g["lo"], g["hi"], g["counts"], g.get("momenta"))
    if not seeds:
        raise ConfigError("config needs 'seeds' or 'seed_grid'")
    for s in seeds:
        if s.shape != (2 * model.n,):
            raise ConfigError(f"seed {s.tolist()} must have {2 * model.n} entries")
    solver = dict(SOLVER_DEFAULTS)
    solver.update(raw.get("solver", {}))
    if solver["power"] % 2 == 0:
        raise ConfigError("the rotation power must be odd")
    return RunConfig(raw, model, pot, tuple(seeds), deck_word, solver, raw.get("outputs", {}))


def override(config: RunConfig, **solver_fields) -> RunConfig:
    """New config with selected solver fields replaced (``None`` leaves a field alone)."""
    raw = copy.deepcopy(config.raw)
    raw.setdefault("solver", {}).update({k: v for k, v in solver_fields.items() if v is not None})
    return load_config(raw)


# -- orbit search -------------------------------------------------------------

@dataclass
class SeedFailure:
    seed_index: int
    seed: list
    reason: str


def find_orbits(config: RunConfig):
    """Shoot from every seed; returns ``(orbits, failures)`` with orbits deduplicated."""
    model, pot, solver = config.model, config.potential, config.solver
    deck = model.deck_from_word(config.deck)

    def run(item):
        idx, seed = item
        try:
            return find_orbit(model, pot, seed, deck, solver["steps"], solver["newton_tol"],
                              solver["max_iter"])
        except GeodexError as exc:
            return SeedFailure(idx, [float(v) for v in seed], f"{type(exc).__name__}: {exc}")

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        results = list(pool.map(run, enumerate(config.seeds)))
    orbits = [r for r in results if not isinstance(r, SeedFailure)]
    failures = [r for r in results if isinstance(r, SeedFailure)]
    return deduplicate(model, orbits, solver["dedup_tol"]), failures


# -- verification -------------------------------------------------------------

@dataclass
class IndexReport:
    orbit_id: str
    status: str
    reason: str = ""
    z0: list = field(default_factory=list)
    action: float | None = None
    sigma: int | None = None
    ind: int | None = None
    null: int | None = None
    mu_cz: HalfInteger | None = None
    residual: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = asdict(self)
        out["mu_cz"] = None if self.mu_cz is None else self.mu_cz.to_json()
        return out


DIAGNOSTIC_KEYS = ("newton_residual", "newton_iterations", "monodromy_defect", "nondegeneracy_gap",
                   "action_hamiltonian", "frame_orthonormality", "path_defect", "conjugation_error",
                   "spectral_gap", "null_tol", "grid", "steps", "regularized")


def _clean(x):
    return None if x is None else float(x) + 0.0


def verify_orbit(config: RunConfig, orbit, orbit_id: str) -> IndexReport:
    """Run both pipelines on one orbit."""
    model, pot, solver = config.model, config.potential, config.solver
    diag = dict.fromkeys(DIAGNOSTIC_KEYS)
    diag.update(newton_residual=_clean(orbit.residual), newton_iterations=orbit.newton_iterations,
                monodromy_defect=_clean(orbit.monodromy.defect),
                nondegeneracy_gap=_clean(orbit.monodromy.gap),
                action_hamiltonian=_clean(orbit.action_hamiltonian), steps=orbit.steps,
                regularized=False)
    report = IndexReport(orbit_id, "SKIPPED", z0=[_clean(v) for v in orbit.z0],
                         action=_clean(orbit.action), diagnostics=diag)
    try:
        frame = frame_for_orbit(model, pot, orbit, solver["margin"])
        report.sigma = frame.sigma
        orth = max(float(np.abs(p.T @ model.metric(x) @ p - np.eye(model.n)).max())
                   for p, x in zip(frame.phi, orbit.x))
        diag["frame_orthonormality"] = _clean(orth)
        count = morse_index(model, pot, orbit, frame, solver["grid"], solver["max_grid"],
                            solver["null_tol"])
        report.ind, report.null = count.ind, count.null
        diag.update(spectral_gap=_clean(count.gap), null_tol=_clean(count.null_tol), grid=count.N)
        coef = frame.coefficients()
        path = coef.fundamental_solution(True, solver["power"], bound=solver["defect_bound"])
        diag["path_defect"] = _clean(path.defect)
        diag["conjugation_error"] = _clean(np.abs(
            path.end - linearized_flow_in_frame(model, orbit, frame, solver["power"])).max())
        try:
            mu = cz_index(path)
        except RegularityError:
            fam = coef.family(True, solver["power"])
            mu = regularized_cz_index(fam, solver["regularize_delta"])
            diag["regularized"] = True
    except DegeneracyError as exc:
        report.reason = f"degenerate: {exc}"
        return report
    except DomainError as exc:
        report.reason = f"chart: {exc}"
        return report
    report.mu_cz = mu
    shift = (solver["power"] - 1) // 2 * 2 * report.sigma
    report.residual = int(mu) + report.ind - report.sigma - shift
    report.status = "PASS" if report.residual == 0 and report.null == 0 else "FAIL"
    if report.status == "FAIL":
        report.reason = "index identity violated"
    return report


def verify_index_theorem(config: RunConfig) -> list[IndexReport]:
    """Find orbits from the configured seeds and check ``mu_CZ + Ind - sigma = 0`` on each.

    Degenerate orbits and seeds whose Newton iteration fails are reported as
    SKIPPED.  Reports are sorted by id (orbits first, then seeds).
    """
    orbits, failures = find_orbits(config)
    ids = [f"orbit-{k:03d}" for k in range(len(orbits))]
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        reports = list(pool.map(lambda a: verify_orbit(config, *a), zip(orbits, ids)))
    for f in failures:
        reports.append(IndexReport(f"seed-{f.seed_index:03d}", "SKIPPED", f.reason, f.seed,
                                   diagnostics=dict.fromkeys(DIAGNOSTIC_KEYS)))
    return sorted(reports, key=lambda r: r.orbit_id)


def report_json(reports, config: RunConfig | None = None) -> str:
    doc = {
        "summary": {
            "pass": sum(r.status == "PASS" for r in reports),
            "fail": sum(r.status == "FAIL" for r in reports),
            "skipped": sum(r.status == "SKIPPED" for r in reports),
        },
        "reports": [r.to_json() for r in reports],
    }
    if config is not None:
        doc["config"] = config.raw
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def exit_code(reports) -> int:
    return 1 if any(r.status == "FAIL" for r in reports) else 0


# -- figure data --------------------------------------------------------------

def _symplectic_block(psi: np.ndarray) -> np.ndarray:
    """Restriction to coordinates ``(1, n+1)``; the whole matrix when ``n = 1``."""
    n = psi.shape[-1] // 2
    idx = [0, n]
    return psi[..., idx, :][..., :, idx]


def emit_figure_data(which: str, path, params: dict | None = None,
                     config: RunConfig | None = None) -> int:
    """Write ``t,theta,u,v,det1m`` for one of the reference paths or an orbit.

    ``orbit-path`` needs ``config``; ``params["orbit"]`` selects the orbit id
    (default ``orbit-000``).  For ``n > 1`` the angle and log coordinates are
    those of the ``(1, n+1)`` block while ``det1m`` uses the full matrix.
    Returns the number of data rows.
    """
    params = params or {}
    steps = int(params.get("steps", 2048))
    if which == "gamma1":
        p = gamma1_path(steps)
        times, psi, dets = p.times, p.psi, None
    elif which == "gamma2":
        p = gamma2_path(float(params.get("mu_hat", -np.pi ** 2)), steps)
        times, psi, dets = p.times, p.psi, None
    elif which == "orbit-path":
        if config is None:
            raise ConfigError("orbit-path needs a run config")
        orbits, _ = find_orbits(config)
        ids = {f"orbit-{k:03d}": o for k, o in enumerate(orbits)}
        key = params.get("orbit", "orbit-000")
        if key not in ids:
            raise ConfigError(f"no orbit {key!r}; found {sorted(ids)}")
        frame = frame_for_orbit(config.model, config.potential, ids[key], config.solver["margin"])
        p = frame.coefficients().fundamental_solution(True, config.solver["power"])
        eye = np.eye(p.psi.shape[1])
        times, psi = p.times, _symplectic_block(p.psi)
        dets = np.array([np.linalg.det(eye - m) for m in p.psi])
    else:
        raise ConfigError(f"unknown figure {which!r}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        return write_path_csv(times, psi, fh, dets)
