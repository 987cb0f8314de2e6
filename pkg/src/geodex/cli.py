"""Command line interface.

Exit codes: 0 success, 1 a verification failed, 2 bad configuration or
arguments, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness
from .errors import ConfigError, GeodexError, NumericsError, ParameterError
from .framing import frame_for_orbit
from .maslov import cz_index
from .specflow import build_proof_families, family_endpoint_paths, scalar_family, spectral_flow
from .symplectic import gamma1_path, gamma2_path, matrix_exponential_path

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICS = 0, 1, 2, 3


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--steps", type=int, help="RK4 steps for orbits and paths")
    p.add_argument("--grid", type=int, help="initial grid for the Morse index")
    p.add_argument("--threads", type=int, help="worker thread cap")


def _load(args) -> harness.RunConfig:
    config = harness.load_config(args.config)
    return harness.override(config, steps=args.steps, grid=args.grid, threads=args.threads)


def _write(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_find_orbits(args) -> int:
    config = _load(args)
    orbits, failures = harness.find_orbits(config)
    doc = {
        "orbits": [{"id": f"orbit-{k:03d}", "z0": [float(v) + 0.0 for v in o.z0],
                    "action": o.action, "residual": o.residual,
                    "nondegeneracy_gap": o.monodromy.gap}
                   for k, o in enumerate(orbits)],
        "failed_seeds": [{"id": f"seed-{f.seed_index:03d}", "seed": f.seed, "reason": f.reason}
                         for f in failures],
    }
    _write(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    config = _load(args)
    reports = harness.verify_index_theorem(config)
    text = harness.report_json(reports, config)
    target = args.report or config.outputs.get("report")
    if target:
        with open(target, "w") as fh:
            fh.write(text)
    for r in reports:
        mu = "-" if r.mu_cz is None else str(r.mu_cz)
        print(f"{r.orbit_id}  {r.status:7s}  sigma={r.sigma}  Ind={r.ind}  mu_CZ={mu}  "
              f"residual={r.residual}  {r.reason}".rstrip())
    for fig in config.outputs.get("figures", []):
        harness.emit_figure_data(fig["which"], fig["path"], fig, config)
    return harness.exit_code(reports)


def cmd_cz_path(args) -> int:
    if args.which == "gamma1":
        path = gamma1_path(args.steps)
    elif args.which == "gamma2":
        path = gamma2_path(args.mu_hat, args.steps)
    else:
        if args.matrix is None:
            raise ConfigError("--matrix is required for 'exp'")
        path = matrix_exponential_path(np.array(json.loads(args.matrix), dtype=float), args.steps)
    print(cz_index(path))
    return EXIT_OK


def cmd_spectral_flow(args) -> int:
    if args.arctan is not None:
        res = spectral_flow(scalar_family(np.arctan, (-args.arctan, args.arctan)))
        print(json.dumps({"flow": res.flow}))
        return EXIT_OK
    if args.config is None:
        raise ConfigError("spectral-flow needs --config or --arctan")
    config = harness.load_config(args.config)
    orbits, _ = harness.find_orbits(config)
    out = []
    for k, orbit in enumerate(orbits):
        frame = frame_for_orbit(config.model, config.potential, orbit, config.solver["margin"])
        fams = build_proof_families(frame, N=config.solver["grid"])
        row = {"id": f"orbit-{k:03d}", "sigma": frame.sigma, "mu_hat": fams.mu_hat}
        for key, fam in (("family_a", fams.family_a), ("family_b", fams.family_b)):
            res = spectral_flow(fam, config.solver["lambda_steps"])
            mu0 = cz_index(family_endpoint_paths(fam, 0.0))
            mu1 = cz_index(family_endpoint_paths(fam, 1.0))
            row[key] = {"flow": res.flow, "cz_start": int(mu0), "cz_end": int(mu1),
                        "crossings": [[c.lam, c.dim, c.signature] for c in res.crossings]}
        out.append(row)
    print(json.dumps(out, indent=2, sort_keys=True))
    ok = all(r[k]["flow"] == r[k]["cz_end"] - r[k]["cz_start"] for r in out
             for k in ("family_a", "family_b"))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_emit_figure(args) -> int:
    config = harness.load_config(args.config) if args.config else None
    params = {"steps": args.steps, "orbit": args.orbit}
    if args.mu_hat is not None:
        params["mu_hat"] = args.mu_hat
    rows = harness.emit_figure_data(args.which, args.out, params, config)
    print(f"wrote {rows} rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geodex",
        description="Morse and Conley-Zehnder indices of perturbed closed geodesics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("find-orbits", help="shoot for 1-periodic orbits")
    _solver_flags(p)
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_find_orbits)

    p = sub.add_parser("verify", help="check mu_CZ = -Ind + sigma on every orbit")
    _solver_flags(p)
    p.add_argument("--report", help="JSON report path (overrides outputs.report)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cz-path", help="Conley-Zehnder index of a reference path")
    p.add_argument("--which", choices=["gamma1", "gamma2", "exp"], required=True)
    p.add_argument("--mu-hat", type=float, default=-np.pi ** 2)
    p.add_argument("--matrix", help="JSON symmetric matrix S for exp(-t J0 S)")
    p.add_argument("--steps", type=int, default=2048)
    p.set_defaults(func=cmd_cz_path)

    p = sub.add_parser("spectral-flow", help="spectral flow of the homotopy families")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--arctan", type=float, help="flow of s -> arctan(s) on [-T, T]")
    p.set_defaults(func=cmd_spectral_flow)

    p = sub.add_parser("emit-figure", help="write t,theta,u,v,det1m CSV")
    p.add_argument("--which", choices=["gamma1", "gamma2", "orbit-path"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mu-hat", type=float)
    p.add_argument("--steps", type=int, default=2048)
    p.add_argument("--config", help="JSON config (orbit-path only)")
    p.add_argument("--orbit", default="orbit-000")
    p.set_defaults(func=cmd_emit_figure)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericsError, GeodexError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
