"""Spectral flow of the two homotopies that move the Jacobi operator of an
orbit to a positive constant-coefficient operator.

The flow of the first family equals the Morse index and matches the
difference of Conley-Zehnder indices of its endpoint paths.
"""
from pathlib import Path

import numpy as np

from geodex import harness
from geodex.framing import frame_for_orbit
from geodex.maslov import cz_index
from geodex.specflow import build_proof_families, family_endpoint_paths, scalar_family, spectral_flow

HERE = Path(__file__).parent

print("arctan on [-2, 2]: flow =", spectral_flow(scalar_family(np.arctan, (-2.0, 2.0))).flow)

for name in ("torus", "klein"):
    config = harness.load_config(HERE / "configs" / f"{name}.json")
    orbits, _ = harness.find_orbits(config)
    orbit = orbits[-1]
    frame = frame_for_orbit(config.model, config.potential, orbit)
    fams = build_proof_families(frame)
    print(f"== {name}, orbit through {np.round(orbit.x[0], 3)}, sigma = {frame.sigma}, "
          f"mu_hat = {fams.mu_hat:.3f}")
    for fam in (fams.family_a, fams.family_b):
        res = spectral_flow(fam)
        mu0 = cz_index(family_endpoint_paths(fam, 0.0))
        mu1 = cz_index(family_endpoint_paths(fam, 1.0))
        marks = ", ".join(f"{c.lam:.4f}({c.signature:+d})" for c in res.crossings) or "none"
        print(f"  {fam.name:15s} flow={res.flow:+d}  cz: {mu0} -> {mu1}  crossings: {marks}")
