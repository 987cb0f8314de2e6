"""The two reference paths with index +1, plus CSV traces for plotting.

The CSV columns are ``t, theta, u, v, det(1 - Psi)`` where ``(theta, u, v)``
place the 2x2 block of the path in the open solid torus Sp(2).
"""
from pathlib import Path

import numpy as np

from geodex import harness
from geodex.maslov import cz_index, find_crossings
from geodex.symplectic import gamma1_path, gamma2_path, matrix_exponential_path

OUT = Path(__file__).parent / "output"
MU_HAT = -np.pi ** 2

for name, path in (("gamma1", gamma1_path()), ("gamma2", gamma2_path(MU_HAT))):
    crossings = [(round(c.t, 6), c.dim, c.signature) for c in find_crossings(path)]
    print(f"{name}: mu_CZ = {cz_index(path)}, crossings (t, dim, sign) = {crossings}")
    rows = harness.emit_figure_data(name, OUT / f"{name}.csv", {"mu_hat": MU_HAT})
    print(f"  wrote {rows} samples to {OUT / (name + '.csv')}")

# rotations exp(-t J0 S) with S = -a I: the index jumps by 2 each time a passes 2 pi k
for a in (1.0, 3.0, 7.0, 13.0):
    print(f"rotation by {a:5.1f}: mu_CZ = {cz_index(matrix_exponential_path(-a * np.eye(2)))}")
