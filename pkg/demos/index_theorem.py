"""Check mu_CZ = -Ind + sigma on every bundled configuration.

    python demos/index_theorem.py
"""
from pathlib import Path

from geodex import harness

HERE = Path(__file__).parent

for name in ("torus", "klein", "sphere", "free_torus"):
    config = harness.load_config(HERE / "configs" / f"{name}.json")
    reports = harness.verify_index_theorem(config)
    print(f"== {name}")
    for r in reports:
        if r.status == "SKIPPED":
            print(f"  {r.orbit_id}  SKIPPED  {r.reason.splitlines()[0][:70]}")
            continue
        print(f"  {r.orbit_id}  {r.status}  sigma={r.sigma}  Ind={r.ind}  mu_CZ={r.mu_cz}  "
              f"action={r.action:+.4f}")
    out = HERE / "output" / f"{name}_report.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(harness.report_json(reports, config))
