"""Hyperparameter sensitivity at a glance.

Sweeps the two rate scales over a small grid and scores each cell by the
fraction of seeded runs whose learned indices land near the exact ones.
QGI keeps a much larger convergent region than QWI, whose passive-action
updates feed the subsidy estimate with extra noise.
"""

from pathlib import Path

from gittins.config import resolve
from gittins.harness import grid_search

OUT = Path(__file__).parent / "output" / "map"

# 0.025 is the discriminating tolerance at this scale: looser ones saturate
# for both algorithms, tighter ones empty the subsidy learner's map entirely
values = [0.1, 0.2, 0.4, 0.8]
for algo in ("qgi", "qwi"):
    cfg = resolve(
        {
            "env_kind": "toy",
            "algo": algo,
            "grid_x_values": values,
            "grid_y_values": values,
            "grid_runs": 5,
            "grid_deltas": [0.025],
            "grid_steps": 20_000,
            "run_seeds": [1],
        }
    )
    rows, path = grid_search(cfg, out_path=OUT / f"map_{algo}.csv")
    nonzero = sum(1 for r in rows if r[3] > 0)
    print(f"{algo}: {nonzero}/{len(rows)} cells show any convergence at delta=0.025")
    for x, y, d, frac in rows:
        print(f"  x={x:.1f} y={y:.1f}  fraction {frac:.1f}")
    print(f"wrote {path}")
