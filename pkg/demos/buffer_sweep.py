"""How buffer depth trades packet loss against queueing delay on a 4x4 mesh.

Runs the shipped experiment (measured flow (0,0) -> (3,3) plus background
traffic) for every buffer size and application rate, then prints the drop
percentage and the mean end-to-end delay of the measured flow.

    python demos/buffer_sweep.py [path/to/config.ini]
"""

import sys
from pathlib import Path

from nocqos import experiment

config = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parents[1] / "configs" / "mesh_4x4.ini"
cfg = experiment.load_config(config)
rows = experiment.cmd_sweep(cfg)
col = {name: i for i, name in enumerate(experiment.SIM_COLUMNS)}

rates = cfg.application_rates
print(f"{'buffer':>8} | " + " | ".join(f"{r / 1e9:>11.2f} GB/s" for r in rates))
print("-" * (11 + 19 * len(rates)))
for b in cfg.buffer_sizes:
    cells = []
    for r in rates:
        row = next(x for x in rows if int(x[0]) == b and float(x[1]) == r)
        drop = float(row[col["drop_pct"]])
        eed = float(row[col["eed_mean_cycles"]])
        cells.append(f"{drop:5.1f}% {eed:6.1f}cy")
    print(f"{b:>6}fl | " + " | ".join(f"{c:>16}" for c in cells))

# Small buffers shed load; deep buffers keep packets but let queues (and delay)
# grow once the ejection port at (3,3) saturates.
