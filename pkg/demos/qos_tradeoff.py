"""Pick a buffer size by scoring loss and delay together.

Both parameters are min-max normalised across the buffer sizes of one sweep
and blended with weights alpha.  The weights decide which end of the range is
punished: a loss-averse mix writes off shallow buffers, a delay-averse mix
writes off deep ones.  On the shipped scenario the middle (8 flits) wins for
every mix, but by very different margins.
"""

from pathlib import Path

from nocqos import experiment

cfg = experiment.load_config(Path(__file__).parents[1] / "configs" / "mesh_4x4.ini")
sweep_csv = experiment.render_csv(cfg, experiment.SIM_COLUMNS, experiment.cmd_sweep(cfg))
rows = experiment.cmd_qos(cfg, sweep_csv)

target = repr(1.9e9)
curves = {}
for rate, alphas, buffer, q, *_ in rows:
    if rate == target:
        curves.setdefault(alphas, []).append((float(buffer), float(q)))

print("Q per buffer size at 1.9 GB/s (alpha_drop alpha_delay)")
for alphas, curve in curves.items():
    best = max(curve, key=lambda bq: bq[1])
    trace = "  ".join(f"{int(b):>2}:{q:.3f}" for b, q in curve)
    print(f"  {alphas:>8}  {trace}   best = {int(best[0])} flits")
