"""
Utilization against the number of observed objectives
======================================================

A coarse version of the full grid (the CLI `sweep` command runs all of it).
Cells with the same K_obj reuse the same traces, so M values are paired.
"""
from chainplace import ExperimentConfig, TraceConfig, sweep
from chainplace.sim import BCUBE_16, FAT_TREE_16, VL2_16

rows = []
for topo in (FAT_TREE_16, BCUBE_16, VL2_16):
    rows += sweep(ExperimentConfig(topo, TraceConfig(0)), [20, 60, 100], [0, 1], repetitions=2)

print(f"{'topology':16s} {'K_obj':>5s} {'M=0':>8s} {'M=1':>8s} {'gain':>6s}")
pairs = {}
for r in rows:
    pairs.setdefault((r.topology, r.k_obj), {})[r.M] = r.mean_u
for (topo, k), by_m in pairs.items():
    print(f"{topo:16s} {k:5d} {by_m[0]:8.4f} {by_m[1]:8.4f} {100 * (by_m[0] - by_m[1]) / by_m[0]:5.1f}%")
