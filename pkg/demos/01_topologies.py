"""
Three datacenter fabrics and their candidate paths
==================================================

Build the 16-server Fat-Tree, BCube and VL2 networks, count what they
contain, and look at the ranked path table between a core switch and a server.
"""
from collections import Counter

from chainplace import build_bcube, build_fat_tree, build_vl2, k_shortest_paths

graphs = [build_fat_tree(4), build_bcube(4, 1), build_vl2(4, 4)]

for g in graphs:
    kinds = Counter(k.value for k in g.kinds)
    print(f"{g.name:18s} nodes={g.node_count:3d} directed links={len(g.links):3d}  {dict(kinds)}")

# paths are precomputed once per graph, up to d per node pair
ft = graphs[0]
table = k_shortest_paths(ft, 8)
core, server = ft.core_switches[0], ft.servers[5]
print(f"\n{len(table)} ordered pairs in the Fat-Tree path table")
print(f"paths from core {core} to server {server}:")
for p in table.get(core, server):
    print(f"  {p.hop_count} hops  nodes={p.nodes}  delay={p.delay:.2f} ms")

# BCube(2,1) is an 8-node ring, so every pair has exactly two loop-free paths
ring = k_shortest_paths(build_bcube(2, 1), 8)
print("\nbcube(2,1) paths per pair:", Counter(len(ring[pair]) for pair in ring.pairs()))
