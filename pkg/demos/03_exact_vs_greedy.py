"""
When splitting a chain pays off
===============================

Greedy keeps a whole chain on one server.  The exact search may spread the
VNFs out, and on a loaded network that can switch on fewer links or fit
a chain that no single server could take.
"""
from chainplace import NetworkState, brute_force_place, exact_place, greedy_place, random_instance
from chainplace.sim import BCUBE_4, network

graph, paths = network(BCUBE_4)

for seed in (5, 11, 17):
    inst = random_instance(seed, graph, paths)
    state = inst.state()
    print(f"seed {seed}: {len(inst.batch)} service(s), free vCPU per server {[96 - u[0] for u in state.used]}")

    trial = state.clone()
    outcomes = greedy_place(inst.batch, trial, paths)
    if all(o.success for _, o in outcomes):
        print(f"  greedy  u_total={trial.utilization().u_total:.4f} servers={[o.server for _, o in outcomes]}")
    else:
        print("  greedy  could not place the batch")

    exact = exact_place(inst.batch, state, paths)
    oracle = brute_force_place(inst.batch, state, paths)
    print(f"  exact   u_total={exact.value:.4f} after {exact.nodes_explored} nodes (brute force {oracle.value:.4f})")
    for svc in inst.batch:
        print(f"    service {svc.id} VNF hosts {exact.placements[svc.id].vnf_nodes}")
