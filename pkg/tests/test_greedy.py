from hypothesis import given, settings, strategies as st

from chainplace.greedy import FAILED, greedy_place, search, try_server
from chainplace.netstate import NetworkState, Weights
from chainplace.services import MBPS, ServiceRequest, make_service


def test_ties_go_to_lowest_server(bcube4):
    g, paths = bcube4
    state = NetworkState(g)
    [(sid, out)] = greedy_place([make_service(0, 0, 0, 6, 7)], state, paths)
    assert out.success and out.server == 0
    assert set(out.placement.vnf_nodes[1:-1]) == {0}
    assert out.objective == state.utilization().u_total


def test_active_servers_preferred_then_idle(bcube4):
    g, paths = bcube4
    state = NetworkState(g)
    batch = [make_service(i, 0, 0, 6, 7) for i in range(3)]
    res = greedy_place(batch, state, paths)
    assert [o.server for _, o in res] == [0, 0, 1]  # two chains fill 78 of 96 vcpu on server 0


def test_failure_leaves_state_alone(bcube4):
    g, paths = bcube4
    state = NetworkState(g)
    greedy_place([make_service(i, 0, 0, 6, 7) for i in range(8)], state, paths)
    before = state.snapshot()
    [(_, out)] = greedy_place([make_service(8, 0, 0, 6, 7)], state, paths)
    assert out == FAILED
    assert state.snapshot() == before


def test_bandwidth_claimed_within_one_attempt(bcube4):
    g, paths = bcube4
    chain = make_service(0, 0, 0, 6, 7)
    # 600 Mbps in and 600 Mbps out: server 0's uplinks can carry each once but
    # a second service must take other links or another server
    heavy = ServiceRequest(0, chain.vnfs, tuple((a, b, 600 * MBPS) for a, b, _ in chain.edges), 1800.0, 0, 0, 6, 7)
    state = NetworkState(g)
    placement, load = try_server(heavy, 0, state, paths)
    assert max(load.bw.values()) <= 1000 * MBPS
    state.apply(heavy, placement)
    again = ServiceRequest(1, heavy.vnfs, heavy.edges, 1800.0, 0, 0, 6, 7)
    attempt = try_server(again, 0, state, paths)
    if attempt is not None:
        assert not state.check_feasible(again, attempt[0])


def test_delay_budget_respected(bcube4):
    g, paths = bcube4
    chain = make_service(0, 0, 0, 6, 7)
    tight = ServiceRequest(0, chain.vnfs, chain.edges, 1655.15, 0, 0, 6, 7)
    # every server is at least 4 hops from the two cores: 1655 + 0.2 ms
    assert search(tight, g.servers, NetworkState(g), paths) == FAILED


def _oracle_search(service, candidates, state, paths, weights):
    best = None
    for server in candidates:
        attempt = try_server(service, server, state, paths)
        if attempt is None:
            continue
        trial = state.clone()
        trial.apply(service, attempt[0])
        key = (trial.utilization(weights).u_total, server)
        best = key if best is None or key < best else best
    return best


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 7), st.randoms(use_true_random=False))
def test_search_matches_apply_and_measure(fat_tree16, n_pre, rnd):
    g, paths = fat_tree16
    state = NetworkState(g)
    cores = g.core_switches
    pre = []
    for i in range(n_pre):
        a, b = rnd.sample(cores, 2)
        pre.append(make_service(i, 0, 0, a, b))
    greedy_place(pre, state, paths)
    a, b = rnd.sample(cores, 2)
    svc = make_service(99, 0, 0, a, b)
    out = search(svc, g.servers, state, paths, Weights())
    expected = _oracle_search(svc, g.servers, state, paths, Weights())
    assert (out.objective, out.server) == expected


def test_whole_chain_on_one_server(fat_tree16):
    g, paths = fat_tree16
    state = NetworkState(g)
    cores = g.core_switches
    res = greedy_place([make_service(i, 0, 0, cores[i % 4], cores[(i + 1) % 4]) for i in range(20)], state, paths)
    for _, out in res:
        if out.success:
            assert len(set(out.placement.vnf_nodes[1:-1])) == 1
    assert sum(o.success for _, o in res) == 20
