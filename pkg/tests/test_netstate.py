from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainplace.netstate import (
    InfeasiblePlacement,
    MalformedPlacement,
    NetworkState,
    Placement,
    PowerState,
    Weights,
    delay_of,
    placement_from_dict,
)
from chainplace.services import MBPS, ServiceRequest, make_service


def single_server(svc, server, paths):
    nodes = (svc.ingress_node,) + (server,) * 5 + (svc.egress_node,)
    return Placement(svc.id, nodes, (paths.get(svc.ingress_node, server)[0],) + (None,) * 4 + (paths.get(server, svc.egress_node)[0],))


def test_objective_by_hand(bcube4):
    g, paths = bcube4
    state = NetworkState(g)
    svc = make_service(0, 0, 0, 6, 7)
    state.apply(svc, single_server(svc, 0, paths))
    # core 6 -> server 0 is one hop; server 0 -> core 7 goes 0->4->1->7
    links = 1 + 3
    expected = Fraction(1, 4) / 3 + Fraction(links, 16) / 3 + Fraction(links, 10) / 16 / 3
    u = state.utilization()
    assert (u.u_svr, u.u_link, u.u_bw) == (0.25, 0.25, 0.025)
    assert u.u_total == pytest.approx(float(expected), abs=1e-15)
    assert state.x.tolist() == [1, 0, 0, 0]
    assert state.y.sum() == links


def test_weights_validation():
    with pytest.raises(ValueError):
        Weights(0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        Weights(-0.1, 0.6, 0.5)
    assert Weights(1, 0, 0).svr == 1


def test_infeasible_apply_leaves_state_untouched(bcube4):
    g, paths = bcube4
    state = NetworkState(g)
    services = [make_service(i, 0, 0, 6, 7) for i in range(4)]
    for svc in services[:2]:
        state.apply(svc, single_server(svc, 0, paths))
    before = state.snapshot()
    third = single_server(services[2], 0, paths)
    kinds = {v.constraint for v in state.check_feasible(services[2], third)}
    assert kinds == {"server-capacity"}  # 3 x 39 vcpu > 96
    with pytest.raises(InfeasiblePlacement):
        state.apply(services[2], third)
    assert state.snapshot() == before


def test_duplicate_and_unknown(bcube4):
    g, paths = bcube4
    state = NetworkState(g)
    svc = make_service(0, 0, 0, 6, 7)
    state.apply(svc, single_server(svc, 0, paths))
    with pytest.raises(ValueError):
        state.apply(svc, single_server(svc, 1, paths))
    with pytest.raises(KeyError):
        state.release(9)


def test_link_capacity_violation(bcube4):
    g, paths = bcube4
    state = NetworkState(g)
    chain = make_service(0, 0, 0, 6, 7)
    fat = ServiceRequest(0, chain.vnfs, tuple((a, b, 600 * MBPS) for a, b, _ in chain.edges), 1800.0, 0, 0, 6, 7)
    # bounce the chain between two servers so one link carries two 600 Mbps edges
    nodes = (6, 0, 1, 0, 0, 0, 7)
    p01, p10 = paths.get(0, 1)[0], paths.get(1, 0)[0]
    p = Placement(0, nodes, (paths.get(6, 0)[0], p01, p10, None, None, paths.get(0, 7)[0]))
    kinds = {v.constraint for v in state.check_feasible(fat, p)}
    assert "link-capacity" in kinds


def test_delay_violation(bcube4):
    g, paths = bcube4
    chain = make_service(0, 0, 0, 6, 7)
    tight = ServiceRequest(0, chain.vnfs, chain.edges, 1655.1, 0, 0, 6, 7)
    p = single_server(tight, 0, paths)
    assert delay_of(tight, p) == pytest.approx(1655.2)
    assert [v.constraint for v in NetworkState(g).check_feasible(tight, p)] == ["delay"]


def test_node_kind_violations(bcube4):
    g, paths = bcube4
    svc = make_service(0, 0, 0, 6, 7)
    # a compute VNF on an edge switch (node 4)
    nodes = (6, 0, 4, 0, 0, 0, 7)
    p = Placement(0, nodes, (paths.get(6, 0)[0], g_path(g, [0, 4]), g_path(g, [4, 0]), None, None, paths.get(0, 7)[0]))
    kinds = {v.constraint for v in NetworkState(g).check_feasible(svc, p)}
    assert "compute-on-server" in kinds


def g_path(g, nodes):
    from chainplace.topology import Path

    ids = [next(l.id for l in g.links if (l.src, l.dst) == pair) for pair in zip(nodes, nodes[1:])]
    return Path(nodes[0], nodes[-1], tuple(ids), tuple(nodes), 0.05 * len(ids))


def test_malformed_placements(bcube4):
    g, paths = bcube4
    state = NetworkState(g)
    svc = make_service(0, 0, 0, 6, 7)
    good = single_server(svc, 0, paths)
    with pytest.raises(MalformedPlacement):
        state.check_feasible(svc, Placement(0, good.vnf_nodes[:-1], good.edge_paths))
    with pytest.raises(MalformedPlacement):  # ingress moved off its declared switch
        state.check_feasible(svc, Placement(0, (7,) + good.vnf_nodes[1:], good.edge_paths))
    with pytest.raises(MalformedPlacement):  # path for the wrong pair
        state.check_feasible(svc, Placement(0, good.vnf_nodes, (paths.get(6, 1)[0],) + good.edge_paths[1:]))
    with pytest.raises(MalformedPlacement):  # missing path between distinct nodes
        state.check_feasible(svc, Placement(0, good.vnf_nodes, (None,) + good.edge_paths[1:]))
    with pytest.raises(MalformedPlacement):
        state.check_feasible(make_service(1, 0, 0, 6, 7), good)


def test_power_states(bcube4):
    g, paths = bcube4
    state = NetworkState(g, off_after=2)
    svc = make_service(0, 0, 0, 6, 7)
    state.apply(svc, single_server(svc, 2, paths))
    assert state.power[2] is PowerState.ACTIVE and state.activations == 1
    state.release(0)
    assert state.power[2] is PowerState.IDLE
    state.tick()
    assert state.power[2] is PowerState.IDLE
    state.tick()
    assert state.power[2] is PowerState.OFF
    state.apply(svc, single_server(svc, 2, paths))
    assert state.activations == 2
    assert state.active_servers() == [2] and state.idle_servers() == [0, 1, 3]


def test_placement_json_round_trip(bcube4):
    g, paths = bcube4
    svc = make_service(0, 0, 0, 6, 7)
    p = single_server(svc, 3, paths)
    doc = p.to_dict(svc)
    assert doc["edge_to_path"]["2-3"] == "colocated"
    again = placement_from_dict(doc, svc, g)
    assert again.vnf_nodes == p.vnf_nodes
    assert [q.links if q else None for q in again.edge_paths] == [q.links if q else None for q in p.edge_paths]
    assert delay_of(svc, again) == pytest.approx(delay_of(svc, p))


def test_clone_is_independent(bcube4):
    g, paths = bcube4
    state = NetworkState(g)
    other = state.clone()
    svc = make_service(0, 0, 0, 6, 7)
    other.apply(svc, single_server(svc, 0, paths))
    assert state.n_used_servers == 0 and not state.placements
    assert state.used == [[0, 0, 0]] * 4
    assert other != state and state == NetworkState(g)


@st.composite
def placements(draw, graph, paths, sid):
    a, b = draw(st.lists(st.sampled_from(graph.core_switches), min_size=2, max_size=2, unique=True))
    svc = make_service(sid, 0, 0, a, b)
    nodes = [a] + [draw(st.sampled_from(graph.servers)) for _ in range(5)] + [b]
    chosen = tuple(None if x == y else draw(st.sampled_from(paths.get(x, y))) for x, y in zip(nodes, nodes[1:]))
    return svc, Placement(sid, tuple(nodes), chosen)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_apply_order_does_not_matter(bcube4, data):
    g, paths = bcube4
    items = [data.draw(placements(g, paths, i)) for i in range(3)]
    forward, backward = NetworkState(g), NetworkState(g)
    ok = []
    for svc, p in items:
        if not forward.check_feasible(svc, p):
            forward.apply(svc, p)
            ok.append((svc, p))
    for svc, p in reversed(ok):
        backward.apply(svc, p)
    assert forward.utilization() == backward.utilization()
    assert np.array_equal(forward.residual, backward.residual)
    assert np.array_equal(forward.link_residual, backward.link_residual)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_evaluate_predicts_apply(bcube4, data):
    g, paths = bcube4
    state = NetworkState(g)
    for i in range(3):
        svc, p = data.draw(placements(g, paths, i))
        if state.check_feasible(svc, p):
            continue
        predicted = state.evaluate(state.load_of(svc, p), Weights())
        state.apply(svc, p)
        assert state.utilization() == predicted
