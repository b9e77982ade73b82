"""Greedy placement: each service goes wholly onto one server, active servers first."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .netstate import Load, NetworkState, Placement, Weights, delay_of
from .services import ServiceRequest
from .topology import PathTable


@dataclass(frozen=True)
class PlacementOutcome:
    success: bool
    server: int | None = None
    placement: Placement | None = None
    objective: float | None = None


FAILED = PlacementOutcome(False)


def try_server(service: ServiceRequest, server: int, state: NetworkState, paths: PathTable):
    """Tentatively host every compute VNF of ``service`` on ``server``.

    Edges are routed in topological order over the first table path whose
    links still have room, counting bandwidth already claimed by earlier edges
    of this same attempt.  Returns ``(placement, load)`` or None.
    """
    s = state.server_of[server]
    if s < 0:
        return None
    need = list(service.compute_demand)
    n_hosted = sum(service.is_compute)
    cap, used = state.caps[s], state.used[s]
    if used[0] + need[0] > cap[0] or used[1] + need[1] > cap[1] or used[2] + need[2] > cap[2]:
        return None

    last = len(service.vnfs) - 1
    nodes = [server] * len(service.vnfs)
    nodes[0] = service.ingress_node
    nodes[last] = service.egress_node
    link_used, link_cap = state.link_used, state.link_cap
    claimed: dict[int, int] = {}
    flows: dict[int, int] = {}
    chosen: list = [None] * len(service.edges)
    preds = service.preds
    for i in service.order:
        for e in preds[i]:
            a, b, bw = service.edges[e]
            na, nb = nodes[a], nodes[b]
            if na == nb:
                continue
            for p in paths.get(na, nb):
                if all(link_used[l] + claimed.get(l, 0) + bw <= link_cap[l] for l in p.links):
                    break
            else:
                return None
            chosen[e] = p
            for l in p.links:
                claimed[l] = claimed.get(l, 0) + bw
                flows[l] = flows.get(l, 0) + 1
    placement = Placement(service.id, tuple(nodes), tuple(chosen))
    if delay_of(service, placement) > service.max_delay:
        return None
    load = Load({s: need} if n_hosted else {}, {s: n_hosted} if n_hosted else {}, claimed, flows)
    return placement, load


def search(
    service: ServiceRequest,
    candidates: Iterable[int],
    state: NetworkState,
    paths: PathTable,
    weights: Weights = Weights(),
) -> PlacementOutcome:
    """Best single-server placement among ``candidates`` by post-placement
    objective; ties go to the lowest server id."""
    best = None
    for server in candidates:
        attempt = try_server(service, server, state, paths)
        if attempt is None:
            continue
        placement, load = attempt
        key = (state.evaluate(load, weights).u_total, server)
        if best is None or key < best[0]:
            best = (key, placement)
    if best is None:
        return FAILED
    (value, server), placement = best
    return PlacementOutcome(True, server, placement, value)


def greedy_place(
    batch: Sequence[ServiceRequest],
    state: NetworkState,
    paths: PathTable,
    weights: Weights = Weights(),
) -> list[tuple[int, PlacementOutcome]]:
    """Place ``batch`` in order, applying each success to ``state`` immediately.

    Active servers are searched first; only when none admits the service are
    idle (or sleeping) servers tried.
    """
    results = []
    for service in batch:
        outcome = search(service, state.active_servers(), state, paths, weights)
        if not outcome.success:
            outcome = search(service, state.idle_servers(), state, paths, weights)
        if outcome.success:
            state.apply(service, outcome.placement)
        results.append((service.id, outcome))
    return results
