"""Exact batch placement by depth-first branch and bound, plus a brute-force oracle.

Unlike the greedy placer, each compute VNF may land on its own server and each
inter-node edge may take any path from the candidate table.  The objective is
monotone in the three integer counters of the network state, so the value of
a partial assignment is a valid lower bound on every completion.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .greedy import PlacementOutcome, greedy_place
from .netstate import NetworkState, Placement, UtilizationReport, Weights, delay_of, objective
from .services import ServiceRequest
from .topology import PathTable

# slack for partial delay sums, which add terms in a different order than delay_of
_DELAY_EPS = 1e-9


class SearchSpaceTooLarge(ValueError):
    """The brute-force oracle refuses instances beyond its enumeration limit."""


@dataclass(frozen=True)
class ExactConfig:
    node_limit: int | None = None
    time_limit_s: float | None = None
    prune: bool = True
    warm_start: bool = True  # seed the incumbent with the greedy solution


@dataclass
class ExactResult:
    optimal: bool  # search space exhausted (or brute force)
    feasible: bool
    placements: dict[int, Placement] = field(default_factory=dict)
    value: float = math.inf
    report: UtilizationReport | None = None
    nodes_explored: int = 0

    @property
    def infeasible(self) -> bool:
        """Proven that no joint placement of the batch exists."""
        return self.optimal and not self.feasible


class _Stop(Exception):
    pass


def _value(state: NetworkState, weights: Weights) -> float:
    return objective(state.n_used_servers, state.n_used_links, state.bw_units, state.scale, weights).u_total


def _replay(batch, state, placements) -> NetworkState | None:
    trial = state.clone()
    for svc in batch:
        p = placements[svc.id]
        if trial.check_feasible(svc, p):
            return None
        trial.apply(svc, p)
    return trial


def exact_place(
    batch: Sequence[ServiceRequest],
    state: NetworkState,
    paths: PathTable,
    weights: Weights = Weights(),
    cfg: ExactConfig = ExactConfig(),
) -> ExactResult:
    """Jointly place ``batch`` on top of ``state`` minimizing post-placement u_total.

    ``state`` is not modified.  Branching order: services in batch order, VNFs
    in topological order, servers ascending, then table paths in rank order for
    every edge entering the VNF just placed.
    """
    batch = list(batch)
    work = state.clone()
    best: dict = {"value": math.inf, "placements": None}
    if cfg.warm_start and batch:
        trial = state.clone()
        res = greedy_place(batch, trial, paths, weights)
        if all(o.success for _, o in res):
            best["value"] = _value(trial, weights)
            best["placements"] = {sid: o.placement for sid, o in res}

    servers = list(work.graph.servers)
    server_of = work.server_of
    caps, used, hosted = work.caps, work.used, work.hosted
    link_cap, link_used, link_flows, bw_scale = work.link_cap, work.link_used, work.link_flows, work.bw_scale
    scale = work.scale
    steps = [(k, i) for k, svc in enumerate(batch) for i in svc.order]
    nodes = [[None] * len(svc.vnfs) for svc in batch]
    chosen = [[None] * len(svc.edges) for svc in batch]
    delay = [svc.compute_time for svc in batch]
    counters = [work.n_used_servers, work.n_used_links, work.bw_units]
    explored = [0]
    deadline = None if cfg.time_limit_s is None else time.perf_counter() + cfg.time_limit_s

    def bound_ok() -> bool:
        if not cfg.prune:
            return True
        return objective(counters[0], counters[1], counters[2], scale, weights).u_total < best["value"]

    def leaf() -> None:
        value = objective(counters[0], counters[1], counters[2], scale, weights).u_total
        if value >= best["value"]:
            return
        placements = {
            svc.id: Placement(svc.id, tuple(nodes[k]), tuple(chosen[k])) for k, svc in enumerate(batch)
        }
        if any(delay_of(svc, placements[svc.id]) > svc.max_delay for svc in batch):
            return
        best["value"] = value
        best["placements"] = placements

    def place(step: int) -> None:
        explored[0] += 1
        if cfg.node_limit is not None and explored[0] > cfg.node_limit:
            raise _Stop
        if deadline is not None and explored[0] % 256 == 0 and time.perf_counter() > deadline:
            raise _Stop
        if step == len(steps):
            leaf()
            return
        k, i = steps[step]
        svc = batch[k]
        pinned = svc.endpoint_node(i)
        if pinned is not None:
            nodes[k][i] = pinned
            route(step, k, svc.preds[i], 0)
            return
        need = svc.vnfs[i].demand
        for node in servers:
            s = server_of[node]
            cap, u = caps[s], used[s]
            if u[0] + need[0] > cap[0] or u[1] + need[1] > cap[1] or u[2] + need[2] > cap[2]:
                continue
            u[0] += need[0]
            u[1] += need[1]
            u[2] += need[2]
            hosted[s] += 1
            if hosted[s] == 1:
                counters[0] += 1
            nodes[k][i] = node
            route(step, k, svc.preds[i], 0)
            if hosted[s] == 1:
                counters[0] -= 1
            hosted[s] -= 1
            u[0] -= need[0]
            u[1] -= need[1]
            u[2] -= need[2]
        nodes[k][i] = None

    def route(step: int, k: int, edges: tuple, j: int) -> None:
        if not bound_ok():
            return
        if j == len(edges):
            place(step + 1)
            return
        svc = batch[k]
        e = edges[j]
        a, b, bw = svc.edges[e]
        na, nb = nodes[k][a], nodes[k][b]
        if na == nb:
            chosen[k][e] = None
            route(step, k, edges, j + 1)
            return
        before = delay[k]
        for p in paths.get(na, nb):
            if before + p.delay > svc.max_delay + _DELAY_EPS:
                continue
            if any(link_used[l] + bw > link_cap[l] for l in p.links):
                continue
            for l in p.links:
                link_used[l] += bw
                link_flows[l] += 1
                if link_flows[l] == 1:
                    counters[1] += 1
                counters[2] += bw * bw_scale[l]
            delay[k] = before + p.delay
            chosen[k][e] = p
            route(step, k, edges, j + 1)
            delay[k] = before
            for l in p.links:
                counters[2] -= bw * bw_scale[l]
                if link_flows[l] == 1:
                    counters[1] -= 1
                link_flows[l] -= 1
                link_used[l] -= bw
        chosen[k][e] = None

    finished = True
    try:
        place(0)
    except _Stop:
        finished = False
    return _result(batch, state, weights, best["placements"], finished, explored[0])


def _result(batch, state, weights, placements, optimal, explored) -> ExactResult:
    if placements is None:
        return ExactResult(optimal, False, nodes_explored=explored)
    final = _replay(batch, state, placements)
    if final is None:
        raise AssertionError("exact search produced an infeasible placement")
    report = final.utilization(weights)
    return ExactResult(optimal, True, placements, report.u_total, report, explored)


def _service_options(svc: ServiceRequest, state: NetworkState, paths: PathTable, limit: int):
    """Every assignment of one service that fits the residual network on its own.

    Returns the placements and their effect on the state as rows of
    (server demand, hosted VNFs, link bandwidth, link flows).
    """
    servers = state.graph.servers
    n_s, n_l = len(servers), len(state.graph.links)
    compute = [i for i, c in enumerate(svc.is_compute) if c]
    free = [[c - u for c, u in zip(cap, used)] for cap, used in zip(state.caps, state.used)]
    link_free = [c - u for c, u in zip(state.link_cap, state.link_used)]
    raw = 0
    for z in itertools.product(range(n_s), repeat=len(compute)):
        nodes = [svc.endpoint_node(i) for i in range(len(svc.vnfs))]
        for i, s in zip(compute, z):
            nodes[i] = servers[s]
        raw += math.prod(1 if nodes[a] == nodes[b] else len(paths.get(nodes[a], nodes[b])) for a, b, _ in svc.edges)
        if raw > limit:
            raise SearchSpaceTooLarge(f"service {svc.id} alone has more than {limit} assignments")
    placements, D, H, B, F = [], [], [], [], []
    for z in itertools.product(range(n_s), repeat=len(compute)):
        demand: dict[int, list[int]] = {}
        for i, s in zip(compute, z):
            d = demand.setdefault(s, [0, 0, 0])
            for r, x in enumerate(svc.vnfs[i].demand):
                d[r] += x
        nodes = [svc.endpoint_node(i) for i in range(len(svc.vnfs))]
        for i, s in zip(compute, z):
            nodes[i] = servers[s]
        choices = [
            (None,) if nodes[a] == nodes[b] else tuple(paths.get(nodes[a], nodes[b])) for a, b, _ in svc.edges
        ]
        if any(d[r] > free[s][r] for s, d in demand.items() for r in range(3)):
            continue
        d_row = np.zeros(n_s * 3, dtype=np.int64)
        h_row = np.zeros(n_s, dtype=np.int64)
        for i, s in zip(compute, z):
            d_row[3 * s : 3 * s + 3] += svc.vnfs[i].demand
            h_row[s] += 1
        for combo in itertools.product(*choices):
            bw: dict[int, int] = {}
            flows: dict[int, int] = {}
            for (_, _, x), p in zip(svc.edges, combo):
                if p is not None:
                    for l in p.links:
                        bw[l] = bw.get(l, 0) + x
                        flows[l] = flows.get(l, 0) + 1
            if any(x > link_free[l] for l, x in bw.items()):
                continue
            placement = Placement(svc.id, tuple(nodes), combo)
            if delay_of(svc, placement) > svc.max_delay:
                continue
            b_row = np.zeros(n_l, dtype=np.int64)
            f_row = np.zeros(n_l, dtype=np.int64)
            for l, x in bw.items():
                b_row[l] = x
                f_row[l] = flows[l]
            placements.append(placement)
            D.append(d_row)
            H.append(h_row)
            B.append(b_row)
            F.append(f_row)
    if not placements:
        return [], None
    return placements, tuple(np.array(x) for x in (D, H, B, F))


def brute_force_place(
    batch: Sequence[ServiceRequest],
    state: NetworkState,
    paths: PathTable,
    weights: Weights = Weights(),
    max_space: int = 10**7,
    max_per_service: int = 200_000,
) -> ExactResult:
    """Enumerate every joint assignment of ``batch`` and keep the cheapest.

    Options are enumerated per service, then the Cartesian product is scored
    with numpy one leading combination at a time.  No bound is used.  Refuses
    when one service has more than ``max_per_service`` raw assignments or the
    product of per-service feasible options exceeds ``max_space``.
    """
    batch = list(batch)
    if not batch:
        report = state.utilization(weights)
        return ExactResult(True, True, {}, report.u_total, report, 0)
    enumerated = [_service_options(svc, state, paths, max_per_service) for svc in batch]
    options = [o for o, _ in enumerated]
    space = math.prod(len(o) for o in options)
    if space > max_space:
        raise SearchSpaceTooLarge(f"{space} joint assignments exceed the limit of {max_space}")
    if space == 0:
        return ExactResult(True, False, nodes_explored=0)
    arrays = [a for _, a in enumerated]

    cap = np.array(state.caps, dtype=np.int64).reshape(-1)
    used0 = np.array(state.used, dtype=np.int64).reshape(-1)
    hosted0 = np.array(state.hosted, dtype=np.int64)
    lcap = np.array(state.link_cap, dtype=np.int64)
    lused0 = np.array(state.link_used, dtype=np.int64)
    flows0 = np.array(state.link_flows, dtype=np.int64)
    bw_scale = np.array(state.bw_scale, dtype=np.int64)
    sc = state.scale

    D_last, H_last, B_last, F_last = arrays[-1]
    units_last = B_last @ bw_scale
    best_value, best_combo, explored = math.inf, None, 0
    for prefix in itertools.product(*(range(len(o)) for o in options[:-1])):
        d = used0.copy()
        h = hosted0.copy()
        b = lused0.copy()
        f = flows0.copy()
        for k, r in enumerate(prefix):
            D, H, B, F = arrays[k]
            d += D[r]
            h += H[r]
            b += B[r]
            f += F[r]
        ok = np.all(d + D_last <= cap, axis=1) & np.all(b + B_last <= lcap, axis=1)
        explored += len(ok)
        if not ok.any():
            continue
        n_svr = np.count_nonzero(h + H_last > 0, axis=1)
        n_link = np.count_nonzero(f + F_last > 0, axis=1)
        units = int(b @ bw_scale) - int(lused0 @ bw_scale) + state.bw_units + units_last
        u = (
            weights.svr * (n_svr / sc.n_servers)
            + weights.link * (n_link / sc.n_links)
            + weights.bw * (units / sc.bw_denominator)
        )
        u = np.where(ok, u, np.inf)
        r = int(np.argmin(u))
        if u[r] < best_value:
            best_value, best_combo = float(u[r]), (*prefix, r)
    if best_combo is None:
        return ExactResult(True, False, nodes_explored=explored)
    placements = {svc.id: options[k][r] for k, (svc, r) in enumerate(zip(batch, best_combo))}
    result = _result(batch, state, weights, placements, True, explored)
    if result.value != best_value:
        raise AssertionError("vectorized objective disagrees with the scalar objective")
    return result


def exact_placer(cfg: ExactConfig = ExactConfig()):
    """Adapt exact_place to the placer interface used by the lookahead allocator.

    When the batch cannot be placed jointly (or the budget ran out without a
    solution) it falls back to the greedy placer so that partial progress is kept.
    """

    def placer(batch, state, paths, weights=Weights()):
        batch = list(batch)
        res = exact_place(batch, state, paths, weights, cfg)
        if not res.feasible:
            return greedy_place(batch, state, paths, weights)
        out = []
        for svc in batch:
            p = res.placements[svc.id]
            state.apply(svc, p)
            inner = p.vnf_nodes[1:-1]
            host = inner[0] if inner and all(n == inner[0] for n in inner) else None
            out.append((svc.id, PlacementOutcome(True, host, p, res.value)))
        return out

    return placer
