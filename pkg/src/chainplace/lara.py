"""Lookahead allocation over the next M predictable slots.

At the current slot ``t`` the planner decides placements for services that
start at ``t+1``.  With ``M >= 1`` it first plans the farthest slot ``t+M`` on
a copy of the real state, then walks back towards ``t+1``; placements chosen
for long-lived services at a far slot are carried ("remain") and pinned when
planning closer slots.  Services finishing before a planned slot are freed in
that slot's copy, which is what lets the planner pack new services into
capacity that is about to be released.

With ``M == 0`` there is no lookahead: the placer runs on the real state while
the services ending this slot still hold their resources.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .greedy import PlacementOutcome, greedy_place
from .netstate import NetworkState, Placement, Weights
from .services import ServiceRequest, Trace
from .topology import PathTable

Placer = Callable[[Sequence[ServiceRequest], NetworkState, PathTable, Weights], list]


@dataclass(frozen=True)
class ServiceSets:
    slot: int
    new: frozenset
    active: frozenset
    used: frozenset
    ended: frozenset
    remain_prev: frozenset  # active but not yet allocated
    remain: frozenset  # carried from the farther slot, placements pinned
    allocate: frozenset

    @property
    def next_remain(self) -> frozenset:
        return (self.remain_prev | self.remain) - self.new

    def to_dict(self) -> dict:
        return {k: sorted(getattr(self, k)) if k != "slot" else self.slot for k in self.__dataclass_fields__}


def classify(trace: Trace, slot: int, committed: set | frozenset, remain: frozenset = frozenset()) -> ServiceSets:
    new = frozenset(trace.starting_at(slot))
    active = frozenset(trace.active_at(slot))
    used = active & frozenset(committed)
    ended = frozenset(k for k in committed if k < len(trace) and trace[k].end_slot < slot)
    remain_prev = active - used
    allocate = (remain_prev | new) - remain
    return ServiceSets(slot, new, active, used, ended, remain_prev, frozenset(remain), allocate)


@dataclass
class PlanResult:
    slot: int  # the slot whose batch is committed
    committed: list = field(default_factory=list)  # (service id, PlacementOutcome)
    released: list = field(default_factory=list)
    tentative: dict = field(default_factory=dict)  # service id -> Placement, all planned slots
    planned: list = field(default_factory=list)  # (ServiceSets, UtilizationReport) farthest first
    planning_failures: list = field(default_factory=list)  # (slot, service id)

    @property
    def unplaced(self) -> list[int]:
        return [sid for sid, o in self.committed if not o.success]

    def committed_placements(self) -> dict[int, Placement]:
        return {sid: o.placement for sid, o in self.committed if o.success}

    def to_dict(self) -> dict:
        return {
            "slot": self.slot,
            "committed": {
                str(sid): (o.placement.to_dict() if o.success else None) for sid, o in self.committed
            },
            "released": list(self.released),
            "tentative": {str(sid): p.to_dict() for sid, p in sorted(self.tentative.items())},
            "planned": [{"sets": s.to_dict(), "utilization": u._asdict()} for s, u in self.planned],
            "planning_failures": [list(x) for x in self.planning_failures],
        }


def pending_services(state: NetworkState, trace: Trace, slot: int) -> list[int]:
    return [k for k in trace.active_at(slot) if k not in state.placements]


def finishing(state: NetworkState, slot: int) -> list[int]:
    """Placed services whose window closes before ``slot``."""
    return sorted(sid for sid, (svc, _) in state.placements.items() if svc.end_slot < slot)


def lara_plan(
    state: NetworkState,
    trace: Trace,
    t: int,
    M: int,
    paths: PathTable,
    weights: Weights = Weights(),
    placer: Placer = greedy_place,
) -> PlanResult:
    """Plan slots t+M .. t+1 on copies of ``state``; ``state`` is not touched."""
    if M < 0:
        raise ValueError("lookahead M must be >= 0")
    result = PlanResult(t + 1)
    committed = set(state.placements)
    remain: frozenset = frozenset()
    tentative: dict[int, Placement] = {}
    for m in range(M, 0, -1):
        tm = t + m
        sets = classify(trace, tm, committed, remain)
        plan_state = state.clone()
        for sid in finishing(plan_state, tm):
            plan_state.release(sid)
        allocate = set(sets.allocate)
        for sid in sorted(sets.remain):
            pinned = tentative.get(sid)
            if pinned is not None and not plan_state.check_feasible(trace[sid], pinned):
                plan_state.apply(trace[sid], pinned)
            else:
                allocate.add(sid)
        batch = [trace[sid] for sid in sorted(allocate)]
        for sid, outcome in placer(batch, plan_state, paths, weights):
            if outcome.success:
                tentative[sid] = outcome.placement
            else:
                tentative.pop(sid, None)
                result.planning_failures.append((tm, sid))
        result.planned.append((sets, plan_state.utilization(weights)))
        remain = sets.next_remain
    result.tentative = tentative
    return result


def lara_allocate(
    state: NetworkState,
    trace: Trace,
    t: int,
    M: int,
    paths: PathTable,
    weights: Weights = Weights(),
    placer: Placer = greedy_place,
) -> PlanResult:
    """Decide at slot ``t`` and commit the slot ``t+1`` batch to ``state``.

    Services whose window ends at ``t`` are released from ``state`` before the
    commit.  Anything the plan could not place, or whose planned placement no
    longer fits the real state, is retried once against the real state.
    """
    pending = [trace[k] for k in pending_services(state, trace, t + 1)]
    retry = []
    outcomes: dict[int, PlacementOutcome] = {}
    if M == 0:
        result = PlanResult(t + 1)
        for sid, outcome in placer(pending, state, paths, weights):
            outcomes[sid] = outcome
            if not outcome.success:
                retry.append(trace[sid])
    else:
        result = lara_plan(state, trace, t, M, paths, weights, placer)
    result.released = finishing(state, t + 1)
    for sid in result.released:
        state.release(sid)
    if M > 0:
        for svc in pending:
            planned = result.tentative.get(svc.id)
            if planned is not None and not state.check_feasible(svc, planned):
                state.apply(svc, planned)
                outcomes[svc.id] = PlacementOutcome(True, _host(planned), planned, state.utilization(weights).u_total)
            else:
                retry.append(svc)
    if retry:
        for sid, outcome in placer(retry, state, paths, weights):
            outcomes[sid] = outcome
    result.committed = [(svc.id, outcomes[svc.id]) for svc in pending]
    return result


def _host(placement: Placement) -> int | None:
    inner = placement.vnf_nodes[1:-1]
    return inner[0] if inner and all(n == inner[0] for n in inner) else None
