"""Service chains and seeded pass-schedule traces.

A service is a DAG of VNFs bracketed by an ingress and an egress that sit on
two distinct core switches.  Traces emulate the output of satellite mission
planning: every ground objective is revisited once per orbital period, and
each visit spawns one service occupying a few consecutive time slots.
"""
from __future__ import annotations

import enum
import heapq
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

MBPS = 1_000_000
SLOT_MINUTES = 10


class MalformedService(ValueError):
    pass


class VnfKind(str, enum.Enum):
    INGRESS = "ingress"
    NETWORK_RECEIVING = "network_receiving"
    CAPTURE = "capture"
    TRACKING = "tracking"
    SYNCHRONIZATION = "synchronization"
    DECODING = "decoding"
    EGRESS = "egress"

    @property
    def is_endpoint(self) -> bool:
        return self in (VnfKind.INGRESS, VnfKind.EGRESS)


@dataclass(frozen=True)
class VnfSpec:
    kind: VnfKind
    cpu: int = 0
    mem: int = 0  # GB
    gpu: int = 0
    compute_time: float = 0.0  # ms

    @property
    def demand(self) -> tuple[int, int, int]:
        return (self.cpu, self.mem, self.gpu)


@dataclass(frozen=True)
class ServiceRequest:
    id: int
    vnfs: tuple[VnfSpec, ...]
    edges: tuple[tuple[int, int, int], ...]  # (from, to, bits per second)
    max_delay: float
    start_slot: int
    end_slot: int
    ingress_node: int
    egress_node: int
    _order: tuple[int, ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "vnfs", tuple(self.vnfs))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        self.validate()
        object.__setattr__(self, "_order", _kahn(len(self.vnfs), self.edges))

    def validate(self):
        v = self.vnfs
        if len(v) < 2 or v[0].kind is not VnfKind.INGRESS or v[-1].kind is not VnfKind.EGRESS:
            raise MalformedService(f"service {self.id}: chain must run from ingress to egress")
        if any(x.kind.is_endpoint for x in v[1:-1]):
            raise MalformedService(f"service {self.id}: ingress/egress only at the chain ends")
        if any(x.cpu or x.mem or x.gpu for x in (v[0], v[-1])):
            raise MalformedService(f"service {self.id}: ingress/egress carry no compute demand")
        if any(min(x.demand) < 0 or x.compute_time < 0 for x in v):
            raise MalformedService(f"service {self.id}: negative demand")
        for a, b, bw in self.edges:
            if not (0 <= a < len(v) and 0 <= b < len(v)) or a == b or bw < 0:
                raise MalformedService(f"service {self.id}: bad edge {(a, b, bw)}")
        if self.start_slot > self.end_slot:
            raise MalformedService(f"service {self.id}: start after end")
        if self.ingress_node == self.egress_node:
            raise MalformedService(f"service {self.id}: ingress and egress share a switch")

    @property
    def order(self) -> tuple[int, ...]:
        return self._order

    @cached_property
    def compute_time(self) -> float:
        return sum(x.compute_time for x in self.vnfs)

    def total_demand(self) -> tuple[int, int, int]:
        return tuple(int(sum(x.demand[r] for x in self.vnfs)) for r in range(3))

    def endpoint_node(self, index: int) -> int | None:
        """Pinned node for the ingress/egress VNF, None for compute VNFs."""
        if index == 0:
            return self.ingress_node
        if index == len(self.vnfs) - 1:
            return self.egress_node
        return None

    @cached_property
    def preds(self) -> tuple[tuple[int, ...], ...]:
        """Edge indices entering each VNF."""
        pre: list[list[int]] = [[] for _ in self.vnfs]
        for e, (_, b, _) in enumerate(self.edges):
            pre[b].append(e)
        return tuple(map(tuple, pre))

    @cached_property
    def is_compute(self) -> tuple[bool, ...]:
        return tuple(not v.kind.is_endpoint for v in self.vnfs)

    @cached_property
    def compute_demand(self) -> tuple[int, int, int]:
        """Summed (cpu, mem, gpu) of the compute VNFs."""
        return self.total_demand()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "start_slot": self.start_slot,
            "end_slot": self.end_slot,
            "ingress": self.ingress_node,
            "egress": self.egress_node,
            "vnfs": [
                {"kind": x.kind.value, "cpu": x.cpu, "mem_gb": x.mem, "gpu": x.gpu, "compute_ms": x.compute_time}
                for x in self.vnfs
            ],
            "edges": [list(e) for e in self.edges],
            "max_delay_ms": self.max_delay,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ServiceRequest":
        try:
            vnfs = tuple(
                VnfSpec(VnfKind(x["kind"]), int(x["cpu"]), int(x["mem_gb"]), int(x["gpu"]), float(x["compute_ms"]))
                for x in doc["vnfs"]
            )
            return cls(
                int(doc["id"]),
                vnfs,
                tuple((int(a), int(b), int(bw)) for a, b, bw in doc["edges"]),
                float(doc["max_delay_ms"]),
                int(doc["start_slot"]),
                int(doc["end_slot"]),
                int(doc["ingress"]),
                int(doc["egress"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MalformedService):
                raise
            raise MalformedService(f"malformed service document: {exc}") from exc


def _kahn(n: int, edges) -> tuple[int, ...]:
    indeg = [0] * n
    succ: list[list[int]] = [[] for _ in range(n)]
    for a, b, _ in edges:
        succ[a].append(b)
        indeg[b] += 1
    ready = [i for i in range(n) if indeg[i] == 0]
    out = []
    heapq.heapify(ready)
    while ready:
        v = heapq.heappop(ready)
        out.append(v)
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(ready, w)
    if len(out) != n:
        raise MalformedService("service graph has a cycle")
    return tuple(out)


def topological_order(service: ServiceRequest) -> tuple[int, ...]:
    """Kahn's order with smallest-index-first tie-break."""
    return _kahn(len(service.vnfs), service.edges)


class Chain(NamedTuple):
    vnfs: tuple[VnfSpec, ...]
    edges: tuple[tuple[int, int, int], ...]
    max_delay: float


# (cpu, mem GB, gpu, compute ms) per stage, 100 Mbps between neighbours, 1.8 s budget
_TABLE = (
    (VnfKind.NETWORK_RECEIVING, 6, 9, 0, 20.0),
    (VnfKind.CAPTURE, 7, 11, 1, 1500.0),
    (VnfKind.TRACKING, 9, 12, 1, 100.0),
    (VnfKind.SYNCHRONIZATION, 14, 12, 1, 10.0),
    (VnfKind.DECODING, 3, 5, 1, 25.0),
)
CHAIN_BANDWIDTH = 100 * MBPS
CHAIN_MAX_DELAY = 1800.0


def default_chain() -> Chain:
    vnfs = (
        (VnfSpec(VnfKind.INGRESS),)
        + tuple(VnfSpec(kind, cpu, mem, gpu, t) for kind, cpu, mem, gpu, t in _TABLE)
        + (VnfSpec(VnfKind.EGRESS),)
    )
    edges = tuple((i, i + 1, CHAIN_BANDWIDTH) for i in range(len(vnfs) - 1))
    return Chain(vnfs, edges, CHAIN_MAX_DELAY)


def make_service(id, start_slot, end_slot, ingress, egress, chain: Chain | None = None) -> ServiceRequest:
    chain = chain or default_chain()
    return ServiceRequest(id, chain.vnfs, chain.edges, chain.max_delay, start_slot, end_slot, ingress, egress)


@dataclass(frozen=True)
class TraceConfig:
    k_obj: int
    horizon_hours: float = 24.0
    slot_minutes: int = SLOT_MINUTES
    orbit_period_minutes: tuple[float, float] = (90.0, 110.0)
    pass_duration_slots: tuple[int, int] = (1, 2)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.orbit_period_minutes
        dlo, dhi = self.pass_duration_slots
        if self.k_obj < 0 or self.horizon_hours <= 0 or self.slot_minutes <= 0:
            raise ValueError("k_obj must be >= 0 and the horizon/slot length positive")
        if not (0 < lo <= hi) or not (1 <= dlo <= dhi):
            raise ValueError("sampling ranges must be non-empty and positive")

    @property
    def horizon_slots(self) -> int:
        return int(round(self.horizon_hours * 60 / self.slot_minutes))


@dataclass(frozen=True)
class Trace:
    horizon_slots: int
    services: tuple[ServiceRequest, ...]
    seed: int = 0
    slot_minutes: int = SLOT_MINUTES

    def __post_init__(self):
        object.__setattr__(self, "services", tuple(self.services))
        for i, s in enumerate(self.services):
            if s.id != i:
                raise MalformedService("trace service ids must equal their position")
            if not (0 <= s.start_slot <= s.end_slot < self.horizon_slots):
                raise MalformedService(f"service {s.id} window leaves the horizon")
        starts = [s.start_slot for s in self.services]
        if starts != sorted(starts):
            raise MalformedService("trace services must be sorted by start slot")
        object.__setattr__(self, "_start", np.array(starts, dtype=np.int64))
        object.__setattr__(self, "_end", np.array([s.end_slot for s in self.services], dtype=np.int64))

    def __len__(self):
        return len(self.services)

    def __getitem__(self, sid: int) -> ServiceRequest:
        return self.services[sid]

    def starting_at(self, slot: int) -> list[int]:
        lo, hi = np.searchsorted(self._start, [slot, slot + 1])
        return list(range(int(lo), int(hi)))

    def active_at(self, slot: int) -> list[int]:
        hi = int(np.searchsorted(self._start, slot + 1))
        return [int(i) for i in np.flatnonzero(self._end[:hi] >= slot)]

    def to_dict(self) -> dict:
        return {
            "horizon_slots": self.horizon_slots,
            "slot_minutes": self.slot_minutes,
            "seed": self.seed,
            "services": [s.to_dict() for s in self.services],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Trace":
        services = tuple(ServiceRequest.from_dict(s) for s in doc["services"])
        return cls(int(doc["horizon_slots"]), services, int(doc.get("seed", 0)), int(doc.get("slot_minutes", SLOT_MINUTES)))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def loads(cls, text: str) -> "Trace":
        return cls.from_dict(json.loads(text))


def generate_trace(cfg: TraceConfig, core_switches: Sequence[int], chain: Chain | None = None) -> Trace:
    """Synthetic pass schedule.

    Each objective gets an orbital period drawn from ``cfg.orbit_period_minutes``
    and a phase in ``[0, period)``; every pass starting inside the horizon
    spawns one service with a duration from ``cfg.pass_duration_slots``,
    clamped so consecutive passes of one objective never overlap.
    """
    cores = list(core_switches)
    if len(cores) < 2:
        raise ValueError("trace generation needs at least two core switches")
    chain = chain or default_chain()
    rng = np.random.default_rng(cfg.seed)
    horizon = cfg.horizon_slots
    horizon_min = horizon * cfg.slot_minutes
    raw = []
    for obj in range(cfg.k_obj):
        period = rng.uniform(*cfg.orbit_period_minutes)
        phase = rng.uniform(0.0, period)
        starts = []
        t = phase
        while t < horizon_min:
            starts.append(int(t // cfg.slot_minutes))
            t += period
        for j, start in enumerate(starts):
            dur = int(rng.integers(cfg.pass_duration_slots[0], cfg.pass_duration_slots[1] + 1))
            end = min(start + dur - 1, horizon - 1)
            if j + 1 < len(starts):
                end = max(start, min(end, starts[j + 1] - 1))
            a, b = rng.choice(len(cores), size=2, replace=False)
            raw.append((start, obj, j, end, cores[int(a)], cores[int(b)]))
    raw.sort(key=lambda r: (r[0], r[1], r[2]))
    services = tuple(
        ServiceRequest(i, chain.vnfs, chain.edges, chain.max_delay, start, end, ing, egr)
        for i, (start, _, _, end, ing, egr) in enumerate(raw)
    )
    return Trace(horizon, services, cfg.seed, cfg.slot_minutes)
