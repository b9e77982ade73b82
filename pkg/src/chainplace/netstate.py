"""Residual-resource bookkeeping, constraint checks and the utilization objective.

All resource quantities are integers (vCPU, GB, GPU, bits/s) so that apply and
release are exact inverses.  The bandwidth term of the objective is carried as
an integer number of "bandwidth units": each link's used bits/s scaled by
``lcm(capacities) / capacity``, which makes every objective value a fixed
function of three integers (used servers, used links, bandwidth units).
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .services import ServiceRequest
from .topology import NetworkGraph, NodeKind, Path


class MalformedPlacement(ValueError):
    """The placement does not describe the service (wrong shape, broken path,
    endpoints off their declared switches).  Distinct from infeasibility."""


class InfeasiblePlacement(Exception):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class PowerState(str, enum.Enum):
    ACTIVE = "active"
    IDLE = "idle"
    OFF = "off"


@dataclass(frozen=True)
class Violation:
    constraint: str  # "compute-on-server", "endpoint-on-core", "server-capacity", "link-capacity", "delay"
    where: int | None
    detail: str = ""

    def __str__(self):
        return f"{self.constraint}@{self.where}: {self.detail}"


@dataclass(frozen=True)
class Weights:
    svr: float = 1 / 3
    link: float = 1 / 3
    bw: float = 1 / 3

    def __post_init__(self):
        if min(self.svr, self.link, self.bw) < 0 or not math.isclose(self.svr + self.link + self.bw, 1.0):
            raise ValueError(f"weights must be non-negative and sum to 1, got {self}")


class UtilizationReport(NamedTuple):
    u_svr: float
    u_link: float
    u_bw: float
    u_total: float


@dataclass(frozen=True)
class Placement:
    """VNF index -> node, and per service edge either a Path or None (co-located)."""

    service_id: int
    vnf_nodes: tuple[int, ...]
    edge_paths: tuple[Path | None, ...]

    def to_dict(self, service: ServiceRequest | None = None) -> dict:
        if service is not None:
            keys = [f"{a}-{b}" for a, b, _ in service.edges]
        else:
            keys = [str(e) for e in range(len(self.edge_paths))]
        return {
            "service_id": self.service_id,
            "vnf_to_node": {str(i): n for i, n in enumerate(self.vnf_nodes)},
            "edge_to_path": {
                k: ("colocated" if p is None else list(p.links)) for k, p in zip(keys, self.edge_paths)
            },
        }

    def dumps(self, service: ServiceRequest | None = None) -> str:
        return json.dumps(self.to_dict(service), sort_keys=True)


def placement_from_dict(doc: dict, service: ServiceRequest, graph: NetworkGraph) -> Placement:
    nodes = tuple(int(doc["vnf_to_node"][str(i)]) for i in range(len(service.vnfs)))
    paths = []
    for a, b, _ in service.edges:
        entry = doc["edge_to_path"][f"{a}-{b}"]
        if entry == "colocated":
            paths.append(None)
            continue
        links = tuple(int(x) for x in entry)
        node_seq = (graph.links[links[0]].src,) + tuple(graph.links[l].dst for l in links)
        paths.append(Path(node_seq[0], node_seq[-1], links, node_seq, sum(graph.links[l].delay for l in links)))
    return Placement(service.id, nodes, tuple(paths))


class Load(NamedTuple):
    """Resources one placement occupies."""

    servers: dict  # server index -> [cpu, mem, gpu]
    hosts: dict  # server index -> number of VNFs
    bw: dict  # link id -> bits/s
    flows: dict  # link id -> number of routed edges


def delay_of(service: ServiceRequest, placement: Placement) -> float:
    """Total compute time plus link delay along every routed (non co-located) edge."""
    execute = service.compute_time
    transmit = sum(p.delay for p in placement.edge_paths if p is not None)
    return execute + transmit


def objective(n_servers: int, n_links: int, bw_units: int, scale: "ObjectiveScale", w: Weights) -> UtilizationReport:
    u_svr = n_servers / scale.n_servers
    u_link = n_links / scale.n_links
    u_bw = bw_units / scale.bw_denominator
    return UtilizationReport(u_svr, u_link, u_bw, w.svr * u_svr + w.link * u_link + w.bw * u_bw)


class ObjectiveScale(NamedTuple):
    n_servers: int
    n_links: int
    bw_denominator: int  # lcm(capacities) * n_links


class NetworkState:
    """Mutable residual view of one NetworkGraph.

    Server-indexed arrays follow ``graph.servers`` order; link arrays follow
    link ids.  ``placements`` keeps insertion order.
    """

    def __init__(self, graph: NetworkGraph, off_after: int = 1):
        self.graph = graph
        self.off_after = off_after
        servers = graph.servers
        self.server_nodes = servers
        self.server_of = [-1] * graph.node_count
        for i, n in enumerate(servers):
            self.server_of[n] = i
        self.caps = [list(map(int, row)) for row in graph.server_caps]
        self.used = [[0, 0, 0] for _ in servers]
        self.hosted = [0] * len(servers)
        self.link_cap = [l.bandwidth for l in graph.links]
        self.link_used = [0] * len(graph.links)
        self.link_flows = [0] * len(graph.links)
        lcm = math.lcm(*self.link_cap) if self.link_cap else 1
        self.bw_scale = [lcm // c for c in self.link_cap]
        if lcm * max(len(graph.links), 1) > 2**53:  # keep bandwidth units exact in a double
            raise ValueError("link capacities have an impractically large common multiple")
        self.scale = ObjectiveScale(len(servers), len(graph.links), lcm * len(graph.links))
        self.n_used_servers = 0
        self.n_used_links = 0
        self.bw_units = 0
        self.power = [PowerState.IDLE] * len(servers)
        self.idle_slots = [0] * len(servers)
        self.activations = 0
        self.placements: dict[int, tuple[ServiceRequest, Placement]] = {}

    # -- copying / comparison -------------------------------------------------

    def clone(self) -> "NetworkState":
        new = object.__new__(NetworkState)
        new.__dict__.update(self.__dict__)
        new.used = [row[:] for row in self.used]
        new.hosted = self.hosted[:]
        new.link_used = self.link_used[:]
        new.link_flows = self.link_flows[:]
        new.power = self.power[:]
        new.idle_slots = self.idle_slots[:]
        new.placements = dict(self.placements)
        return new

    def snapshot(self) -> tuple:
        return (
            tuple(map(tuple, self.used)),
            tuple(self.hosted),
            tuple(self.link_used),
            tuple(self.link_flows),
            self.n_used_servers,
            self.n_used_links,
            self.bw_units,
            tuple(p.value for p in self.power),
            tuple(self.placements),
            tuple(pl for _, pl in self.placements.values()),
        )

    def digest(self) -> str:
        return hashlib.sha256(repr(self.snapshot()).encode()).hexdigest()

    def __eq__(self, other):
        return isinstance(other, NetworkState) and self.snapshot() == other.snapshot()

    __hash__ = None

    # -- derived views --------------------------------------------------------

    @property
    def residual(self) -> np.ndarray:
        return np.array(self.caps, dtype=np.int64) - np.array(self.used, dtype=np.int64).reshape(-1, 3)

    @property
    def link_residual(self) -> np.ndarray:
        return np.array(self.link_cap, dtype=np.int64) - np.array(self.link_used, dtype=np.int64)

    @property
    def x(self) -> np.ndarray:
        return np.array(self.hosted) > 0

    @property
    def y(self) -> np.ndarray:
        return np.array(self.link_flows) > 0

    def active_servers(self) -> list[int]:
        """Node ids of servers hosting at least one VNF, ascending."""
        return [n for i, n in enumerate(self.server_nodes) if self.hosted[i] > 0]

    def idle_servers(self) -> list[int]:
        return [n for i, n in enumerate(self.server_nodes) if self.hosted[i] == 0]

    def utilization(self, weights: Weights = Weights()) -> UtilizationReport:
        return objective(self.n_used_servers, self.n_used_links, self.bw_units, self.scale, weights)

    # -- loads and checks -----------------------------------------------------

    def validate(self, service: ServiceRequest, placement: Placement) -> None:
        g = self.graph
        nv = len(service.vnfs)
        if placement.service_id != service.id:
            raise MalformedPlacement("placement belongs to another service")
        if len(placement.vnf_nodes) != nv or len(placement.edge_paths) != len(service.edges):
            raise MalformedPlacement("placement shape does not match the service")
        for n in placement.vnf_nodes:
            if not 0 <= n < g.node_count:
                raise MalformedPlacement(f"unknown node {n}")
        if placement.vnf_nodes[0] != service.ingress_node or placement.vnf_nodes[-1] != service.egress_node:
            raise MalformedPlacement("ingress/egress not on the service's declared switches")
        links = g.links
        for (a, b, _), path in zip(service.edges, placement.edge_paths):
            na, nb = placement.vnf_nodes[a], placement.vnf_nodes[b]
            if na == nb:
                if path is not None:
                    raise MalformedPlacement(f"edge {a}-{b} is co-located but carries a path")
                continue
            if path is None:
                raise MalformedPlacement(f"edge {a}-{b} spans two nodes without a path")
            if path.src != na or path.dst != nb or not path.links:
                raise MalformedPlacement(f"edge {a}-{b} path endpoints do not match its hosts")
            at = na
            for lid in path.links:
                if not 0 <= lid < len(links) or links[lid].src != at:
                    raise MalformedPlacement(f"edge {a}-{b} path is not a connected link chain")
                at = links[lid].dst
            if len(set(path.nodes)) != len(path.nodes):
                raise MalformedPlacement(f"edge {a}-{b} path repeats a node")

    def load_of(self, service: ServiceRequest, placement: Placement) -> Load:
        servers: dict = {}
        hosts: dict = {}
        server_of = self.server_of
        for i, node in enumerate(placement.vnf_nodes):
            s = server_of[node]
            if s < 0:
                continue
            d = service.vnfs[i].demand
            acc = servers.setdefault(s, [0, 0, 0])
            acc[0] += d[0]
            acc[1] += d[1]
            acc[2] += d[2]
            hosts[s] = hosts.get(s, 0) + 1
        bw: dict = {}
        flows: dict = {}
        for (_, _, b), path in zip(service.edges, placement.edge_paths):
            if path is None:
                continue
            for lid in path.links:
                bw[lid] = bw.get(lid, 0) + b
                flows[lid] = flows.get(lid, 0) + 1
        return Load(servers, hosts, bw, flows)

    def violations(self, service: ServiceRequest, placement: Placement, load: Load | None = None) -> list[Violation]:
        """Constraint violations of placing ``service`` as ``placement`` on top
        of the current state; empty when feasible."""
        self.validate(service, placement)
        kinds = self.graph.kinds
        out = []
        for i, node in enumerate(placement.vnf_nodes):
            if service.vnfs[i].kind.is_endpoint:
                if kinds[node] is not NodeKind.CORE:
                    out.append(Violation("endpoint-on-core", node, f"vnf {i} on {kinds[node].value}"))
            elif kinds[node] is not NodeKind.SERVER:
                out.append(Violation("compute-on-server", node, f"vnf {i} on {kinds[node].value}"))
        load = load or self.load_of(service, placement)
        for s, d in load.servers.items():
            cap, used = self.caps[s], self.used[s]
            for r, name in enumerate(("vcpu", "mem_gb", "gpu")):
                if used[r] + d[r] > cap[r]:
                    out.append(Violation("server-capacity", self.server_nodes[s], f"{name} {used[r] + d[r]} > {cap[r]}"))
        for lid, b in load.bw.items():
            if self.link_used[lid] + b > self.link_cap[lid]:
                out.append(Violation("link-capacity", lid, f"{self.link_used[lid] + b} > {self.link_cap[lid]}"))
        delay = delay_of(service, placement)
        if delay > service.max_delay:
            out.append(Violation("delay", service.id, f"{delay} ms > {service.max_delay} ms"))
        return out

    def check_feasible(self, service: ServiceRequest, placement: Placement) -> list[Violation]:
        return self.violations(service, placement)

    def evaluate(self, load: Load, weights: Weights) -> UtilizationReport:
        """Objective the state would have after adding ``load`` (no mutation)."""
        hosted, flows, scale = self.hosted, self.link_flows, self.bw_scale
        n_svr = self.n_used_servers + sum(1 for s in load.hosts if hosted[s] == 0)
        n_link = self.n_used_links + sum(1 for l in load.flows if flows[l] == 0)
        bw = self.bw_units + sum(b * scale[l] for l, b in load.bw.items())
        return objective(n_svr, n_link, bw, self.scale, weights)

    # -- mutation -------------------------------------------------------------

    def apply(self, service: ServiceRequest, placement: Placement) -> None:
        if service.id in self.placements:
            raise ValueError(f"service {service.id} is already placed")
        load = self.load_of(service, placement)
        bad = self.violations(service, placement, load)
        if bad:
            raise InfeasiblePlacement(bad)
        self._add(load, +1)
        self.placements[service.id] = (service, placement)

    def release(self, service_id: int) -> None:
        try:
            service, placement = self.placements.pop(service_id)
        except KeyError:
            raise KeyError(f"service {service_id} is not placed") from None
        self._add(self.load_of(service, placement), -1)

    def _add(self, load: Load, sign: int) -> None:
        for s, d in load.servers.items():
            row = self.used[s]
            row[0] += sign * d[0]
            row[1] += sign * d[1]
            row[2] += sign * d[2]
        for s, c in load.hosts.items():
            before = self.hosted[s]
            after = before + sign * c
            self.hosted[s] = after
            if before == 0 and after > 0:
                self.n_used_servers += 1
                if self.power[s] is not PowerState.ACTIVE:
                    self.activations += 1
                self.power[s] = PowerState.ACTIVE
                self.idle_slots[s] = 0
            elif before > 0 and after == 0:
                self.n_used_servers -= 1
                self.power[s] = PowerState.IDLE
                self.idle_slots[s] = 0
        for l, b in load.bw.items():
            self.link_used[l] += sign * b
            self.bw_units += sign * b * self.bw_scale[l]
        for l, c in load.flows.items():
            before = self.link_flows[l]
            after = before + sign * c
            self.link_flows[l] = after
            if before == 0 and after > 0:
                self.n_used_links += 1
            elif before > 0 and after == 0:
                self.n_used_links -= 1

    def tick(self) -> None:
        """End-of-slot power bookkeeping: idle servers sleep after ``off_after`` slots."""
        for s, p in enumerate(self.power):
            if p is PowerState.IDLE:
                self.idle_slots[s] += 1
                if self.idle_slots[s] >= self.off_after:
                    self.power[s] = PowerState.OFF

    # -- diagnostics ----------------------------------------------------------

    def recomputed(self) -> "NetworkState":
        """Fresh state with the same placements applied from scratch."""
        fresh = NetworkState(self.graph, self.off_after)
        for service, placement in self.placements.values():
            fresh._add(fresh.load_of(service, placement), +1)
            fresh.placements[service.id] = (service, placement)
        return fresh

    def iter_placements(self) -> Iterator[tuple[ServiceRequest, Placement]]:
        return iter(self.placements.values())
