"""Small self-contained batch instances for the exact solver and its oracle."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .netstate import NetworkState, Placement, placement_from_dict
from .services import MBPS, ServiceRequest, VnfKind, VnfSpec, make_service
from .topology import NetworkGraph, PathTable, build_bcube, k_shortest_paths


@dataclass(frozen=True)
class Instance:
    """A network, some already-placed background services and a batch to place."""

    graph: NetworkGraph
    background: tuple[tuple[ServiceRequest, Placement], ...]
    batch: tuple[ServiceRequest, ...]

    def state(self, off_after: int = 1) -> NetworkState:
        st = NetworkState(self.graph, off_after=off_after)
        for svc, p in self.background:
            st.apply(svc, p)
        return st

    def to_dict(self) -> dict:
        return {
            "topology": self.graph.to_dict(),
            "background": [{"service": s.to_dict(), "placement": p.to_dict(s)} for s, p in self.background],
            "batch": [s.to_dict() for s in self.batch],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "Instance":
        graph = NetworkGraph.from_dict(doc["topology"])
        background = []
        for item in doc.get("background", []):
            svc = ServiceRequest.from_dict(item["service"])
            background.append((svc, placement_from_dict(item["placement"], svc, graph)))
        batch = tuple(ServiceRequest.from_dict(s) for s in doc["batch"])
        return cls(graph, tuple(background), batch)

    @classmethod
    def loads(cls, text: str) -> "Instance":
        return cls.from_dict(json.loads(text))


def _filler(sid: int, ingress: int, egress: int, demand, bw: int) -> ServiceRequest:
    vnfs = (VnfSpec(VnfKind.INGRESS), VnfSpec(VnfKind.NETWORK_RECEIVING, *demand), VnfSpec(VnfKind.EGRESS))
    return ServiceRequest(sid, vnfs, ((0, 1, bw), (1, 2, bw)), 1e9, 0, 0, ingress, egress)


def random_instance(
    seed: int,
    graph: NetworkGraph | None = None,
    paths: PathTable | None = None,
    n_services: int | None = None,
) -> Instance:
    """Default-chain batch of one or two services over random background load.

    Every server gets one filler service that eats a random share of its
    compute and of the bandwidth on one route from a core switch.  Batch ids
    start after the filler ids.
    """
    graph = graph or build_bcube(2, 1)
    paths = paths or k_shortest_paths(graph, 8)
    rng = np.random.default_rng(seed)
    cores = graph.core_switches
    caps = graph.server_caps
    st = NetworkState(graph)
    background = []
    for s, node in enumerate(graph.servers):
        free_cpu = int(rng.integers(0, 36))
        demand = (int(caps[s, 0]) - free_cpu, int(rng.integers(40, caps[s, 1] - 20)), int(rng.integers(0, caps[s, 2] - 2)))
        a, b = rng.choice(len(cores), 2, replace=False)
        bw = int(rng.integers(0, 9)) * 100 * MBPS
        svc = _filler(len(background), cores[a], cores[b], demand, bw)
        p_in = paths.get(cores[a], node)
        p_out = paths.get(node, cores[b])
        p = Placement(svc.id, (cores[a], node, cores[b]), (p_in[rng.integers(len(p_in))], p_out[rng.integers(len(p_out))]))
        if st.check_feasible(svc, p):
            continue
        st.apply(svc, p)
        background.append((svc, p))
    n = n_services if n_services is not None else int(rng.integers(1, 3))
    batch = []
    for j in range(n):
        a, b = rng.choice(len(cores), 2, replace=False)
        batch.append(make_service(len(background) + j, 0, 0, cores[a], cores[b]))
    return Instance(graph, tuple(background), tuple(batch))
