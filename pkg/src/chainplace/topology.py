"""Physical network construction: Fat-Tree, BCube and VL2 builders, plus the
precomputed table of loop-free shortest paths between placement-eligible nodes.

Node numbering is stable: servers first, then edge, aggregation and core
switches.  Every physical adjacency becomes two directed links with
consecutive ids (``2*i`` forward, ``2*i + 1`` reverse).
"""
from __future__ import annotations

import enum
import heapq
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

GBPS = 1_000_000_000
SERVER_LINK_BPS = 1 * GBPS
SWITCH_LINK_BPS = 10 * GBPS
LINK_DELAY_MS = 0.05

RESOURCES = ("vcpu", "mem_gb", "gpu")
DEFAULT_SERVER_CAPS = (96, 112, 12)


class TopologyError(ValueError):
    """Invalid builder parameters or an inconsistent graph document."""


class NodeKind(str, enum.Enum):
    SERVER = "server"
    EDGE = "edge"
    AGG = "aggregation"
    CORE = "core"


@dataclass(frozen=True)
class Link:
    id: int
    src: int
    dst: int
    bandwidth: int  # bits per second
    delay: float  # milliseconds


@dataclass(frozen=True)
class NetworkGraph:
    kinds: tuple[NodeKind, ...]
    links: tuple[Link, ...]
    server_caps: np.ndarray = field(repr=False)  # (n_servers, 3) int64, rows follow `servers`
    name: str = ""

    def __post_init__(self):
        n = len(self.kinds)
        caps = np.asarray(self.server_caps, dtype=np.int64)
        if caps.ndim == 1:
            caps = np.tile(caps, (sum(k is NodeKind.SERVER for k in self.kinds), 1))
        caps.setflags(write=False)
        object.__setattr__(self, "server_caps", caps)
        seen = set()
        for i, link in enumerate(self.links):
            if link.id != i:
                raise TopologyError(f"link ids must be dense, got {link.id} at position {i}")
            if not (0 <= link.src < n and 0 <= link.dst < n):
                raise TopologyError(f"link {link.id} has an endpoint outside the graph")
            if link.src == link.dst:
                raise TopologyError(f"link {link.id} is a self-loop")
            if link.bandwidth <= 0 or link.delay < 0:
                raise TopologyError(f"link {link.id} has invalid capacity or delay")
            seen.add((link.src, link.dst))
        for link in self.links:
            if (link.dst, link.src) not in seen:
                raise TopologyError(f"link {link.id} has no reverse twin")
        if caps.shape != (len(self.servers), len(RESOURCES)):
            raise TopologyError("server_caps must have one row of (vcpu, mem_gb, gpu) per server")

    @property
    def node_count(self) -> int:
        return len(self.kinds)

    @property
    def servers(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k is NodeKind.SERVER)

    @property
    def core_switches(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.kinds) if k is NodeKind.CORE)

    @property
    def placement_nodes(self) -> tuple[int, ...]:
        """Servers and core switches, the nodes a chain element can sit on."""
        return tuple(i for i, k in enumerate(self.kinds) if k in (NodeKind.SERVER, NodeKind.CORE))

    def out_links(self) -> list[list[Link]]:
        adj: list[list[Link]] = [[] for _ in self.kinds]
        for link in self.links:
            adj[link.src].append(link)
        return adj

    def to_dict(self) -> dict:
        caps = self.server_caps
        if len(caps) and (caps == caps[0]).all():
            caps_doc: dict | list = dict(zip(RESOURCES, map(int, caps[0])))
        else:
            caps_doc = [dict(zip(RESOURCES, map(int, row))) for row in caps]
        return {
            "name": self.name,
            "nodes": [{"id": i, "kind": k.value} for i, k in enumerate(self.kinds)],
            "links": [
                {"id": l.id, "src": l.src, "dst": l.dst, "bw_bps": l.bandwidth, "delay_ms": l.delay}
                for l in self.links
            ],
            "server_caps": caps_doc,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkGraph":
        try:
            nodes = sorted(doc["nodes"], key=lambda n: n["id"])
            if [n["id"] for n in nodes] != list(range(len(nodes))):
                raise TopologyError("node ids must be dense from 0")
            kinds = tuple(NodeKind(n["kind"]) for n in nodes)
            links = []
            for l in sorted(doc["links"], key=lambda l: l["id"]):
                bw = l["bw_bps"]
                if int(bw) != bw:
                    raise TopologyError("bw_bps must be an integral number of bits per second")
                links.append(Link(int(l["id"]), int(l["src"]), int(l["dst"]), int(bw), float(l["delay_ms"])))
            caps_doc = doc["server_caps"]
        except (KeyError, TypeError) as exc:
            raise TopologyError(f"malformed graph document: {exc}") from exc
        if isinstance(caps_doc, dict):
            caps = np.array([caps_doc[r] for r in RESOURCES], dtype=np.int64)
        else:
            caps = np.array([[row[r] for r in RESOURCES] for row in caps_doc], dtype=np.int64)
        return cls(kinds, tuple(links), caps, doc.get("name", ""))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "NetworkGraph":
        return cls.from_dict(json.loads(text))


def _assemble(name, n_servers, edges, aggs, cores, adjacency, caps=DEFAULT_SERVER_CAPS) -> NetworkGraph:
    kinds = (
        [NodeKind.SERVER] * n_servers
        + [NodeKind.EDGE] * edges
        + [NodeKind.AGG] * aggs
        + [NodeKind.CORE] * cores
    )
    links = []
    for a, b in adjacency:
        touches_server = kinds[a] is NodeKind.SERVER or kinds[b] is NodeKind.SERVER
        bw = SERVER_LINK_BPS if touches_server else SWITCH_LINK_BPS
        links.append(Link(len(links), a, b, bw, LINK_DELAY_MS))
        links.append(Link(len(links), b, a, bw, LINK_DELAY_MS))
    return NetworkGraph(tuple(kinds), tuple(links), np.array(caps, dtype=np.int64), name)


def build_fat_tree(k: int, servers_per_edge: int | None = None) -> NetworkGraph:
    """k-ary Fat-Tree: (k/2)^2 core switches and k pods of k/2 aggregation plus
    k/2 edge switches.  Each edge switch hosts k/2 servers unless
    ``servers_per_edge`` overrides it (used for the 32/48/64-server variants).
    """
    if not isinstance(k, (int, np.integer)) or k < 2 or k % 2:
        raise TopologyError(f"fat-tree needs an even k >= 2, got {k!r}")
    half = k // 2
    spe = half if servers_per_edge is None else servers_per_edge
    if spe < 1:
        raise TopologyError("servers_per_edge must be positive")
    n_edge = k * half
    n_servers = n_edge * spe
    edge0 = n_servers
    agg0 = edge0 + n_edge
    core0 = agg0 + n_edge
    adj = []
    for pod in range(k):
        for j in range(half):
            edge = edge0 + pod * half + j
            for s in range(spe):
                adj.append((edge, (pod * half + j) * spe + s))
    for pod in range(k):
        for i in range(half):
            for j in range(half):
                adj.append((agg0 + pod * half + i, edge0 + pod * half + j))
    # core (i, j) attaches to aggregation switch i of every pod
    for i in range(half):
        for j in range(half):
            for pod in range(k):
                adj.append((core0 + i * half + j, agg0 + pod * half + i))
    return _assemble(f"fat-tree(k={k},spe={spe})", n_servers, n_edge, n_edge, half * half, adj)


def build_bcube(n: int, k: int) -> NetworkGraph:
    """BCube_k with n-port switches.  Server addresses are k+1 base-n digits;
    the level-l switch joins the n servers differing only in digit l.  Top
    level switches act as core switches.
    """
    if n < 2 or k < 0:
        raise TopologyError(f"bcube needs n >= 2 and k >= 0, got n={n}, k={k}")
    n_servers = n ** (k + 1)
    per_level = n**k
    lower = k * per_level
    adj = []
    for level in range(k + 1):
        base = n_servers + level * per_level
        step = n**level
        for sw in range(per_level):
            low, high = sw % step, sw // step
            for digit in range(n):
                server = high * step * n + digit * step + low
                adj.append((base + sw, server))
    return _assemble(f"bcube(n={n},k={k})", n_servers, lower, 0, per_level, adj)


def build_vl2(n: int, k: int) -> NetworkGraph:
    """VL2 with n servers per ToR and k-port aggregation switches: k^2/4 ToRs,
    k aggregation and k/2 intermediate switches, the latter two layers forming
    a complete bipartite graph.  Each ToR is dual-homed to an aggregation pair.
    """
    if n < 1 or k < 2 or n % 2 or k % 2:
        raise TopologyError(f"vl2 needs even positive n and k, got n={n}, k={k}")
    half = k // 2
    n_tor = k * k // 4
    n_servers = n * n_tor
    tor0 = n_servers
    agg0 = tor0 + n_tor
    int0 = agg0 + k
    adj = []
    for t in range(n_tor):
        for s in range(n):
            adj.append((tor0 + t, t * n + s))
    for t in range(n_tor):
        pair = t // half
        adj.append((agg0 + 2 * pair, tor0 + t))
        adj.append((agg0 + 2 * pair + 1, tor0 + t))
    for i in range(half):
        for a in range(k):
            adj.append((int0 + i, agg0 + a))
    return _assemble(f"vl2(n={n},k={k})", n_servers, n_tor, k, half, adj)


BUILDERS = {"fat-tree": build_fat_tree, "bcube": build_bcube, "vl2": build_vl2}


def build(kind: str, **params) -> NetworkGraph:
    try:
        builder = BUILDERS[kind]
    except KeyError:
        raise TopologyError(f"unknown topology kind {kind!r}") from None
    return builder(**params)


@dataclass(frozen=True)
class Path:
    src: int
    dst: int
    links: tuple[int, ...]
    nodes: tuple[int, ...]
    delay: float

    @property
    def hop_count(self) -> int:
        return len(self.links)

    @property
    def rank_key(self) -> tuple:
        return (len(self.links), self.links)


class PathTable:
    """Up to ``d`` loop-free paths for every ordered pair of distinct
    servers/core switches, ranked by hop count then link-id sequence."""

    def __init__(self, graph: NetworkGraph, d: int, table: dict[tuple[int, int], tuple[Path, ...]]):
        self.graph = graph
        self.d = d
        self._table = table

    def __getitem__(self, pair: tuple[int, int]) -> tuple[Path, ...]:
        return self._table.get(pair, ())

    def get(self, src: int, dst: int) -> tuple[Path, ...]:
        return self._table.get((src, dst), ())

    def pairs(self):
        return self._table.keys()

    def __len__(self):
        return len(self._table)


def _lexmin_shortest(adj, n_nodes, src, dst, banned_nodes, banned_links):
    """Lexicographically smallest (by link id) among the minimum-hop paths
    from src to dst avoiding the banned nodes/links; None if unreachable."""
    if src in banned_nodes or dst in banned_nodes:
        return None
    dist = [-1] * n_nodes
    dist[dst] = 0
    queue = deque([dst])
    radj = adj[1]
    while queue:
        v = queue.popleft()
        if v == src:
            break
        for link in radj[v]:
            u = link.src
            if dist[u] < 0 and u not in banned_nodes and link.id not in banned_links:
                dist[u] = dist[v] + 1
                queue.append(u)
    if dist[src] < 0:
        return None
    out = adj[0]
    seq = []
    v = src
    while v != dst:
        want = dist[v] - 1
        best = None
        for link in out[v]:  # out lists are sorted by id
            w = link.dst
            if link.id in banned_links or w in banned_nodes or dist[w] != want:
                continue
            best = link
            break
        seq.append(best)
        v = best.dst
    return seq


def _yen(adj, n_nodes, src, dst, d):
    first = _lexmin_shortest(adj, n_nodes, src, dst, frozenset(), frozenset())
    if first is None:
        return []
    accepted = [first]
    keys = {tuple(l.id for l in first)}
    heap: list = []
    while len(accepted) < d:
        prev = accepted[-1]
        prev_ids = [l.id for l in prev]
        nodes = [src] + [l.dst for l in prev]
        for i in range(len(prev)):
            root = prev[:i]
            root_ids = prev_ids[:i]
            banned_links = {
                p[i].id for p in accepted if len(p) > i and [l.id for l in p[:i]] == root_ids
            }
            spur = _lexmin_shortest(adj, n_nodes, nodes[i], dst, set(nodes[:i]), banned_links)
            if spur is None:
                continue
            cand = root + spur
            key = tuple(l.id for l in cand)
            if key not in keys:
                keys.add(key)
                heapq.heappush(heap, (len(key), key, cand))
        if not heap:
            break
        accepted.append(heapq.heappop(heap)[2])
    return accepted


def _make_path(src, dst, links: Sequence[Link]) -> Path:
    return Path(
        src,
        dst,
        tuple(l.id for l in links),
        (src,) + tuple(l.dst for l in links),
        float(sum(l.delay for l in links)),
    )


def k_shortest_paths(graph: NetworkGraph, d: int, endpoints: Iterable[int] | None = None) -> PathTable:
    """Path table over all ordered pairs of ``endpoints`` (default: servers and
    core switches).  Pairs with no route get no entry."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    out = graph.out_links()
    rin: list[list[Link]] = [[] for _ in graph.kinds]
    for link in graph.links:
        rin[link.dst].append(link)
    for lst in out:
        lst.sort(key=lambda l: l.id)
    adj = (out, rin)
    nodes = tuple(graph.placement_nodes if endpoints is None else endpoints)
    table = {}
    for a in nodes:
        for b in nodes:
            if a == b:
                continue
            found = _yen(adj, graph.node_count, a, b, d)
            if found:
                table[(a, b)] = tuple(_make_path(a, b, p) for p in found)
    return PathTable(graph, d, table)
