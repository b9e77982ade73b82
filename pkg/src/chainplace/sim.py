"""Time-slotted experiment driver and parameter sweeps."""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path as FsPath
from typing import Sequence

import numpy as np

from .greedy import greedy_place
from .lara import lara_allocate
from .netstate import NetworkState, UtilizationReport, Weights
from .services import Trace, TraceConfig, generate_trace
from .topology import NetworkGraph, PathTable, build, k_shortest_paths

log = logging.getLogger(__name__)

SLOT_FIELDS = ("slot", "u_svr", "u_link", "u_bw", "u_total", "placed", "released", "unplaced", "active_servers")
SWEEP_FIELDS = ("topology", "n_servers", "k_obj", "M", "mean_u", "std_u", "reps")


@dataclass(frozen=True)
class TopologySpec:
    kind: str
    params: tuple = ()  # sorted (name, value) pairs

    @classmethod
    def of(cls, kind: str, **params) -> "TopologySpec":
        return cls(kind, tuple(sorted(params.items())))

    def build(self) -> NetworkGraph:
        return build(self.kind, **dict(self.params))

    @property
    def label(self) -> str:
        return self.kind + "(" + ";".join(f"{k}={v}" for k, v in self.params) + ")"


FAT_TREE_16 = TopologySpec.of("fat-tree", k=4)
BCUBE_4 = TopologySpec.of("bcube", n=2, k=1)
BCUBE_8 = TopologySpec.of("bcube", n=2, k=2)
BCUBE_16 = TopologySpec.of("bcube", n=4, k=1)
VL2_16 = TopologySpec.of("vl2", n=4, k=4)


@lru_cache(maxsize=16)
def network(spec: TopologySpec, d: int = 8) -> tuple[NetworkGraph, PathTable]:
    graph = spec.build()
    return graph, k_shortest_paths(graph, d)


@lru_cache(maxsize=16)
def _graph_paths(graph_json: str, d: int) -> tuple[NetworkGraph, PathTable]:
    graph = NetworkGraph.loads(graph_json)
    return graph, k_shortest_paths(graph, d)


@dataclass(frozen=True)
class ExperimentConfig:
    topology: TopologySpec | NetworkGraph = FAT_TREE_16
    trace: TraceConfig | Trace = TraceConfig(30)
    M: int = 1
    weights: Weights = Weights()
    placer: str = "greedy"
    d: int = 8
    seed: int | None = None  # overrides the trace config seed when set
    repetitions: int = 1
    off_after: int = 1
    exact_budget_s: float = 10.0
    check: bool = False  # cross-check incremental utilization every slot

    def __post_init__(self):
        if self.M < 0 or self.d < 1 or self.repetitions < 1:
            raise ValueError("need M >= 0, d >= 1 and at least one repetition")
        if self.placer not in ("greedy", "exact"):
            raise ValueError(f"unknown placer {self.placer!r}")

    def network(self) -> tuple[NetworkGraph, PathTable]:
        if isinstance(self.topology, NetworkGraph):
            return _graph_paths(self.topology.dumps(), self.d)
        return network(self.topology, self.d)

    def make_trace(self, graph: NetworkGraph) -> Trace:
        if isinstance(self.trace, Trace):
            return self.trace
        cfg = self.trace if self.seed is None else replace(self.trace, seed=self.seed)
        return generate_trace(cfg, graph.core_switches)


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    utilization: UtilizationReport
    placed: int
    released: int
    unplaced: int
    active_servers: int

    def row(self) -> tuple:
        return (self.slot, *self.utilization, self.placed, self.released, self.unplaced, self.active_servers)


@dataclass
class RunSummary:
    records: list[SlotRecord]
    batch_seconds: list[float] = field(default_factory=list, compare=False)
    never_placed: list[int] = field(default_factory=list)
    activations: int = 0

    @property
    def mean(self) -> UtilizationReport:
        if not self.records:
            return UtilizationReport(0.0, 0.0, 0.0, 0.0)
        arr = np.array([r.utilization for r in self.records])
        return UtilizationReport(*map(float, arr.mean(axis=0)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SLOT_FIELDS)
        for r in self.records:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r.row()])
        return buf.getvalue()


def make_placer(cfg: ExperimentConfig):
    if cfg.placer == "greedy":
        return greedy_place
    from .exact import ExactConfig, exact_placer

    return exact_placer(ExactConfig(time_limit_s=cfg.exact_budget_s))


def run(cfg: ExperimentConfig, trace: Trace | None = None) -> RunSummary:
    """Simulate the whole horizon.

    At each slot ``t`` the batch starting at ``t`` is decided from slot
    ``t-1`` (releases of services that ended at ``t-1`` happen inside that
    call), then power states tick and the slot-end utilization is recorded.
    """
    graph, paths = cfg.network()
    trace = trace if trace is not None else cfg.make_trace(graph)
    placer = make_placer(cfg)
    state = NetworkState(graph, off_after=cfg.off_after)
    records = []
    seconds = []
    ever_placed: set[int] = set()
    for t in range(trace.horizon_slots):
        t0 = time.perf_counter()
        res = lara_allocate(state, trace, t - 1, cfg.M, paths, cfg.weights, placer)
        seconds.append(time.perf_counter() - t0)
        state.tick()
        placed = [sid for sid, o in res.committed if o.success]
        ever_placed.update(placed)
        u = state.utilization(cfg.weights)
        if cfg.check:
            fresh = state.recomputed()
            if fresh.utilization(cfg.weights) != u or fresh.snapshot()[:7] != state.snapshot()[:7]:
                raise AssertionError(f"incremental bookkeeping drifted at slot {t}")
            if any(svc.end_slot < t for svc, _ in state.iter_placements()):
                raise AssertionError(f"placement outlived its window at slot {t}")
        records.append(SlotRecord(t, u, len(placed), len(res.released), len(res.unplaced), state.n_used_servers))
    never = [s.id for s in trace.services if s.id not in ever_placed]
    if never:
        log.info("%d of %d services were never placed", len(never), len(trace))
    return RunSummary(records, seconds, never, state.activations)


@dataclass(frozen=True)
class SweepRow:
    topology: str
    n_servers: int
    k_obj: int
    M: int
    mean_u: float
    std_u: float
    reps: int
    error: str | None = None

    def row(self) -> tuple:
        return (self.topology, self.n_servers, self.k_obj, self.M, repr(self.mean_u), repr(self.std_u), self.reps)


def _cell(args) -> tuple[float, ...] | str:
    cfg, = args
    try:
        values = []
        for r in range(cfg.repetitions):
            seed = (cfg.seed if cfg.seed is not None else cfg.trace.seed) + r
            values.append(run(replace(cfg, seed=seed, repetitions=1)).mean.u_total)
        return tuple(values)
    except Exception as exc:  # a failing cell must not abort the sweep
        return f"{type(exc).__name__}: {exc}"


def sweep(
    base: ExperimentConfig,
    k_objs: Sequence[int],
    Ms: Sequence[int],
    repetitions: int | None = None,
    jobs: int = 1,
) -> list[SweepRow]:
    """Grid of runs over objective counts and lookahead depths.

    Repetition ``r`` uses trace seed ``seed + r`` for every cell, so cells
    sharing a K_obj compare M values on identical traces.
    """
    if not k_objs or not Ms:
        raise ValueError("sweep needs non-empty K_obj and M lists")
    reps = repetitions or base.repetitions
    if isinstance(base.trace, Trace):
        raise ValueError("sweep generates its own traces; pass a TraceConfig")
    graph, _ = base.network()
    label = base.topology.label if isinstance(base.topology, TopologySpec) else (base.topology.name or "graph")
    cells = []
    for k in k_objs:
        for m in Ms:
            cells.append(replace(base, trace=replace(base.trace, k_obj=k), M=m, repetitions=reps))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell, [(c,) for c in cells]))
    else:
        results = [_cell((c,)) for c in cells]
    rows = []
    for cell, res in zip(cells, results):
        if isinstance(res, str):
            log.warning("sweep cell K_obj=%d M=%d failed: %s", cell.trace.k_obj, cell.M, res)
            rows.append(SweepRow(label, len(graph.servers), cell.trace.k_obj, cell.M, math.nan, math.nan, reps, res))
        else:
            arr = np.array(res)
            rows.append(SweepRow(label, len(graph.servers), cell.trace.k_obj, cell.M, float(arr.mean()), float(arr.std()), reps))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_FIELDS)
    for r in rows:
        w.writerow(r.row())
    return buf.getvalue()


def write_text(path: str | FsPath, text: str) -> None:
    FsPath(path).write_text(text)
