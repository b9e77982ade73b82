"""Placement of VNF service chains in datacenter networks with slot lookahead."""
from .exact import ExactConfig, ExactResult, SearchSpaceTooLarge, brute_force_place, exact_place, exact_placer
from .greedy import PlacementOutcome, greedy_place
from .instances import Instance, random_instance
from .lara import ServiceSets, classify, lara_allocate, lara_plan
from .netstate import (
    InfeasiblePlacement,
    MalformedPlacement,
    NetworkState,
    Placement,
    PowerState,
    UtilizationReport,
    Weights,
    delay_of,
)
from .services import (
    MalformedService,
    ServiceRequest,
    Trace,
    TraceConfig,
    VnfKind,
    VnfSpec,
    default_chain,
    generate_trace,
    make_service,
    topological_order,
)
from .sim import ExperimentConfig, RunSummary, TopologySpec, run, sweep, sweep_csv
from .topology import (
    NetworkGraph,
    NodeKind,
    Path,
    PathTable,
    TopologyError,
    build,
    build_bcube,
    build_fat_tree,
    build_vl2,
    k_shortest_paths,
)

__version__ = "0.1.0"
