"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 some service could not be placed.
Relative ``--out`` paths are resolved against ``$CHAINPLACE_OUT_DIR`` when it is set;
without ``--out`` results go to stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .exact import ExactConfig, SearchSpaceTooLarge, brute_force_place, exact_place
from .instances import Instance, random_instance
from .netstate import Weights
from .services import MalformedService, Trace, TraceConfig, generate_trace
from .sim import BCUBE_4, BCUBE_16, FAT_TREE_16, VL2_16, ExperimentConfig, TopologySpec, run, sweep, sweep_csv
from .topology import NetworkGraph, TopologyError, build, k_shortest_paths

OUT_DIR_ENV = "CHAINPLACE_OUT_DIR"
PRESETS = {
    "fat-tree-16": FAT_TREE_16,
    "bcube-16": BCUBE_16,
    "vl2-16": VL2_16,
    "bcube-4": BCUBE_4,
}
EXIT_OK, EXIT_USAGE, EXIT_UNPLACED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def int_range(text: str) -> list[int]:
    """``a..b:step`` (inclusive), ``a..b``, or a comma list."""
    try:
        if ".." in text:
            lo, _, rest = text.partition("..")
            hi, _, step = rest.partition(":")
            lo, hi, step = int(lo), int(hi), int(step or 1)
            if step <= 0 or hi < lo:
                raise ValueError
            return list(range(lo, hi + 1, step))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer range {text!r}") from None


def int_pair(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two integers 'lo,hi', got {text!r}") from None
    return lo, hi


def weights_arg(text: str) -> Weights:
    try:
        svr, link, bw = (float(x) for x in text.split(","))
        return Weights(svr, link, bw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad weights {text!r}: {exc}") from None


def _out_path(out: str) -> Path:
    path = Path(out)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    path = _out_path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _topology(arg: str) -> TopologySpec | NetworkGraph:
    if arg in PRESETS:
        return PRESETS[arg]
    return NetworkGraph.loads(_read(arg))


def _graph(arg: str) -> NetworkGraph:
    topo = _topology(arg)
    return topo.build() if isinstance(topo, TopologySpec) else topo


def cmd_topo(args) -> int:
    params = {"k": args.k} if args.kind == "fat-tree" else {"n": args.n, "k": args.k}
    if args.kind == "fat-tree" and args.servers_per_edge is not None:
        params["servers_per_edge"] = args.servers_per_edge
    if None in params.values():
        raise UsageError(f"topo --kind {args.kind} needs " + " and ".join(f"--{p}" for p in params))
    graph = build(args.kind, **params)
    _emit(graph.dumps(), args.out)
    return EXIT_OK


def _trace_config(args, seed=None) -> TraceConfig:
    return TraceConfig(
        args.k_obj,
        horizon_hours=args.hours,
        pass_duration_slots=args.pass_slots,
        seed=args.seed if seed is None else seed,
    )


def cmd_trace(args) -> int:
    graph = _graph(args.topology)
    trace = generate_trace(_trace_config(args), graph.core_switches)
    _emit(trace.dumps(), args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    topo = _topology(args.topology)
    if args.trace is not None:
        trace_src: Trace | TraceConfig = Trace.loads(_read(args.trace))
    elif args.k_obj is not None:
        trace_src = _trace_config(args)
    else:
        raise UsageError("run needs --trace or --k-obj")
    cfg = ExperimentConfig(topo, trace_src, M=args.m, weights=args.weights, placer=args.placer, d=args.d,
                           exact_budget_s=args.budget_s)
    summary = run(cfg)
    _emit(summary.to_csv(), args.out)
    mean = summary.mean
    print(f"mean u_total={mean.u_total:.6f} u_svr={mean.u_svr:.6f} u_link={mean.u_link:.6f} u_bw={mean.u_bw:.6f} "
          f"never_placed={len(summary.never_placed)}", file=sys.stderr)
    return EXIT_UNPLACED if summary.never_placed else EXIT_OK


def cmd_sweep(args) -> int:
    names = args.topologies.split(",")
    rows = []
    for name in names:
        base = ExperimentConfig(_topology(name), TraceConfig(0, horizon_hours=args.hours,
                                pass_duration_slots=args.pass_slots, seed=args.seed), weights=args.weights, d=args.d)
        rows += sweep(base, args.k_obj, args.m, repetitions=args.reps, jobs=args.jobs)
    _emit(sweep_csv(rows), args.out)
    failed = [r for r in rows if r.error]
    for r in failed:
        print(f"cell {r.topology} K_obj={r.k_obj} M={r.M} failed: {r.error}", file=sys.stderr)
    return EXIT_USAGE if failed else EXIT_OK


def cmd_exact(args) -> int:
    if args.instance is not None:
        inst = Instance.loads(_read(args.instance))
    elif args.seed is not None:
        inst = random_instance(args.seed)
    else:
        raise UsageError("exact needs --instance or --seed")
    state = inst.state()
    paths = k_shortest_paths(inst.graph, args.d)
    res = exact_place(inst.batch, state, paths, args.weights, ExactConfig(time_limit_s=args.budget_s))
    doc = {
        "optimal": res.optimal,
        "feasible": res.feasible,
        "value": res.value if res.feasible else None,
        "nodes_explored": res.nodes_explored,
        "placements": {str(s.id): res.placements[s.id].to_dict(s) for s in inst.batch} if res.feasible else None,
    }
    if args.brute_force:
        try:
            oracle = brute_force_place(inst.batch, state, paths, args.weights)
            doc["brute_force_value"] = oracle.value if oracle.feasible else None
        except SearchSpaceTooLarge as exc:
            doc["brute_force_value"] = None
            doc["brute_force_refused"] = str(exc)
    _emit(json.dumps(doc, sort_keys=True, indent=1), args.out)
    return EXIT_OK if res.feasible else EXIT_UNPLACED


def cmd_compare(args) -> int:
    topo = _topology(args.topology)
    if args.trace:
        sources = [Trace.loads(_read(p)) for p in args.trace]
    elif args.k_obj is not None:
        sources = [_trace_config(args, seed=args.seed + r) for r in range(args.reps)]
    else:
        raise UsageError("compare needs --trace or --k-obj")
    a_vals, b_vals, unplaced = [], [], 0
    for src in sources:
        base = ExperimentConfig(topo, src, weights=args.weights, d=args.d)
        ra, rb = run(replace(base, M=args.m_a)), run(replace(base, M=args.m_b))
        a_vals.append(ra.mean.u_total)
        b_vals.append(rb.mean.u_total)
        unplaced += len(ra.never_placed) + len(rb.never_placed)
    a, b = np.array(a_vals), np.array(b_vals)
    diff = a - b
    sem = float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else math.nan
    print(f"pairs={len(diff)}")
    print(f"mean_u_M{args.m_a}={a.mean():.6f}")
    print(f"mean_u_M{args.m_b}={b.mean():.6f}")
    print(f"mean_paired_diff={diff.mean():.6f} sem={sem:.6f}")
    print(f"relative_improvement={(a.mean() - b.mean()) / a.mean() if a.mean() else math.nan:.4%}")
    print(f"pairs_improved={int((diff > 0).sum())}/{len(diff)}")
    return EXIT_UNPLACED if unplaced else EXIT_OK


def _common(p, trace_flags=False):
    p.add_argument("--weights", type=weights_arg, default=Weights(), help="w_svr,w_link,w_bw")
    p.add_argument("--d", type=int, default=8, help="candidate paths per node pair")
    if trace_flags:
        p.add_argument("--hours", type=float, default=24.0)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--pass-slots", type=int_pair, default=TraceConfig(0).pass_duration_slots,
                       help="min,max slots per pass")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="chainplace", description="VNF chain placement experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("topo", help="build a topology and write graph JSON")
    p.add_argument("--kind", required=True, choices=["fat-tree", "bcube", "vl2"])
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--servers-per-edge", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_topo)

    p = sub.add_parser("trace", help="generate a seeded service trace")
    p.add_argument("--k-obj", type=int, required=True)
    p.add_argument("--topology", default="fat-tree-16", help="graph JSON or preset name")
    p.add_argument("--out")
    _common(p, trace_flags=True)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("run", help="simulate one trace and write per-slot CSV")
    p.add_argument("--topology", default="fat-tree-16")
    p.add_argument("--trace")
    p.add_argument("--k-obj", type=int, help="generate the trace instead of reading one")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--placer", choices=["greedy", "exact"], default="greedy")
    p.add_argument("--budget-s", type=float, default=10.0, help="exact placer time limit per batch")
    p.add_argument("--out")
    _common(p, trace_flags=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="grid over K_obj and M, one CSV row per cell")
    p.add_argument("--k-obj", type=int_range, default=int_range("10..100:10"))
    p.add_argument("--m", type=int_range, default=[0, 1, 2])
    p.add_argument("--topologies", default="fat-tree-16,bcube-16,vl2-16")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    _common(p, trace_flags=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("exact", help="solve a batch instance to optimality")
    p.add_argument("--instance")
    p.add_argument("--seed", type=int, help="use a generated instance instead")
    p.add_argument("--budget-s", type=float, default=60.0)
    p.add_argument("--brute-force", action="store_true", help="also run the enumeration oracle")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("compare", help="paired comparison of two lookahead depths")
    p.add_argument("--topology", default="fat-tree-16")
    p.add_argument("--trace", action="append", help="trace JSON, repeatable")
    p.add_argument("--k-obj", type=int)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--m-a", type=int, default=0)
    p.add_argument("--m-b", type=int, default=1)
    _common(p, trace_flags=True)
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (TopologyError, MalformedService, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"chainplace: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
