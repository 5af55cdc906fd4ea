"""Command-line interface: generate instances, solve them, run benchmarks.

Exit codes are a stable contract:

    0  optimal solution found (or report/generate finished)
    2  usage error (bad flags, malformed values)
    3  instance proved infeasible
    4  resource limit exceeded (node budget, scheduler step cap, timeout)
    5  input file missing or malformed
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time
from pathlib import Path

from . import metrics
from .balance import EngineConfig, ProtocolError, run_parallel
from .bnb_core import ResourceLimitError, SolveConfig, solve_sequential
from .instance import GeneratorParams, InstanceFormatError, generate, parse, serialize
from .mcm import TopologyError, builtin_topology, load_topology_file

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_RESOURCE = 4
EXIT_INPUT = 5

SIZE_SUFFIXES = {"": 1, "B": 1, "KB": 2**10, "MB": 2**20, "GB": 2**30}


def parse_size(text: str) -> int:
    """Parse '65536', '64KB', '3MB', ... into bytes."""
    s = text.strip().upper()
    for suffix in ("GB", "MB", "KB", "B"):
        if s.endswith(suffix):
            number = s[: -len(suffix)].strip()
            break
    else:
        number, suffix = s, ""
    try:
        value = float(number)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a size: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"size must be positive: {text!r}")
    return int(value * SIZE_SUFFIXES[suffix])


def _load_instance(path: str):
    try:
        return parse(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        print(f"error: instance file not found: {path}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT) from None
    except InstanceFormatError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT) from None


def _load_topology(spec: str):
    try:
        if spec.startswith("builtin:"):
            return builtin_topology(spec.split(":", 1)[1])
        return load_topology_file(spec)
    except FileNotFoundError:
        print(f"error: topology file not found: {spec}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT) from None
    except (TopologyError, KeyError) as exc:
        print(f"error: {spec}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT) from None


def _write_report(stats: metrics.RunStats, fmt: str, path: str | None) -> None:
    text = metrics.report(stats, fmt)
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_generate(args) -> int:
    try:
        params = GeneratorParams(
            m_items=args.items,
            n_vars=args.vars,
            p=args.p,
            seed=args.seed,
            ensure_coverage=not args.no_coverage,
            cost_range=(args.cost_min, args.cost_max),
        )
        inst = generate(params)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{params.name}.spp"
    path.write_text(serialize(inst), encoding="utf-8")
    print(path)
    return EXIT_OK


def _engine_config(args, deterministic: bool) -> EngineConfig:
    return EngineConfig(
        traversal=args.traversal,
        list_limit_bytes=args.list_limit,
        nt=args.nt,
        balancing=not getattr(args, "no_balancing", False),
        skew_initial=getattr(args, "skew_initial", False),
        deterministic=deterministic,
        scheduler_seed=args.scheduler_seed,
        transport=args.transport,
        max_nodes=args.max_nodes,
    )


def _run_once(inst, topology, args):
    """One solve, either sequential (no topology) or parallel."""
    if topology is None:
        cfg = SolveConfig(
            traversal=args.traversal,
            budget_bytes=args.list_limit if args.traversal == "breadth" else None,
            max_nodes=args.max_nodes,
        )
        t0 = time.perf_counter()
        solution = solve_sequential(inst, cfg)
        wall = time.perf_counter() - t0
        row = metrics.ThreadStats(role="worker", machine=0, proc=0, core=0,
                                  busy_time=wall, nodes=solution.nodes_processed)
        stats = metrics.RunStats.build(
            instance=inst.name,
            status=solution.status,
            best_cost=solution.best_cost,
            wall_time=wall,
            threads=[row],
            mode="sequential",
            balancing=False,
            traversal=args.traversal,
        )
        return solution, stats
    result = run_parallel(inst, topology, _engine_config(args, args.deterministic_scheduler))
    return result.solution, result.stats


def cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    topology = _load_topology(args.topology) if args.topology else None
    try:
        solution, stats = _run_once(inst, topology, args)
    except (ResourceLimitError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    fmt = "csv" if args.csv else "json"
    _write_report(stats, fmt, args.report)
    if solution.status == "Optimal":
        print(f"optimal {solution.best_cost} vars {' '.join(map(str, solution.chosen_vars))}")
        return EXIT_OK
    print("infeasible")
    return EXIT_INFEASIBLE


def cmd_bench(args) -> int:
    """Repeated runs over a list-limit sweep, with and/or without balancing."""
    inst = _load_instance(args.instance)
    topology = _load_topology(args.topology)
    modes = {"both": (True, False), "balanced": (True,), "none": (False,)}[args.mode]
    limits = args.list_limit_sweep or [args.list_limit]
    rows: list[list[str]] = []
    aggregates: list[str] = []
    try:
        for limit in limits:
            for balancing in modes:
                per_run: list[metrics.RunStats] = []
                for rep in range(args.repetitions):
                    cfg = EngineConfig(
                        traversal=args.traversal,
                        list_limit_bytes=limit,
                        nt=args.nt,
                        balancing=balancing,
                        skew_initial=args.skew_initial,
                        deterministic=args.deterministic_scheduler,
                        scheduler_seed=args.scheduler_seed,
                        transport=args.transport,
                        max_nodes=args.max_nodes,
                    )
                    result = run_parallel(inst, topology, cfg)
                    per_run.append(result.stats)
                    rows.append(metrics.csv_row(result.stats))
                walls = [s.wall_time for s in per_run]
                uns = [s.un_factor for s in per_run]
                agg = (
                    f"# aggregate instance={inst.name} limit={limit if limit is not None else 'cache'}"
                    f" balancing={str(balancing).lower()} runs={len(per_run)}"
                    f" wall_mean={statistics.mean(walls)!r}"
                    f" wall_stdev={(statistics.pstdev(walls) if len(walls) > 1 else 0.0)!r}"
                    f" un_factor_mean={statistics.mean(uns)!r}"
                    f" cv_mean={statistics.mean(s.cv for s in per_run)!r}"
                    f" local_req_mean={statistics.mean(s.local_requests for s in per_run)!r}"
                    f" global_req_mean={statistics.mean(s.global_requests for s in per_run)!r}"
                )
                aggregates.append(agg)
    except (ResourceLimitError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    lines = [",".join(metrics.CSV_COLUMNS)]
    lines += [",".join(r) for r in rows]
    lines += aggregates
    text = "\n".join(lines) + "\n"
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        stats = metrics.parse_report(Path(args.report_file).read_text(encoding="utf-8"))
    except FileNotFoundError:
        print(f"error: report file not found: {args.report_file}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _write_report(stats, "csv" if args.csv else "json", args.out)
    return EXIT_OK


def _add_run_flags(sub, parallel: bool) -> None:
    sub.add_argument("--traversal", choices=["breadth", "depth"], default="breadth")
    sub.add_argument("--list-limit", type=parse_size, default=None,
                     help="per-worker list byte cap (e.g. 3MB); default: cache share")
    sub.add_argument("--max-nodes", type=int, default=None)
    sub.add_argument("--nt", type=int, default=1,
                     help="waiting workers before the manager asks another machine")
    sub.add_argument("--scheduler-seed", type=int, default=0)
    sub.add_argument("--deterministic-scheduler", action="store_true")
    sub.add_argument("--transport", choices=["memory", "socket"], default="memory")
    sub.add_argument("--report", default=None, help="write the report here instead of stdout")
    fmt = sub.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", default=True)
    fmt.add_argument("--csv", action="store_true", default=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sppbnb",
        description="Exact set partitioning solver with cache-aware parallel search",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("generate", help="write a random instance file")
    gen.add_argument("--items", type=int, required=True)
    gen.add_argument("--vars", type=int, required=True)
    gen.add_argument("--p", type=float, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--no-coverage", action="store_true",
                     help="skip the singleton repair columns for uncovered items")
    gen.add_argument("--cost-min", type=int, default=1)
    gen.add_argument("--cost-max", type=int, default=100)
    gen.add_argument("--out-dir", default=".")
    gen.set_defaults(func=cmd_generate)

    solve = subs.add_parser("solve", help="solve one instance")
    solve.add_argument("instance")
    solve.add_argument("--topology", default=None,
                       help="topology JSON path or builtin:<name>; omit for sequential")
    _add_run_flags(solve, parallel=True)
    solve.set_defaults(func=cmd_solve)

    bench = subs.add_parser("bench", help="repeated runs over a sweep")
    bench.add_argument("instance")
    bench.add_argument("--topology", required=True)
    bench.add_argument("--repetitions", type=int, default=10)
    bench.add_argument("--mode", choices=["both", "balanced", "none"], default="both")
    bench.add_argument("--skew-initial", action="store_true",
                       help="give all initial load to the first worker")
    bench.add_argument(
        "--list-limit-sweep", type=lambda s: [parse_size(x) for x in s.split(",")],
        default=None, help="comma list, e.g. 1MB,3MB,6MB,9MB",
    )
    _add_run_flags(bench, parallel=True)
    bench.set_defaults(func=cmd_bench)

    rep = subs.add_parser("report", help="re-render a saved JSON report")
    rep.add_argument("report_file")
    rep.add_argument("--out", default=None)
    rep.add_argument("--csv", action="store_true")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
