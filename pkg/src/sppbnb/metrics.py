"""Evaluation quantities and report rendering for solver runs.

The headline figure is the unbalance factor 1 - mean/max over per-thread
busy times (0 = perfectly balanced), alongside the coefficient of variation,
speedup, and efficiency.  Reports render to JSON (full per-thread detail)
or CSV (one flat row per run); both schemas are stable and documented in
the README.  Aggregation is post-run and single-threaded.
"""

from __future__ import annotations

import io
import json
import statistics
from dataclasses import asdict, dataclass, field
from typing import Optional


def unbalance_factor(times) -> float:
    """1 - mean/max over busy times; zero for an empty or all-zero vector."""
    times = list(times)
    if not times:
        raise ValueError("at least one time required")
    if any(t < 0 for t in times):
        raise ValueError("times must be nonnegative")
    peak = max(times)
    if peak == 0:
        return 0.0
    return 1.0 - (sum(times) / len(times)) / peak


def coefficient_of_variation(times) -> float:
    """Population standard deviation over the mean of the busy times."""
    times = list(times)
    if not times:
        raise ValueError("at least one time required")
    mean = sum(times) / len(times)
    if mean <= 0:
        raise ValueError("mean of times must be positive")
    return statistics.pstdev(times) / mean


def speedup_efficiency(seq_time: float, par_time: float, total_cores: int) -> tuple[float, float]:
    if seq_time <= 0 or par_time <= 0:
        raise ValueError("times must be positive")
    if total_cores < 1:
        raise ValueError("total_cores must be >= 1")
    speedup = seq_time / par_time
    return speedup, speedup / total_cores


@dataclass
class ThreadStats:
    """Counters and timings of one thread (leader, manager, or worker)."""

    role: str
    machine: int
    proc: int = -1
    core: int = -1
    busy_time: float = 0.0
    nodes: int = 0
    local_requests: int = 0
    global_requests: int = 0
    local_balance_time: float = 0.0
    global_balance_time: float = 0.0
    peak_tl_bytes: int = 0
    max_node_bytes: int = 0


@dataclass
class RunStats:
    """Per-run aggregate in the style of the evaluation tables."""

    instance: str
    status: str
    best_cost: Optional[int]
    wall_time: float
    nodes_total: int
    threads: list[ThreadStats]
    mode: str  # "threads" | "deterministic" | "sequential"
    balancing: bool
    traversal: str
    un_factor: float = 0.0
    cv: float = 0.0
    local_requests: int = 0
    global_requests: int = 0
    pct_time_local: float = 0.0
    pct_time_global: float = 0.0
    nodes_sent: int = 0
    nodes_received: int = 0

    @staticmethod
    def build(
        instance: str,
        status: str,
        best_cost: Optional[int],
        wall_time: float,
        threads: list[ThreadStats],
        mode: str,
        balancing: bool,
        traversal: str,
        nodes_sent: int = 0,
        nodes_received: int = 0,
    ) -> "RunStats":
        workers = [t for t in threads if t.role == "worker"]
        worker_times = [t.busy_time for t in workers] or [0.0]
        try:
            cv = coefficient_of_variation(worker_times)
        except ValueError:
            cv = 0.0
        denom = wall_time * max(1, len(workers))
        return RunStats(
            instance=instance,
            status=status,
            best_cost=best_cost,
            wall_time=wall_time,
            nodes_total=sum(t.nodes for t in threads),
            threads=threads,
            mode=mode,
            balancing=balancing,
            traversal=traversal,
            un_factor=unbalance_factor(worker_times),
            cv=cv,
            local_requests=sum(t.local_requests for t in threads),
            global_requests=sum(t.global_requests for t in threads),
            pct_time_local=(
                100.0 * sum(t.local_balance_time for t in workers) / denom if denom > 0 else 0.0
            ),
            pct_time_global=(
                100.0 * sum(t.global_balance_time for t in workers) / denom if denom > 0 else 0.0
            ),
            nodes_sent=nodes_sent,
            nodes_received=nodes_received,
        )


CSV_COLUMNS = [
    "instance",
    "mode",
    "balancing",
    "traversal",
    "workers",
    "status",
    "best_cost",
    "wall_time",
    "nodes_total",
    "un_factor",
    "cv",
    "local_requests",
    "global_requests",
    "pct_time_local",
    "pct_time_global",
    "nodes_sent",
    "nodes_received",
]


def _check_consistency(stats: RunStats) -> None:
    total = sum(t.nodes for t in stats.threads)
    if total != stats.nodes_total:
        raise ValueError(
            f"per-thread node counts sum to {total}, run total says {stats.nodes_total}"
        )


def csv_row(stats: RunStats) -> list[str]:
    _check_consistency(stats)
    workers = sum(1 for t in stats.threads if t.role == "worker")
    values = [
        stats.instance,
        stats.mode,
        str(stats.balancing).lower(),
        stats.traversal,
        str(workers),
        stats.status,
        "" if stats.best_cost is None else str(stats.best_cost),
        repr(stats.wall_time),
        str(stats.nodes_total),
        repr(stats.un_factor),
        repr(stats.cv),
        str(stats.local_requests),
        str(stats.global_requests),
        repr(stats.pct_time_local),
        repr(stats.pct_time_global),
        str(stats.nodes_sent),
        str(stats.nodes_received),
    ]
    return values


def report(stats: RunStats, fmt: str = "json") -> str:
    """Render one run; fmt is "json" (nested, per-thread detail) or "csv"."""
    if fmt == "json":
        _check_consistency(stats)
        payload = asdict(stats)
        payload["schema"] = "sppbnb-run/1"
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        out = io.StringIO()
        out.write(",".join(CSV_COLUMNS) + "\n")
        out.write(",".join(csv_row(stats)) + "\n")
        return out.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report(text: str) -> RunStats:
    """Inverse of the JSON rendering (used by the CLI report subcommand)."""
    payload = json.loads(text)
    if payload.get("schema") != "sppbnb-run/1":
        raise ValueError("not a sppbnb run report")
    payload.pop("schema")
    threads = [ThreadStats(**t) for t in payload.pop("threads")]
    return RunStats(threads=threads, **payload)
