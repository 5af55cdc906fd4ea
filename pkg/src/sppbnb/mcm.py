"""Multicore cluster model: topology, cost functions, placement advice.

A cluster is machines -> processors -> cores.  Each machine has a
computational slowdown index (csi) and a global memory capacity; cores of a
processor share cache domains whose capacities drive the per-worker list
budgets.  Transfers between machines cost latency * bytes; transfers inside
a machine are treated as free.

The placement advisor classifies a pair of tasks by how their combined
memory footprint and the data they exchange compare with the cache
capacity; the engine maps the resulting class onto concrete cores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from graphlib import CycleError, TopologicalSorter
from importlib import resources

DEFAULT_LB_MSG = 8 * 2**20  # messages below this favor staying on one machine


class TopologyError(ValueError):
    """Structural problem in a topology description; message names the key path."""


class Placement(Enum):
    SAME_MACHINE = "same_machine"
    SAME_MACHINE_NON_NEIGHBOR_CORES = "same_machine_non_neighbor_cores"
    DIFFERENT_MACHINE = "different_machine"


@dataclass(frozen=True)
class CacheDomain:
    cmc_bytes: int
    cores: tuple[int, ...]  # core ids local to the owning processor
    level: int = 0  # 0 = budget-relevant shared level; deeper levels carried only


@dataclass(frozen=True)
class Processor:
    cores: tuple[int, ...]
    caches: tuple[CacheDomain, ...]

    def budget_domain(self, core: int) -> CacheDomain:
        for dom in self.caches:
            if dom.level == 0 and core in dom.cores:
                return dom
        raise TopologyError(f"core {core} not in any level-0 cache domain")


@dataclass(frozen=True)
class Machine:
    csi: float
    gmc_bytes: int
    processors: tuple[Processor, ...]


@dataclass(frozen=True)
class ClusterTopology:
    machines: tuple[Machine, ...]
    latency: tuple[tuple[float, ...], ...]  # seconds per byte, symmetric, zero diagonal
    name: str = "cluster"

    def worker_addresses(self) -> list[tuple[int, int, int]]:
        """All (machine, processor, core) triples in address order."""
        out = []
        for i, mach in enumerate(self.machines):
            for j, proc in enumerate(mach.processors):
                for k in proc.cores:
                    out.append((i, j, k))
        return out

    def total_cores(self) -> int:
        return len(self.worker_addresses())


def exec_time(topology: ClusterTopology, machine: int, epsilon: float) -> float:
    """Execution time of a work amount on a core of the given machine."""
    return topology.machines[machine].csi * epsilon


def comm_time(topology: ClusterTopology, omega: float, machine_i: int, machine_j: int) -> float:
    """Transfer time for omega bytes between two machines (zero within one)."""
    if machine_i == machine_j:
        return 0.0
    return omega * topology.latency[machine_i][machine_j]


def cache_budget(cache: CacheDomain, threads_sharing: int) -> int:
    """Fair cache share per thread: capacity divided by the sharers."""
    if threads_sharing < 1:
        raise ValueError("threads_sharing must be >= 1")
    return cache.cmc_bytes // threads_sharing


def worker_budget(topology: ClusterTopology, machine: int, proc: int, core: int) -> int:
    """Budget for the worker pinned to a core: its cache domain split over members."""
    domain = topology.machines[machine].processors[proc].budget_domain(core)
    return cache_budget(domain, len(domain.cores))


@dataclass(frozen=True)
class McmConfig:
    lb_msg_bytes: int = DEFAULT_LB_MSG

    def __post_init__(self):
        if self.lb_msg_bytes <= 0:
            raise ValueError("lb_msg_bytes must be positive")


def allocation_advice(
    mu_u: int,
    mu_v: int,
    omega: int | None,
    cmc_bytes: int,
    cfg: McmConfig | None = None,
) -> Placement:
    """Classify where a pair of tasks should run relative to each other.

    Footprints below the cache capacity keep the pair on one machine (and
    for communicating pairs the threshold cfg.lb_msg_bytes marks how large
    a message can get before that stops paying off; below it, same machine
    always wins).  Above the capacity, non-communicating pairs -- and pairs
    exchanging at least a cache-full of data -- go to non-neighbor cores of
    one machine; pairs exchanging less are cheaper to place apart.
    """
    if min(mu_u, mu_v, cmc_bytes) < 0 or (omega is not None and omega < 0):
        raise ValueError("sizes must be nonnegative")
    if mu_u + mu_v < cmc_bytes:
        return Placement.SAME_MACHINE
    if omega is None:
        return Placement.SAME_MACHINE_NON_NEIGHBOR_CORES
    if omega >= cmc_bytes:
        return Placement.SAME_MACHINE_NON_NEIGHBOR_CORES
    return Placement.DIFFERENT_MACHINE


@dataclass(frozen=True)
class TaskGraph:
    """DAG of tasks with work, memory, and edge-data weights."""

    work: dict[str, float]  # epsilon per vertex
    memory: dict[str, int]  # mu per vertex, bytes
    edges: dict[tuple[str, str], int]  # omega per edge, bytes

    def __post_init__(self):
        for v, eps in self.work.items():
            if eps < 0:
                raise ValueError(f"negative work on vertex {v!r}")
            if self.memory.get(v, 0) < 0:
                raise ValueError(f"negative memory on vertex {v!r}")
        graph: dict[str, set[str]] = {v: set() for v in self.work}
        for (u, v), omega in self.edges.items():
            if omega < 0:
                raise ValueError(f"negative data weight on edge {(u, v)!r}")
            if u not in self.work or v not in self.work:
                raise ValueError(f"edge {(u, v)!r} references unknown vertex")
            graph[v].add(u)
        try:
            tuple(TopologicalSorter(graph).static_order())
        except CycleError as exc:
            raise ValueError(f"task graph has a cycle: {exc.args[1]}") from None

    def advice(self, u: str, v: str, cmc_bytes: int, cfg: McmConfig | None = None) -> Placement:
        omega = self.edges.get((u, v), self.edges.get((v, u)))
        return allocation_advice(self.memory[u], self.memory[v], omega, cmc_bytes, cfg)


def _require(cond: bool, path: str, reason: str) -> None:
    if not cond:
        raise TopologyError(f"{path}: {reason}")


def topology_from_dict(data: dict) -> ClusterTopology:
    _require(isinstance(data, dict), "$", "topology must be an object")
    raw_machines = data.get("machines")
    _require(isinstance(raw_machines, list) and raw_machines, "machines", "nonempty list required")
    machines = []
    for i, rm in enumerate(raw_machines):
        mpath = f"machines[{i}]"
        _require(isinstance(rm, dict), mpath, "machine must be an object")
        csi = rm.get("csi", 1.0)
        _require(isinstance(csi, (int, float)) and csi > 0, f"{mpath}.csi", "must be > 0")
        gmc = rm.get("gmc_bytes")
        _require(isinstance(gmc, int) and gmc > 0, f"{mpath}.gmc_bytes", "positive integer required")
        raw_procs = rm.get("processors")
        _require(isinstance(raw_procs, list) and raw_procs, f"{mpath}.processors", "nonempty list required")
        procs = []
        for j, rp in enumerate(raw_procs):
            ppath = f"{mpath}.processors[{j}]"
            cores = rp.get("cores")
            _require(
                isinstance(cores, list) and cores and all(isinstance(c, int) for c in cores),
                f"{ppath}.cores", "nonempty list of core ids required",
            )
            _require(len(set(cores)) == len(cores), f"{ppath}.cores", "core ids must be unique")
            raw_caches = rp.get("caches")
            _require(isinstance(raw_caches, list) and raw_caches, f"{ppath}.caches", "nonempty list required")
            caches = []
            for k, rc in enumerate(raw_caches):
                cpath = f"{ppath}.caches[{k}]"
                cmc = rc.get("cmc_bytes")
                _require(isinstance(cmc, int) and cmc > 0, f"{cpath}.cmc_bytes", "positive integer required")
                _require(cmc < gmc, f"{cpath}.cmc_bytes", f"must be smaller than gmc_bytes ({gmc})")
                members = rc.get("cores")
                _require(
                    isinstance(members, list) and members and set(members) <= set(cores),
                    f"{cpath}.cores", "members must be cores of this processor",
                )
                level = rc.get("level", 0)
                _require(isinstance(level, int) and level >= 0, f"{cpath}.level", "must be >= 0")
                caches.append(CacheDomain(cmc, tuple(members), level))
            levels = {c.level for c in caches}
            for level in levels:
                covered: list[int] = []
                for c in caches:
                    if c.level == level:
                        covered.extend(c.cores)
                _require(
                    sorted(covered) == sorted(cores),
                    f"{ppath}.caches",
                    f"level {level} domains must partition the processor's cores",
                )
            procs.append(Processor(tuple(cores), tuple(caches)))
        machines.append(Machine(float(csi), gmc, tuple(procs)))
    m = len(machines)
    lat = data.get("latency")
    _require(isinstance(lat, list) and len(lat) == m, "latency", f"{m}x{m} matrix required")
    for i, row in enumerate(lat):
        _require(isinstance(row, list) and len(row) == m, f"latency[{i}]", f"row of length {m} required")
        for j, cell in enumerate(row):
            _require(isinstance(cell, (int, float)) and cell >= 0, f"latency[{i}][{j}]", "must be >= 0")
            if i == j:
                _require(cell == 0, f"latency[{i}][{j}]", "diagonal must be zero")
    for i in range(m):
        for j in range(i + 1, m):
            _require(lat[i][j] == lat[j][i], f"latency[{i}][{j}]", "matrix must be symmetric")
    return ClusterTopology(
        machines=tuple(machines),
        latency=tuple(tuple(float(c) for c in row) for row in lat),
        name=str(data.get("name", "cluster")),
    )


def load_topology(text: str) -> ClusterTopology:
    """Parse and validate a JSON topology description."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyError(f"$: not valid JSON ({exc})") from None
    return topology_from_dict(data)


def load_topology_file(path) -> ClusterTopology:
    with open(path, "r", encoding="utf-8") as fh:
        return load_topology(fh.read())


def builtin_topology(name: str) -> ClusterTopology:
    """Load one of the bundled example topologies (e.g. "rio")."""
    ref = resources.files("sppbnb.data").joinpath(f"{name}.json")
    try:
        text = ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise KeyError(f"no builtin topology named {name!r}") from None
    return load_topology(text)


def uniform_topology(
    machines: int,
    processors: int,
    cores: int,
    cache_bytes: int = 6 * 2**20,
    gmc_bytes: int = 16 * 2**30,
    latency_s_per_byte: float = 1e-8,
    csi: float = 1.0,
    name: str | None = None,
) -> ClusterTopology:
    """Build a homogeneous machines x processors x cores topology."""
    machine = {
        "csi": csi,
        "gmc_bytes": gmc_bytes,
        "processors": [
            {
                "cores": list(range(cores)),
                "caches": [{"cmc_bytes": cache_bytes, "cores": list(range(cores))}],
            }
            for _ in range(processors)
        ],
    }
    lat = [
        [0.0 if i == j else latency_s_per_byte for j in range(machines)]
        for i in range(machines)
    ]
    return topology_from_dict(
        {
            "name": name or f"{machines}x{processors}x{cores}",
            "machines": [machine for _ in range(machines)],
            "latency": lat,
        }
    )
