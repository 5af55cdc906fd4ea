"""Exact parallel branch-and-bound for the set partitioning problem.

Work distribution follows a multicore cluster model: per-worker node lists
bounded by cache-share budgets, hierarchical load stealing (neighbor core,
then machine, then remote machine), and a manager/leader message protocol
with counter-based termination detection.
"""

from .bnb_core import (
    BnbNode,
    DeadEndError,
    ResourceLimitError,
    Solution,
    SolveConfig,
    solve_sequential,
)
from .instance import GeneratorParams, SppInstance, generate, parse, serialize, validate
from .balance import EngineConfig, ProtocolError, RunResult, run_parallel
from .mcm import ClusterTopology, builtin_topology, load_topology, uniform_topology

__version__ = "0.1.0"

__all__ = [
    "BnbNode",
    "ClusterTopology",
    "DeadEndError",
    "EngineConfig",
    "GeneratorParams",
    "ProtocolError",
    "ResourceLimitError",
    "RunResult",
    "Solution",
    "SolveConfig",
    "SppInstance",
    "builtin_topology",
    "generate",
    "load_topology",
    "parse",
    "run_parallel",
    "serialize",
    "solve_sequential",
    "uniform_topology",
    "validate",
    "__version__",
]
