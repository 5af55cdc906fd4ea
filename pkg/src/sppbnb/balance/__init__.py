"""Parallel engine: message protocol, load balancing, termination detection."""

from .engine import (
    EngineConfig,
    EngineShared,
    LeaderActor,
    ManagerActor,
    MachineBoard,
    ProtocolError,
    WorkerActor,
    naive_termination_decision,
    split_evenly,
    termination_decision,
)
from .messages import (
    Address,
    Envelope,
    GlobalLoad,
    GlobalLoadRequest,
    GlobalNoLoad,
    Load,
    LoadRequest,
    LocalTermination,
    NewIncumbent,
    NoLoad,
    Terminate,
    decode_envelope,
    encode_envelope,
    leader_addr,
    manager_addr,
    worker_addr,
)
from .runtime import DeterministicScheduler, ParallelRun, RunResult, ThreadedRuntime, run_parallel

__all__ = [
    "Address",
    "DeterministicScheduler",
    "Envelope",
    "EngineConfig",
    "EngineShared",
    "GlobalLoad",
    "GlobalLoadRequest",
    "GlobalNoLoad",
    "LeaderActor",
    "Load",
    "LoadRequest",
    "LocalTermination",
    "MachineBoard",
    "ManagerActor",
    "NewIncumbent",
    "NoLoad",
    "ParallelRun",
    "ProtocolError",
    "RunResult",
    "Terminate",
    "ThreadedRuntime",
    "WorkerActor",
    "decode_envelope",
    "encode_envelope",
    "leader_addr",
    "manager_addr",
    "naive_termination_decision",
    "run_parallel",
    "split_evenly",
    "termination_decision",
    "worker_addr",
]
