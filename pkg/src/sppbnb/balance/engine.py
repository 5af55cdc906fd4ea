"""Parallel search engine: leader, managers, and workers exchanging messages.

Roles
-----
* The leader (one per run, on machine 0) solves the root node, splits the
  resulting children evenly over all workers, and owns the termination
  decision.
* One manager per machine escalates unsatisfied local load requests to
  other machines, splits remotely obtained load among its waiting workers,
  and reports local termination to the leader.
* One worker per core consumes its bounded local node list; when the list
  empties it asks a neighbor core, then every other core of its machine,
  then its manager.

A machine reports local termination when all of its workers are parked at
the manager, the global list is empty, no remote request is outstanding,
and a full probe round over the other machines came back empty.  Reports
piggyback the machine's counts of nodes shipped and received in load
messages; the leader only terminates the run when every machine has
reported and the global counts match, which keeps in-flight load safe.
Reports are revocable: a machine that receives load afterwards announces
itself active again.

Workers never share lists; all transfers are message-based.  The incumbent
is one monotonically decreasing value per machine, shared by its threads
and synchronized across machines with broadcast messages.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..bnb_core import (
    BnbNode,
    NodeList,
    SearchContext,
    Solution,
    make_root,
    process_node,
    push_within_budget,
)
from ..instance import SppInstance
from ..mcm import ClusterTopology, worker_budget
from ..metrics import RunStats, ThreadStats
from .messages import (
    Address,
    Envelope,
    GlobalLoad,
    GlobalLoadRequest,
    GlobalNoLoad,
    Load,
    LoadRequest,
    LocalTermination,
    MANAGER,
    Message,
    NewIncumbent,
    NoLoad,
    Terminate,
    WORKER,
    leader_addr,
    manager_addr,
    message_nodes,
    worker_addr,
)


class ProtocolError(RuntimeError):
    """The run violated a safety/liveness guarantee (lost nodes, deadlock, ...)."""


@dataclass
class EngineConfig:
    """Knobs of a parallel run."""

    traversal: str = "breadth"  # "breadth" (budgeted FIFO) | "depth" (LIFO)
    list_limit_bytes: Optional[int] = None  # overrides per-core cache budgets
    nt: int = 1  # waiting workers needed before the manager asks another machine
    balancing: bool = True  # False = initial distribution only, idle workers stay idle
    skew_initial: bool = False  # all initial load to the first worker (stress mode)
    deterministic: bool = False  # single-threaded scheduler instead of threads
    scheduler_seed: int = 0
    transport: str = "memory"  # "memory" | "socket" (threaded mode only)
    max_nodes: Optional[int] = None
    max_steps: int = 50_000_000  # deterministic-scheduler safety valve
    wall_timeout_s: float = 600.0  # threaded-mode safety valve
    trace: bool = False
    initial_solution: Optional[tuple[int, tuple[int, ...]]] = None  # warm start (cost, vars)

    def __post_init__(self):
        if self.traversal not in ("breadth", "depth"):
            raise ValueError(f"unknown traversal {self.traversal!r}")
        if self.nt < 1:
            raise ValueError("nt must be >= 1")
        if self.transport not in ("memory", "socket"):
            raise ValueError(f"unknown transport {self.transport!r}")


class MachineBoard:
    """Per-machine shared state: incumbent and load-message node counters."""

    def __init__(self, machine: int):
        self.machine = machine
        self._lock = threading.Lock()
        self.threshold = math.inf  # best cost known machine-wide
        self.best_cost: Optional[int] = None  # best found by this machine's threads
        self.best_vars: tuple[int, ...] = ()
        self.nodes_sent = 0
        self.nodes_received = 0

    def offer_local(self, cost: int, chosen: tuple[int, ...]) -> bool:
        with self._lock:
            if self.best_cost is None or cost < self.best_cost:
                self.best_cost, self.best_vars = cost, chosen
            if cost < self.threshold:
                self.threshold = cost
                return True
            return False

    def offer_remote(self, cost: int) -> None:
        with self._lock:
            if cost < self.threshold:
                self.threshold = cost

    def count_sent(self, n: int) -> None:
        with self._lock:
            self.nodes_sent += n

    def count_received(self, n: int) -> None:
        with self._lock:
            self.nodes_received += n

    def counter_snapshot(self) -> tuple[int, int]:
        with self._lock:
            return self.nodes_sent, self.nodes_received


class SharedIncumbent:
    """Incumbent view handed to a worker's search context."""

    __slots__ = ("board", "on_improve")

    def __init__(self, board: MachineBoard, on_improve: Callable[[int], None]):
        self.board = board
        self.on_improve = on_improve

    def threshold(self) -> float:
        return self.board.threshold

    def offer(self, cost: int, chosen: tuple[int, ...]) -> bool:
        if self.board.offer_local(cost, chosen):
            self.on_improve(cost)
            return True
        return False


class EngineShared:
    """Read-only run context shared by every actor."""

    def __init__(self, inst: SppInstance, topology: ClusterTopology, cfg: EngineConfig):
        self.inst = inst
        self.topology = topology
        self.cfg = cfg
        self.n_machines = len(topology.machines)
        self.worker_addrs = [worker_addr(*t) for t in topology.worker_addresses()]
        self.boards = [MachineBoard(i) for i in range(self.n_machines)]
        if cfg.initial_solution is not None:
            cost, chosen = cfg.initial_solution
            self.boards[0].best_cost = cost
            self.boards[0].best_vars = tuple(chosen)
            for board in self.boards:
                board.threshold = cost
        self.budgets: dict[Address, Optional[int]] = {}
        for addr in self.worker_addrs:
            if cfg.traversal == "depth":
                self.budgets[addr] = None
            elif cfg.list_limit_bytes is not None:
                self.budgets[addr] = cfg.list_limit_bytes
            else:
                self.budgets[addr] = worker_budget(topology, addr.machine, addr.proc, addr.core)

    def machine_workers(self, machine: int) -> list[Address]:
        return [a for a in self.worker_addrs if a.machine == machine]


# Worker lifecycle states.
INIT = "init"  # waiting for the initial load/no-load marker
BUSY = "busy"
PROBING = "probing"  # a local probe is outstanding
ESCALATED = "escalated"  # parked at the manager
DONE = "done"


class WorkerActor:
    """One search thread pinned to a core."""

    def __init__(self, shared: EngineShared, addr: Address, runtime):
        self.shared = shared
        self.addr = addr
        self.rt = runtime
        self.board = shared.boards[addr.machine]
        self.budget = shared.budgets[addr]
        self.tl = NodeList()
        self.state = INIT
        self.probe_queue: list[Address] = []
        self.probe_target: Optional[Address] = None
        self.last_broadcast = math.inf
        self.stats = ThreadStats(role=WORKER, machine=addr.machine, proc=addr.proc, core=addr.core)
        self._phase_start = 0.0
        self.ctx = SearchContext(
            inst=shared.inst,
            incumbent=SharedIncumbent(self.board, self._announce_incumbent),
            max_nodes=shared.cfg.max_nodes,
        )

    # -- runtime interface -------------------------------------------------

    def wants_work(self) -> bool:
        return self.state == BUSY and len(self.tl) > 0

    def is_done(self) -> bool:
        return self.state == DONE

    def work_step(self) -> int:
        """Consume one node (plus any budget fallback); returns nodes consumed."""
        before = self.ctx.nodes_processed
        if self.shared.cfg.traversal == "breadth":
            node = self.tl.pop_oldest()
        else:
            node = self.tl.pop_newest()
        self._insert(process_node(node, self.ctx))
        consumed = self.ctx.nodes_processed - before
        self.stats.nodes = self.ctx.nodes_processed
        if not len(self.tl):
            self._start_idle()
        return consumed

    def start(self) -> int:
        return 0

    # -- message handling --------------------------------------------------

    def handle(self, env: Envelope) -> int:
        """Process one message; returns nodes consumed (receipt may trigger
        an immediate budget fallback)."""
        if self.state == DONE:
            if message_nodes(env.msg):
                raise ProtocolError(f"{self.addr} received load after terminating")
            return 0
        before = self.ctx.nodes_processed
        msg = env.msg
        if isinstance(msg, Load):
            self._receive_nodes(msg.nodes)
        elif isinstance(msg, NoLoad):
            if self.state == INIT:
                self.state = BUSY  # marker consumed; idle flow starts below
                self._start_idle()
            elif self.state == PROBING and env.src == self.probe_target:
                self._advance_probe()
            elif self.state == ESCALATED and env.src.role == MANAGER:
                # Empty share of a remote delivery: retry the local round.
                self._close_phase()
                self.state = BUSY
                self._start_idle()
        elif isinstance(msg, LoadRequest):
            self._answer_request(env.src, msg.origin)
        elif isinstance(msg, NewIncumbent):
            self.board.offer_remote(msg.cost)
        elif isinstance(msg, Terminate):
            self._close_phase()
            self.state = DONE
        self.stats.nodes = self.ctx.nodes_processed
        return self.ctx.nodes_processed - before

    # -- internals ----------------------------------------------------------

    def _send(self, dst: Address, msg: Message) -> None:
        self.rt.send(Envelope(self.addr, dst, msg))

    def _announce_incumbent(self, cost: int) -> None:
        if cost < self.last_broadcast:
            self.last_broadcast = cost
            self._send(manager_addr(self.addr.machine), NewIncumbent(cost))

    def _insert(self, nodes) -> None:
        budget = self.budget if self.shared.cfg.traversal == "breadth" else None
        push_within_budget(self.tl, nodes, budget, self.ctx)

    def _receive_nodes(self, nodes: tuple[BnbNode, ...]) -> None:
        self.board.count_received(len(nodes))
        self._close_phase()
        self.state = BUSY
        self.probe_target = None
        self.probe_queue = []
        self._insert(nodes)
        if not len(self.tl):
            # The budget fallback may have consumed everything on the spot.
            self._start_idle()

    def _close_phase(self) -> None:
        if self.state == PROBING:
            self.stats.local_balance_time += self.rt.now() - self._phase_start
        elif self.state == ESCALATED:
            self.stats.global_balance_time += self.rt.now() - self._phase_start

    def _start_idle(self) -> None:
        if not self.shared.cfg.balancing:
            self._escalate()
            return
        self.probe_queue = self._probe_round()
        if not self.probe_queue:
            self._escalate()
            return
        self.state = PROBING
        self._phase_start = self.rt.now()
        self._probe_next()

    def _probe_round(self) -> list[Address]:
        """Local targets for one idle round: sibling cores first, then the
        other processors of the machine, every local worker at most once."""
        topo = self.shared.topology
        machine = topo.machines[self.addr.machine]
        my_proc = machine.processors[self.addr.proc]
        cores = sorted(my_proc.cores)
        pos = cores.index(self.addr.core)
        targets = [
            worker_addr(self.addr.machine, self.addr.proc, cores[(pos + d) % len(cores)])
            for d in range(1, len(cores))
        ]
        n_procs = len(machine.processors)
        for dj in range(1, n_procs):
            j = (self.addr.proc + dj) % n_procs
            for core in sorted(machine.processors[j].cores):
                targets.append(worker_addr(self.addr.machine, j, core))
        return targets

    def _probe_next(self) -> None:
        self.probe_target = self.probe_queue.pop(0)
        self.stats.local_requests += 1
        self._send(self.probe_target, LoadRequest(origin=self.addr))

    def _advance_probe(self) -> None:
        if self.probe_queue:
            self._probe_next()
        else:
            self.stats.local_balance_time += self.rt.now() - self._phase_start
            self._escalate(start_clock=True)

    def _escalate(self, start_clock: bool = True) -> None:
        self.state = ESCALATED
        self.probe_target = None
        if start_clock:
            self._phase_start = self.rt.now()
        self.stats.local_requests += 1
        self._send(manager_addr(self.addr.machine), LoadRequest(origin=self.addr))

    def _answer_request(self, reply_to: Address, origin: Address) -> None:
        if not len(self.tl):
            self._send(reply_to, NoLoad())
            return
        half = max(1, len(self.tl) // 2)
        if origin.role == WORKER:
            fit = self._fit_count(self.shared.budgets.get(origin))
        else:
            fit = len(self.tl)  # manager collections feed the uncapped global list
        count = min(half, fit)
        batch = tuple(self.tl.pop_oldest() for _ in range(count))
        self.board.count_sent(len(batch))
        self._send(reply_to, Load(batch))
        if self.state == BUSY and not len(self.tl):
            self._start_idle()

    def _fit_count(self, budget: Optional[int]) -> int:
        """Oldest-prefix length fitting the requester's budget, at least one
        node (a single node may exceed the budget by design)."""
        if budget is None:
            return len(self.tl)
        total = 0
        count = 0
        for node in self.tl.nodes:
            total += node.size_bytes()
            if total > budget and count >= 1:
                break
            count += 1
            if total > budget:
                break
        return max(count, 1)


class ManagerActor:
    """Per-machine coordinator: remote load fetching and termination reports."""

    def __init__(self, shared: EngineShared, machine: int, runtime):
        self.shared = shared
        self.machine = machine
        self.addr = manager_addr(machine)
        self.rt = runtime
        self.board = shared.boards[machine]
        self.workers = shared.machine_workers(machine)
        self.waiting: list[Address] = []
        self.total_idle = 0
        self.cursor = machine  # last machine probed; rounds start after it
        self.round_remaining: list[int] = []
        self.outstanding = False
        self.ml: list[BnbNode] = []
        self.collections: list[int] = []  # queued requesting machines
        self.current_collection: Optional[int] = None
        self.collected: list[BnbNode] = []
        self.replies = 0
        self.reported = False
        self.last_broadcast = math.inf
        self.done = False
        self.stats = ThreadStats(role="manager", machine=machine)

    def wants_work(self) -> bool:
        return False

    def is_done(self) -> bool:
        return self.done

    def start(self) -> int:
        return 0

    def handle(self, env: Envelope) -> None:
        if self.done:
            if message_nodes(env.msg):
                raise ProtocolError(f"{self.addr} received load after terminating")
            return
        msg = env.msg
        if isinstance(msg, LoadRequest):
            self._on_worker_idle(msg.origin)
        elif isinstance(msg, Load):
            self._on_collection_reply(msg.nodes)
        elif isinstance(msg, NoLoad):
            self._on_collection_reply(())
        elif isinstance(msg, GlobalLoadRequest):
            self._on_remote_request(msg.origin_machine)
        elif isinstance(msg, GlobalLoad):
            self._on_global_load(msg.nodes)
        elif isinstance(msg, GlobalNoLoad):
            self._on_global_noload()
        elif isinstance(msg, NewIncumbent):
            self._on_incumbent(env.src, msg.cost)
        elif isinstance(msg, Terminate):
            for w in self.workers:
                self._send(w, Terminate())
            self.done = True

    # -- handlers ------------------------------------------------------------

    def _send(self, dst: Address, msg: Message) -> None:
        self.rt.send(Envelope(self.addr, dst, msg))

    def _on_worker_idle(self, origin: Address) -> None:
        if origin not in self.waiting:
            self.waiting.append(origin)
            self.total_idle += 1
        if self.ml:
            # Leftover global-list nodes must not strand while workers wait.
            self._distribute()
            return
        self._maybe_probe_remote()
        self._maybe_report()

    def _maybe_probe_remote(self) -> None:
        cfg = self.shared.cfg
        if not cfg.balancing or self.shared.n_machines < 2:
            return
        if self.outstanding or self.reported:
            return
        if self.total_idle < min(cfg.nt, len(self.workers)):
            return
        if not self.round_remaining:
            # One full cycle over the other machines, starting after the cursor.
            self.round_remaining = [
                (self.cursor + d) % self.shared.n_machines
                for d in range(1, self.shared.n_machines + 1)
                if (self.cursor + d) % self.shared.n_machines != self.machine
            ]
        self._probe_next_machine()

    def _probe_next_machine(self) -> None:
        self.cursor = self.round_remaining.pop(0)
        self.outstanding = True
        self.stats.global_requests += 1
        self._send(manager_addr(self.cursor), GlobalLoadRequest(origin_machine=self.machine))

    def _on_global_noload(self) -> None:
        self.outstanding = False
        if self.round_remaining:
            self._probe_next_machine()
        else:
            self._maybe_report()

    def _on_global_load(self, nodes: tuple[BnbNode, ...]) -> None:
        self.board.count_received(len(nodes))
        self.outstanding = False
        self.round_remaining = []
        self.cursor = self.machine  # restart probing right after self next time
        if self.reported:
            self._revoke()
        self.ml.extend(nodes)
        self._distribute()

    def _distribute(self) -> None:
        """Split the global list over the waiting workers, remainder to the
        lowest addresses; workers that get nothing are told to retry locally."""
        if not self.waiting:
            return
        recipients = sorted(self.waiting)
        base, rem = divmod(len(self.ml), len(recipients))
        pos = 0
        for idx, dst in enumerate(recipients):
            share = base + (1 if idx < rem else 0)
            if share > 0:
                batch = tuple(self.ml[pos:pos + share])
                pos += share
                self.board.count_sent(len(batch))
                self._send(dst, Load(batch))
            else:
                self._send(dst, NoLoad())
        self.ml = self.ml[pos:]
        self.waiting = []
        self.total_idle = 0

    def _on_remote_request(self, origin_machine: int) -> None:
        self.collections.append(origin_machine)
        if self.current_collection is None:
            self._begin_collection()

    def _begin_collection(self) -> None:
        self.current_collection = self.collections.pop(0)
        self.collected = []
        self.replies = 0
        for w in self.workers:
            self._send(w, LoadRequest(origin=self.addr))

    def _on_collection_reply(self, nodes: tuple[BnbNode, ...]) -> None:
        if self.current_collection is None:
            raise ProtocolError(f"{self.addr} got a collection reply with no collection open")
        if nodes:
            self.board.count_received(len(nodes))
        self.collected.extend(nodes)
        self.replies += 1
        if self.replies < len(self.workers):
            return
        origin = self.current_collection
        self.current_collection = None
        if self.collected:
            batch = tuple(self.collected)
            self.collected = []
            self.board.count_sent(len(batch))
            self._send(manager_addr(origin), GlobalLoad(batch))
        else:
            self._send(manager_addr(origin), GlobalNoLoad())
        if self.collections:
            self._begin_collection()

    def _on_incumbent(self, src: Address, cost: int) -> None:
        self.board.offer_remote(cost)
        if src.role != MANAGER and cost < self.last_broadcast:
            # Local finds (worker or leader) fan out once to every peer.
            self.last_broadcast = cost
            for i in range(self.shared.n_machines):
                if i != self.machine:
                    self._send(manager_addr(i), NewIncumbent(cost))

    def _maybe_report(self) -> None:
        if self.reported or self.total_idle < len(self.workers) or self.ml:
            return
        if self.shared.cfg.balancing and self.shared.n_machines > 1:
            if self.outstanding or self.round_remaining:
                return
            # Require one full probe round performed while everyone is idle.
            if self.cursor == self.machine:
                self._maybe_probe_remote()
                return
        self.reported = True
        sent, received = self.board.counter_snapshot()
        self._send(leader_addr(), LocalTermination(self.machine, sent, received))

    def _revoke(self) -> None:
        self.reported = False
        sent, received = self.board.counter_snapshot()
        self._send(
            leader_addr(), LocalTermination(self.machine, sent, received, revoked=True)
        )


def split_evenly(nodes: list[BnbNode], recipients: list[Address]) -> list[tuple[BnbNode, ...]]:
    """Even shares in recipient order, the remainder going one-extra to the
    earliest recipients; zero shares are possible when nodes run short."""
    base, rem = divmod(len(nodes), len(recipients))
    shares = []
    pos = 0
    for idx in range(len(recipients)):
        count = base + (1 if idx < rem else 0)
        shares.append(tuple(nodes[pos:pos + count]))
        pos += count
    return shares


def termination_decision(reports: dict[int, Optional[tuple[int, int]]], n_machines: int) -> bool:
    """Counter-matching rule: all machines reported and no load is in flight."""
    if len(reports) < n_machines or any(reports.get(i) is None for i in range(n_machines)):
        return False
    sent = sum(reports[i][0] for i in range(n_machines))
    received = sum(reports[i][1] for i in range(n_machines))
    return sent == received


def naive_termination_decision(
    reports: dict[int, Optional[tuple[int, int]]], n_machines: int
) -> bool:
    """The unsafe rule: everyone reported, in-flight messages ignored."""
    return len(reports) >= n_machines and all(
        reports.get(i) is not None for i in range(n_machines)
    )


class LeaderActor:
    """Starts the run, collects local-termination reports, ends the run."""

    def __init__(self, shared: EngineShared, runtime):
        self.shared = shared
        self.addr = leader_addr()
        self.rt = runtime
        self.board = shared.boards[0]
        self.reports: dict[int, Optional[tuple[int, int]]] = {}
        self.finished = False
        self.done = False
        self.stats = ThreadStats(role="leader", machine=0)
        self.ctx = SearchContext(
            inst=shared.inst,
            incumbent=SharedIncumbent(self.board, self._announce_incumbent),
            max_nodes=shared.cfg.max_nodes,
        )

    def wants_work(self) -> bool:
        return False

    def is_done(self) -> bool:
        return self.done

    def _send(self, dst: Address, msg: Message) -> None:
        self.rt.send(Envelope(self.addr, dst, msg))

    def _announce_incumbent(self, cost: int) -> None:
        self._send(manager_addr(0), NewIncumbent(cost))

    def start(self) -> int:
        """Solve the root and hand out the initial distribution."""
        root = make_root(self.shared.inst)
        children = process_node(root, self.ctx)
        self.stats.nodes += self.ctx.nodes_processed
        workers = self.shared.worker_addrs
        if self.shared.cfg.skew_initial:
            shares = [tuple(children)] + [()] * (len(workers) - 1)
        else:
            shares = split_evenly(children, workers)
        for dst, share in zip(workers, shares):
            if share:
                self.board.count_sent(len(share))
                self._send(dst, Load(share))
            else:
                self._send(dst, NoLoad())
        return self.ctx.nodes_processed

    def handle(self, env: Envelope) -> None:
        msg = env.msg
        if isinstance(msg, LocalTermination):
            self.reports[msg.machine] = (
                None if msg.revoked else (msg.nodes_sent, msg.nodes_received)
            )
            if termination_decision(self.reports, self.shared.n_machines):
                for i in range(self.shared.n_machines):
                    self._send(manager_addr(i), Terminate())
                self.finished = True
                self.done = True
        elif isinstance(msg, NewIncumbent):
            self.board.offer_remote(msg.cost)
