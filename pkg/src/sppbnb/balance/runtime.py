"""Runtimes that execute the engine actors.

Two interchangeable mailbox fabrics drive the same actor code:

* :class:`DeterministicScheduler` -- single-threaded; every message sits in
  a per-channel FIFO and a seeded RNG picks the next action (deliver one
  message or let one worker consume one node).  Channels can be held back
  to simulate delayed delivery, time is a virtual tick counter, and equal
  seeds replay identical runs bit for bit.
* :class:`ThreadedRuntime` -- one real thread per worker and per manager,
  queue-based mailboxes, wall-clock timing.  Machine boundaries are
  logical; with the socket transport, cross-machine envelopes additionally
  travel a localhost TCP fabric in their byte wire format.

`run_parallel` wires a topology to actors on the chosen runtime, audits
node conservation, and folds the outcome into a Solution plus RunStats.
"""

from __future__ import annotations

import queue
import random
import socket
import struct
import threading
import time
from dataclasses import dataclass
from typing import Optional

from ..bnb_core import Solution
from ..instance import SppInstance
from ..mcm import ClusterTopology
from ..metrics import RunStats, ThreadStats
from .engine import (
    DONE,
    EngineConfig,
    EngineShared,
    LeaderActor,
    ManagerActor,
    ProtocolError,
    WorkerActor,
)
from .messages import (
    Address,
    Envelope,
    LEADER,
    decode_envelope,
    encode_envelope,
    message_nodes,
    read_frame,
)


def _addr_machine(addr: Address) -> int:
    return 0 if addr.role == LEADER else addr.machine


@dataclass
class RunResult:
    solution: Solution
    stats: RunStats
    nodes_created: int
    nodes_consumed: int
    trace: Optional[list] = None


class DeterministicScheduler:
    """Single-threaded mailbox fabric with seeded, reproducible interleaving."""

    def __init__(self, seed: int = 0, trace: bool = False):
        self.rng = random.Random(seed)
        self.clock = 0
        self.actors: dict[Address, object] = {}
        self.channels: dict[tuple[Address, Address], list[Envelope]] = {}
        self.held: set[tuple[Address, Address]] = set()
        self.trace: Optional[list] = [] if trace else None

    def register(self, actor) -> None:
        self.actors[actor.addr] = actor

    def now(self) -> float:
        return float(self.clock)

    def send(self, env: Envelope) -> None:
        if self.trace is not None:
            self.trace.append((self.clock, env.src, env.dst, type(env.msg).__name__))
        self.channels.setdefault((env.src, env.dst), []).append(env)

    def hold(self, src: Address, dst: Address) -> None:
        self.held.add((src, dst))

    def release(self, src: Address, dst: Address) -> None:
        self.held.discard((src, dst))

    def in_flight_nodes(self) -> int:
        return sum(
            len(message_nodes(env.msg)) for q in self.channels.values() for env in q
        )

    def _actions(self) -> list[tuple]:
        acts: list[tuple] = []
        for key in self.channels:
            if self.channels[key] and key not in self.held:
                acts.append(("deliver", key[0], key[1]))
        for addr, actor in self.actors.items():
            if actor.wants_work():
                acts.append(("work", addr, addr))
        acts.sort(key=repr)
        return acts

    def step(self) -> bool:
        acts = self._actions()
        if not acts:
            return False
        act = acts[self.rng.randrange(len(acts))]
        if act[0] == "deliver":
            env = self.channels[(act[1], act[2])].pop(0)
            self.clock += 1
            actor = self.actors[env.dst]
            consumed = actor.handle(env) or 0
            if consumed:
                self.clock += consumed
                actor.stats.busy_time += float(consumed)
        else:
            actor = self.actors[act[1]]
            consumed = actor.work_step()
            self.clock += consumed
            actor.stats.busy_time += float(consumed)
        return True

    def finished(self) -> bool:
        if any(self.channels[k] for k in self.channels):
            return False
        return all(actor.is_done() for actor in self.actors.values())

    def run(self, max_steps: int) -> None:
        steps = 0
        while not self.finished():
            if not self.step():
                raise ProtocolError(f"scheduler deadlock: {self._dump()}")
            steps += 1
            if steps > max_steps:
                raise ProtocolError(f"step limit {max_steps} exceeded: {self._dump()}")

    def _dump(self) -> str:
        pending = {
            f"{k[0]}->{k[1]}": len(q) for k, q in self.channels.items() if q
        }
        states = {repr(a): getattr(actor, "state", "-") for a, actor in self.actors.items()}
        return f"pending={pending} held={sorted(map(repr, self.held))} states={states}"


class SocketFabric:
    """Localhost TCP mesh carrying cross-machine envelopes in wire format."""

    def __init__(self, n_machines: int, deliver):
        self._deliver = deliver
        self._stop = False
        self._listeners = []
        self._ports = []
        for _ in range(n_machines):
            srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            srv.bind(("127.0.0.1", 0))
            srv.listen(n_machines)
            srv.settimeout(5.0)
            self._listeners.append(srv)
            self._ports.append(srv.getsockname()[1])
        self._out: dict[tuple[int, int], socket.socket] = {}
        self._out_locks: dict[tuple[int, int], threading.Lock] = {}
        self._threads = []
        for i in range(n_machines):
            for j in range(n_machines):
                if i == j:
                    continue
                conn = socket.create_connection(("127.0.0.1", self._ports[j]), timeout=5.0)
                self._out[(i, j)] = conn
                self._out_locks[(i, j)] = threading.Lock()
        for i, srv in enumerate(self._listeners):
            expected = n_machines - 1
            for _ in range(expected):
                conn, _ = srv.accept()
                t = threading.Thread(target=self._reader, args=(conn,), daemon=True)
                t.start()
                self._threads.append(t)

    def _reader(self, conn: socket.socket) -> None:
        def recv_exact(n: int) -> Optional[bytes]:
            buf = b""
            while len(buf) < n:
                try:
                    chunk = conn.recv(n - len(buf))
                except OSError:
                    return None
                if not chunk:
                    return None
                buf += chunk
            return buf

        while not self._stop:
            try:
                frame = read_frame(recv_exact)
            except ValueError:
                return
            if frame is None:
                return
            self._deliver(decode_envelope(frame))

    def send(self, env: Envelope) -> None:
        key = (_addr_machine(env.src), _addr_machine(env.dst))
        with self._out_locks[key]:
            self._out[key].sendall(encode_envelope(env))

    def close(self) -> None:
        self._stop = True
        for sock in self._out.values():
            try:
                sock.close()
            except OSError:
                pass
        for srv in self._listeners:
            try:
                srv.close()
            except OSError:
                pass


class ThreadedRuntime:
    """One thread per actor; queue mailboxes; optional socket fabric between machines."""

    def __init__(self, transport: str = "memory", trace: bool = False):
        self.mailboxes: dict[Address, queue.SimpleQueue] = {}
        self.actors: dict[Address, object] = {}
        self.transport = transport
        self.fabric: Optional[SocketFabric] = None
        self.stop_flag = False
        self.trace: Optional[list] = [] if trace else None
        self._trace_lock = threading.Lock()
        self._threads: list[threading.Thread] = []

    def register(self, actor) -> None:
        self.actors[actor.addr] = actor
        self.mailboxes[actor.addr] = queue.SimpleQueue()

    def now(self) -> float:
        return time.perf_counter()

    def open_fabric(self, n_machines: int) -> None:
        if self.transport == "socket" and n_machines > 1:
            self.fabric = SocketFabric(n_machines, self._local_put)

    def _local_put(self, env: Envelope) -> None:
        self.mailboxes[env.dst].put(env)

    def send(self, env: Envelope) -> None:
        if self.trace is not None:
            with self._trace_lock:
                self.trace.append((self.now(), env.src, env.dst, type(env.msg).__name__))
        if (
            self.fabric is not None
            and _addr_machine(env.src) != _addr_machine(env.dst)
        ):
            self.fabric.send(env)
        else:
            self._local_put(env)

    def _handle_timed(self, actor, env) -> None:
        t0 = time.perf_counter()
        consumed = actor.handle(env) or 0
        if consumed:
            actor.stats.busy_time += time.perf_counter() - t0

    def _worker_loop(self, actor) -> None:
        box = self.mailboxes[actor.addr]
        while not actor.is_done() and not self.stop_flag:
            handled = False
            while True:
                try:
                    env = box.get_nowait()
                except queue.Empty:
                    break
                self._handle_timed(actor, env)
                handled = True
            if actor.is_done():
                break
            if actor.wants_work():
                t0 = time.perf_counter()
                actor.work_step()
                actor.stats.busy_time += time.perf_counter() - t0
            elif not handled:
                try:
                    env = box.get(timeout=0.02)
                except queue.Empty:
                    continue
                self._handle_timed(actor, env)

    def _reactive_loop(self, actor) -> None:
        box = self.mailboxes[actor.addr]
        started = getattr(actor, "start", None)
        if started is not None:
            t0 = time.perf_counter()
            actor.start()
            actor.stats.busy_time += time.perf_counter() - t0
        while not actor.is_done() and not self.stop_flag:
            try:
                env = box.get(timeout=0.02)
            except queue.Empty:
                continue
            actor.handle(env)

    def launch(self, workers, reactive) -> None:
        for actor in reactive:
            t = threading.Thread(target=self._reactive_loop, args=(actor,), daemon=True)
            self._threads.append(t)
        for actor in workers:
            t = threading.Thread(target=self._worker_loop, args=(actor,), daemon=True)
            self._threads.append(t)
        for t in self._threads:
            t.start()

    def join(self, timeout_s: float) -> None:
        deadline = time.monotonic() + timeout_s
        for t in self._threads:
            t.join(max(0.0, deadline - time.monotonic()))
        alive = [t for t in self._threads if t.is_alive()]
        if alive:
            self.stop_flag = True
            for t in alive:
                t.join(1.0)
            raise ProtocolError(f"run did not terminate within {timeout_s}s")

    def drain_check(self) -> None:
        for addr, box in self.mailboxes.items():
            while True:
                try:
                    env = box.get_nowait()
                except queue.Empty:
                    break
                if message_nodes(env.msg):
                    raise ProtocolError(f"undelivered load to {addr} after termination")

    def close(self) -> None:
        if self.fabric is not None:
            self.fabric.close()


class ParallelRun:
    """A prepared parallel run; execute() drives it to completion.

    Deterministic runs can also be driven manually through .runtime (step,
    hold/release) and finalized with collect() -- the protocol tests do.
    """

    def __init__(self, inst: SppInstance, topology: ClusterTopology, cfg: EngineConfig):
        self.cfg = cfg
        self.shared = EngineShared(inst, topology, cfg)
        if cfg.deterministic:
            if cfg.transport != "memory":
                raise ValueError("deterministic scheduler implies the memory transport")
            self.runtime = DeterministicScheduler(cfg.scheduler_seed, trace=cfg.trace)
        else:
            self.runtime = ThreadedRuntime(cfg.transport, trace=cfg.trace)
        self.leader = LeaderActor(self.shared, self.runtime)
        self.managers = [
            ManagerActor(self.shared, i, self.runtime) for i in range(self.shared.n_machines)
        ]
        self.workers = [
            WorkerActor(self.shared, addr, self.runtime) for addr in self.shared.worker_addrs
        ]
        self.runtime.register(self.leader)
        for actor in self.managers + self.workers:
            self.runtime.register(actor)
        self._wall: Optional[float] = None

    def execute(self) -> RunResult:
        if self.cfg.deterministic:
            sched: DeterministicScheduler = self.runtime
            consumed = self.leader.start()
            sched.clock += consumed
            self.leader.stats.busy_time += float(consumed)
            sched.run(self.cfg.max_steps)
            self._wall = float(sched.clock)
        else:
            rt: ThreadedRuntime = self.runtime
            rt.open_fabric(self.shared.n_machines)
            t0 = time.perf_counter()
            try:
                rt.launch(self.workers, [self.leader] + self.managers)
                rt.join(self.cfg.wall_timeout_s)
            finally:
                rt.close()
            self._wall = time.perf_counter() - t0
            rt.drain_check()
        return self.collect()

    def collect(self) -> RunResult:
        """Assemble the solution, audit conservation, and build run stats."""
        if self._wall is None:
            if not self.cfg.deterministic:
                raise ProtocolError("collect() before execute()")
            self._wall = float(self.runtime.clock)
        ctxs = [self.leader.ctx] + [w.ctx for w in self.workers]
        created = 1 + sum(c.nodes_generated for c in ctxs)
        consumed = sum(c.nodes_processed for c in ctxs)
        if created != consumed:
            raise ProtocolError(f"node conservation broken: created={created} consumed={consumed}")
        boards = self.shared.boards
        total_sent = sum(b.nodes_sent for b in boards)
        total_received = sum(b.nodes_received for b in boards)
        if total_sent != total_received:
            raise ProtocolError(
                f"message counters broken: sent={total_sent} received={total_received}"
            )
        best: Optional[tuple[int, int]] = None  # (cost, machine)
        chosen: tuple[int, ...] = ()
        for i, board in enumerate(boards):
            if board.best_cost is not None and (best is None or board.best_cost < best[0]):
                best = (board.best_cost, i)
                chosen = board.best_vars
        solution = Solution(
            status="Optimal" if best is not None else "Infeasible",
            best_cost=best[0] if best is not None else None,
            chosen_vars=chosen,
            nodes_expanded=sum(c.nodes_expanded for c in ctxs),
            nodes_pruned_bound=sum(c.nodes_pruned_bound for c in ctxs),
            nodes_pruned_deadend=sum(c.nodes_pruned_deadend for c in ctxs),
            nodes_feasible=sum(c.nodes_feasible for c in ctxs),
            nodes_generated=sum(c.nodes_generated for c in ctxs),
        )
        rows: list[ThreadStats] = [self.leader.stats]
        for m in self.managers:
            rows.append(m.stats)
        for w in self.workers:
            w.stats.peak_tl_bytes = w.tl.peak_bytes
            w.stats.max_node_bytes = w.tl.max_node_bytes
            rows.append(w.stats)
        stats = RunStats.build(
            instance=self.shared.inst.name,
            status=solution.status,
            best_cost=solution.best_cost,
            wall_time=self._wall,
            threads=rows,
            mode="deterministic" if self.cfg.deterministic else "threads",
            balancing=self.cfg.balancing,
            traversal=self.cfg.traversal,
            nodes_sent=total_sent,
            nodes_received=total_received,
        )
        return RunResult(
            solution=solution,
            stats=stats,
            nodes_created=created,
            nodes_consumed=consumed,
            trace=self.runtime.trace,
        )


def run_parallel(inst: SppInstance, topology: ClusterTopology, cfg: EngineConfig | None = None) -> RunResult:
    """Solve an instance on a (logical) cluster; exact, any interleaving."""
    return ParallelRun(inst, topology, cfg or EngineConfig()).execute()
