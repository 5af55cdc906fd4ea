"""Load-balance protocol vocabulary and its byte wire format.

Every cross-thread interaction is one of the typed messages below, wrapped
in an envelope carrying source and destination addresses.  The wire form is
length-prefixed with a one-byte kind tag so a socket transport can carry
the protocol unchanged: frame = u32 length | u8 kind | src | dst | payload,
big-endian throughout.  Addresses are 8 bytes (role, machine, processor,
core); search nodes serialize their id lists as u16, capping instances at
65535 items/variables.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from ..bnb_core import BnbNode

LEADER = "leader"
MANAGER = "manager"
WORKER = "worker"

_ROLE_CODE = {LEADER: 0, MANAGER: 1, WORKER: 2}
_CODE_ROLE = {v: k for k, v in _ROLE_CODE.items()}
_NONE_U16 = 0xFFFF


@dataclass(frozen=True, order=True)
class Address:
    role: str
    machine: int = -1
    proc: int = -1
    core: int = -1

    def __repr__(self):
        if self.role == LEADER:
            return "LT"
        if self.role == MANAGER:
            return f"MT{self.machine}"
        return f"T({self.machine},{self.proc},{self.core})"


def leader_addr() -> Address:
    return Address(LEADER)


def manager_addr(machine: int) -> Address:
    return Address(MANAGER, machine)


def worker_addr(machine: int, proc: int, core: int) -> Address:
    return Address(WORKER, machine, proc, core)


@dataclass(frozen=True)
class Load:
    nodes: tuple[BnbNode, ...]

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("Load must carry at least one node")


@dataclass(frozen=True)
class NoLoad:
    pass


@dataclass(frozen=True)
class LoadRequest:
    origin: Address


@dataclass(frozen=True)
class GlobalLoadRequest:
    origin_machine: int


@dataclass(frozen=True)
class GlobalLoad:
    nodes: tuple[BnbNode, ...]

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("GlobalLoad must carry at least one node")


@dataclass(frozen=True)
class GlobalNoLoad:
    pass


@dataclass(frozen=True)
class NewIncumbent:
    cost: int


@dataclass(frozen=True)
class LocalTermination:
    machine: int
    nodes_sent: int
    nodes_received: int
    revoked: bool = False


@dataclass(frozen=True)
class Terminate:
    pass


Message = (
    Load | NoLoad | LoadRequest | GlobalLoadRequest | GlobalLoad | GlobalNoLoad
    | NewIncumbent | LocalTermination | Terminate
)

_KIND_CODE = {
    Load: 1,
    NoLoad: 2,
    LoadRequest: 3,
    GlobalLoadRequest: 4,
    GlobalLoad: 5,
    GlobalNoLoad: 6,
    NewIncumbent: 7,
    LocalTermination: 8,
    Terminate: 9,
}


@dataclass(frozen=True)
class Envelope:
    src: Address
    dst: Address
    msg: Message


def message_nodes(msg: Message) -> tuple[BnbNode, ...]:
    """The search nodes a message carries (empty for non-load kinds)."""
    if isinstance(msg, (Load, GlobalLoad)):
        return msg.nodes
    return ()


def _u16(value: int) -> int:
    return _NONE_U16 if value < 0 else value


def _from_u16(value: int) -> int:
    return -1 if value == _NONE_U16 else value


def _encode_addr(addr: Address) -> bytes:
    return struct.pack(
        ">BBHHH", _ROLE_CODE[addr.role], 0, _u16(addr.machine), _u16(addr.proc), _u16(addr.core)
    )


def _decode_addr(buf: bytes, off: int) -> tuple[Address, int]:
    role, _, machine, proc, core = struct.unpack_from(">BBHHH", buf, off)
    return Address(_CODE_ROLE[role], _from_u16(machine), _from_u16(proc), _from_u16(core)), off + 8


def _encode_node(node: BnbNode) -> bytes:
    head = struct.pack(
        ">HHHHqd",
        len(node.active_items), len(node.active_vars), len(node.fixed_one),
        node.level, node.fixed_cost, node.lb,
    )
    body = struct.pack(f">{len(node.active_items)}H", *node.active_items)
    body += struct.pack(f">{len(node.active_vars)}H", *node.active_vars)
    body += struct.pack(f">{len(node.pi)}d", *node.pi)
    body += struct.pack(f">{len(node.fixed_one)}H", *node.fixed_one)
    return head + body


def _decode_node(buf: bytes, off: int) -> tuple[BnbNode, int]:
    n_items, n_vars, n_fixed, level, fixed_cost, lb = struct.unpack_from(">HHHHqd", buf, off)
    off += 24
    items = struct.unpack_from(f">{n_items}H", buf, off)
    off += 2 * n_items
    vars_ = struct.unpack_from(f">{n_vars}H", buf, off)
    off += 2 * n_vars
    pi = struct.unpack_from(f">{n_items}d", buf, off)
    off += 8 * n_items
    fixed = struct.unpack_from(f">{n_fixed}H", buf, off)
    off += 2 * n_fixed
    return BnbNode(items, vars_, fixed, fixed_cost, pi, level, lb), off


def _encode_nodes(nodes: tuple[BnbNode, ...]) -> bytes:
    return struct.pack(">I", len(nodes)) + b"".join(_encode_node(n) for n in nodes)


def _decode_nodes(buf: bytes, off: int) -> tuple[tuple[BnbNode, ...], int]:
    (count,) = struct.unpack_from(">I", buf, off)
    off += 4
    nodes = []
    for _ in range(count):
        node, off = _decode_node(buf, off)
        nodes.append(node)
    return tuple(nodes), off


def encode_envelope(env: Envelope) -> bytes:
    kind = _KIND_CODE[type(env.msg)]
    msg = env.msg
    if isinstance(msg, (Load, GlobalLoad)):
        payload = _encode_nodes(msg.nodes)
    elif isinstance(msg, LoadRequest):
        payload = _encode_addr(msg.origin)
    elif isinstance(msg, GlobalLoadRequest):
        payload = struct.pack(">H", msg.origin_machine)
    elif isinstance(msg, NewIncumbent):
        payload = struct.pack(">q", msg.cost)
    elif isinstance(msg, LocalTermination):
        payload = struct.pack(
            ">HQQB", msg.machine, msg.nodes_sent, msg.nodes_received, int(msg.revoked)
        )
    else:
        payload = b""
    body = struct.pack(">B", kind) + _encode_addr(env.src) + _encode_addr(env.dst) + payload
    return struct.pack(">I", len(body)) + body


def decode_envelope(frame: bytes) -> Envelope:
    (length,) = struct.unpack_from(">I", frame, 0)
    if length != len(frame) - 4:
        raise ValueError(f"frame length {length} does not match body size {len(frame) - 4}")
    (kind,) = struct.unpack_from(">B", frame, 4)
    src, off = _decode_addr(frame, 5)
    dst, off = _decode_addr(frame, off)
    if kind == _KIND_CODE[Load]:
        nodes, _ = _decode_nodes(frame, off)
        msg: Message = Load(nodes)
    elif kind == _KIND_CODE[NoLoad]:
        msg = NoLoad()
    elif kind == _KIND_CODE[LoadRequest]:
        origin, _ = _decode_addr(frame, off)
        msg = LoadRequest(origin)
    elif kind == _KIND_CODE[GlobalLoadRequest]:
        (origin,) = struct.unpack_from(">H", frame, off)
        msg = GlobalLoadRequest(origin)
    elif kind == _KIND_CODE[GlobalLoad]:
        nodes, _ = _decode_nodes(frame, off)
        msg = GlobalLoad(nodes)
    elif kind == _KIND_CODE[GlobalNoLoad]:
        msg = GlobalNoLoad()
    elif kind == _KIND_CODE[NewIncumbent]:
        (cost,) = struct.unpack_from(">q", frame, off)
        msg = NewIncumbent(cost)
    elif kind == _KIND_CODE[LocalTermination]:
        machine, sent, received, revoked = struct.unpack_from(">HQQB", frame, off)
        msg = LocalTermination(machine, sent, received, bool(revoked))
    elif kind == _KIND_CODE[Terminate]:
        msg = Terminate()
    else:
        raise ValueError(f"unknown message kind tag {kind}")
    return Envelope(src, dst, msg)


def read_frame(recv_exact) -> bytes | None:
    """Assemble one frame from a function reading exactly n bytes (None at EOF)."""
    head = recv_exact(4)
    if head is None:
        return None
    (length,) = struct.unpack(">I", head)
    body = recv_exact(length)
    if body is None:
        raise ValueError("truncated frame")
    return head + body
