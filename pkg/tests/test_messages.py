import io
import random

import pytest

from sppbnb.balance.messages import (
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
    message_nodes,
    read_frame,
    worker_addr,
)
from sppbnb.bnb_core import BnbNode


def random_node(rng):
    n_items = rng.randint(0, 6)
    n_vars = rng.randint(0, 9)
    n_fixed = rng.randint(0, 4)
    return BnbNode(
        active_items=tuple(sorted(rng.sample(range(50), n_items))),
        active_vars=tuple(sorted(rng.sample(range(200), n_vars))),
        fixed_one=tuple(rng.sample(range(200), n_fixed)),
        fixed_cost=rng.randint(0, 10**6),
        pi=tuple(rng.uniform(-50, 50) for _ in range(n_items)),
        level=rng.randint(0, 30),
        lb=rng.uniform(-10, 1e6),
    )


def test_load_requires_nodes():
    with pytest.raises(ValueError):
        Load(())
    with pytest.raises(ValueError):
        GlobalLoad(())


def test_roundtrip_all_kinds():
    rng = random.Random(77)
    nodes = tuple(random_node(rng) for _ in range(3))
    cases = [
        Envelope(worker_addr(0, 0, 1), worker_addr(0, 0, 0), Load(nodes)),
        Envelope(worker_addr(1, 1, 0), worker_addr(0, 0, 0), NoLoad()),
        Envelope(worker_addr(0, 0, 0), worker_addr(0, 0, 1), LoadRequest(worker_addr(0, 0, 0))),
        Envelope(manager_addr(1), manager_addr(0), GlobalLoadRequest(1)),
        Envelope(manager_addr(0), manager_addr(1), GlobalLoad(nodes[:1])),
        Envelope(manager_addr(0), manager_addr(1), GlobalNoLoad()),
        Envelope(worker_addr(0, 1, 1), manager_addr(0), NewIncumbent(12345)),
        Envelope(manager_addr(1), leader_addr(), LocalTermination(1, 42, 40)),
        Envelope(manager_addr(1), leader_addr(), LocalTermination(1, 7, 7, revoked=True)),
        Envelope(leader_addr(), manager_addr(1), Terminate()),
    ]
    for env in cases:
        raw = encode_envelope(env)
        back = decode_envelope(raw)
        assert back.src == env.src
        assert back.dst == env.dst
        if message_nodes(env.msg):
            got = message_nodes(back.msg)
            for a, b in zip(message_nodes(env.msg), got):
                assert a.active_items == b.active_items
                assert a.active_vars == b.active_vars
                assert a.fixed_one == b.fixed_one
                assert a.fixed_cost == b.fixed_cost
                assert a.pi == b.pi
                assert a.level == b.level
                assert a.lb == b.lb
        else:
            assert back.msg == env.msg


def test_wire_format_frame_shape():
    env = Envelope(leader_addr(), manager_addr(0), Terminate())
    raw = encode_envelope(env)
    # u32 length prefix covering the body, then the 1-byte kind tag.
    assert int.from_bytes(raw[:4], "big") == len(raw) - 4
    assert raw[4] == 9


def test_length_mismatch_rejected():
    raw = bytearray(encode_envelope(Envelope(leader_addr(), manager_addr(0), Terminate())))
    raw[3] += 1
    with pytest.raises(ValueError):
        decode_envelope(bytes(raw))


def test_read_frame_stream():
    rng = random.Random(5)
    envs = [
        Envelope(manager_addr(0), manager_addr(1), GlobalLoad((random_node(rng),))),
        Envelope(leader_addr(), manager_addr(1), Terminate()),
    ]
    stream = io.BytesIO(b"".join(encode_envelope(e) for e in envs))

    def recv_exact(n):
        data = stream.read(n)
        return data if len(data) == n else None

    out = []
    while True:
        frame = read_frame(recv_exact)
        if frame is None:
            break
        out.append(decode_envelope(frame))
    assert len(out) == 2
    assert isinstance(out[1].msg, Terminate)
