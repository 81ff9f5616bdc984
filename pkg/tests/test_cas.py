import random

import pytest

from plschain.cas import (
    CasStore,
    DirBackend,
    HashBreakAlarm,
    IntegrityError,
    MemoryBackend,
    TriggerManager,
    WsProof,
    parse_ws,
    serialize_ws,
)
from plschain.ledger import RecordAddress
from plschain.primitives import hash_data


def test_put_idempotent():
    store = CasStore()
    name = store.put(b"content")
    assert store.put(b"content") == name
    assert len(store) == 1
    assert name == hash_data(b"content")


def test_put_distinct_names():
    store = CasStore()
    rng = random.Random(3)
    names = {store.put(rng.randbytes(20)) for _ in range(500)}
    assert len(names) == 500


def test_get_round_trip_and_absent():
    store = CasStore()
    name = store.put(b"some bytes")
    assert store.get(name) == b"some bytes"
    assert store.get(b"\x00" * 32) is None


def test_hash_break_detected_not_overwritten():
    store = CasStore()
    name = store.put(b"original")
    store.backend.save(name.hex(), b"swapped!")
    with pytest.raises(HashBreakAlarm):
        store.put(b"original")


def test_tampered_backing_file_fails_integrity(tmp_path):
    store = CasStore(DirBackend(str(tmp_path)))
    name = store.put(b"payload on disk")
    path = store.backend._path(name.hex())
    with open(path, "wb") as fh:
        fh.write(b"tampered bytes!!")
    with pytest.raises(IntegrityError):
        store.get(name)


def test_dir_backend_fanout(tmp_path):
    store = CasStore(DirBackend(str(tmp_path)))
    name = store.put(b"abc")
    hexname = name.hex()
    assert (tmp_path / hexname[:2] / hexname[2:4] / hexname).exists()
    assert len(store) == 1
    assert store.get(name) == b"abc"


def test_ws_serialization_roundtrip():
    ws = WsProof(round=9, uid=b"\xaa\xbb", h_m=hash_data(b"doc"),
                 lv_addr=RecordAddress(7, 0), s_addr=RecordAddress(5, 3))
    wire = serialize_ws(ws)
    assert len(wire) == 4 + 2 + 32 + 16
    assert parse_ws(wire) == ws


def _ws(uid, content, round=1, block=3):
    return WsProof(round=round, uid=uid, h_m=hash_data(content),
                   lv_addr=RecordAddress(block, 0), s_addr=RecordAddress(block - 1, 0))


def test_trigger_fires_on_matching_content():
    mgr = TriggerManager(CasStore())
    ws = _ws(b"\x01\x02", b"the document")
    name = mgr.register_trigger(ws, current_block=4)
    fired = mgr.submit_content(b"\x01\x02", b"the document", current_block=5)
    assert [c.ws_name for c in fired] == [name]
    assert fired[0].h_m == hash_data(b"the document")
    assert not mgr.active
    # content and proof object both retrievable by any witness
    assert mgr.store.get(name) == serialize_ws(ws)
    assert mgr.store.get(hash_data(b"the document")) == b"the document"


def test_submission_without_trigger_refused():
    mgr = TriggerManager(CasStore())
    assert mgr.submit_content(b"\x01\x02", b"unheralded", current_block=5) == []
    assert mgr.store.get(hash_data(b"unheralded")) is None


def test_trigger_is_per_uid():
    mgr = TriggerManager(CasStore())
    mgr.register_trigger(_ws(b"\x01\x02", b"doc"), current_block=4)
    assert mgr.submit_content(b"\x99\x99", b"doc", current_block=5) == []
    assert len(mgr.active) == 1


def test_multiple_proofs_fire_together():
    mgr = TriggerManager(CasStore())
    a = mgr.register_trigger(_ws(b"\x01\x02", b"doc", block=3), 4)
    b = mgr.register_trigger(_ws(b"\x01\x02", b"doc", block=5), 6)
    assert a != b
    fired = mgr.submit_content(b"\x01\x02", b"doc", 7)
    assert {c.ws_name for c in fired} == {a, b}


def test_reregistering_identical_proof_is_noop():
    mgr = TriggerManager(CasStore())
    ws = _ws(b"\x01\x02", b"doc")
    name = mgr.register_trigger(ws, 4)
    assert mgr.register_trigger(ws, 9) == name
    assert len(mgr.active) == 1
    assert mgr.active[name].created_block == 4


def test_expiry_arithmetic():
    mgr = TriggerManager(CasStore(), expiry_after=16)
    name = mgr.register_trigger(_ws(b"\x01\x02", b"doc"), current_block=10)
    assert mgr.expire_triggers(current_block=26) == []
    assert mgr.expire_triggers(current_block=27) == [name]
    assert [t.ws_name for t in mgr.security_log] == [name]


def test_fired_trigger_never_expires():
    mgr = TriggerManager(CasStore(), expiry_after=4)
    mgr.register_trigger(_ws(b"\x01\x02", b"doc"), current_block=10)
    mgr.submit_content(b"\x01\x02", b"doc", current_block=12)
    assert mgr.expire_triggers(current_block=100) == []
    assert mgr.security_log == []


def test_expiry_deterministic_order():
    def run():
        mgr = TriggerManager(CasStore(), expiry_after=2)
        for i in range(6):
            mgr.register_trigger(_ws(bytes([i, i]), f"doc {i}".encode()), current_block=i)
        return mgr.expire_triggers(current_block=9)

    assert run() == run()


def test_every_trigger_ends_fired_xor_expired():
    rng = random.Random(77)
    mgr = TriggerManager(CasStore(), expiry_after=5)
    outcomes = {}
    block = 0
    pending = []
    for step in range(300):
        block += 1
        action = rng.random()
        if action < 0.45:
            content = f"doc {step}".encode()
            uid = bytes([rng.randrange(4), 0])
            name = mgr.register_trigger(_ws(uid, content, block=block), block)
            outcomes[name] = None
            pending.append((uid, content, name))
        elif action < 0.75 and pending:
            uid, content, _ = pending.pop(rng.randrange(len(pending)))
            for conf in mgr.submit_content(uid, content, block):
                assert outcomes[conf.ws_name] is None
                outcomes[conf.ws_name] = "fired"
        for name in mgr.expire_triggers(block):
            assert outcomes[name] is None
            outcomes[name] = "expired"
    for name in mgr.expire_triggers(block + 100):
        outcomes[name] = "expired"
    assert all(v in ("fired", "expired") for v in outcomes.values())


def test_memory_backend_interface():
    backend = MemoryBackend()
    assert backend.load("aa") is None
    backend.save("aa", b"x")
    assert backend.exists("aa") and backend.load("aa") == b"x"
