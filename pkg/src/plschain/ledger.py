"""Block model and Fog-Server-side machinery.

Covers the typed ledger records and their addresses, canonical block
serialization (hashed and broadcast by the sequencer), the user registry
with the prefix-based enrolment handshake, the short-MAC noise filter, and
the proxy authenticator used to recruit healthy receivers into re-broadcast
groups.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .emergency import NonceSchedule
from .merkle import MerkleForest
from .pls import PlsBroadcast, PlsTransmitter
from .primitives import DEFAULT_HASH_LEN, decrypt, encrypt, hash_data, mac, random_bytes, xor_bytes

RECORD_TYPES = ("P", "S", "LV", "C", "G")
_TAG = {"P": 0x50, "S": 0x53, "LV": 0x4C, "C": 0x43, "G": 0x47}
_TAG_REV = {v: k for k, v in _TAG.items()}

MAC_TRAILER_LEN = 2


class EnrolmentError(Exception):
    pass


@dataclass(frozen=True)
class Record:
    """One ledger record. ``uid`` is empty only for G (root-set) records."""

    rtype: str
    uid: bytes
    payload: bytes

    def lv_parts(self, hash_len: int = DEFAULT_HASH_LEN) -> tuple[bytes, bytes]:
        if self.rtype != "LV":
            raise ValueError(f"not an LV record: {self.rtype}")
        return self.payload[:hash_len], self.payload[hash_len:]

    def c_parts(self, hash_len: int = DEFAULT_HASH_LEN) -> tuple[bytes, bytes]:
        if self.rtype != "C":
            raise ValueError(f"not a C record: {self.rtype}")
        return self.payload[:hash_len], self.payload[hash_len:]


def p_record(uid: bytes, digest: bytes) -> Record:
    return Record("P", uid, digest)


def s_record(uid: bytes, ciphertext: bytes) -> Record:
    return Record("S", uid, ciphertext)


def lv_record(uid: bytes, l: bytes, v: bytes) -> Record:
    return Record("LV", uid, l + v)


def c_record(uid: bytes, h_m: bytes, ws_name: bytes) -> Record:
    return Record("C", uid, h_m + ws_name)


def gamma_record(digest: bytes) -> Record:
    return Record("G", b"", digest)


def record_wire(record: Record) -> bytes:
    """1 tag byte + uid + payload."""
    return bytes([_TAG[record.rtype]]) + record.uid + record.payload


def parse_record(wire: bytes, hash_len: int = DEFAULT_HASH_LEN, prefix_len: int = 2) -> Record:
    rtype = _TAG_REV.get(wire[0])
    if rtype is None:
        raise ValueError(f"unknown record tag {wire[0]:#x}")
    if rtype == "G":
        return Record("G", b"", wire[1:])
    uid = wire[1 : 1 + prefix_len]
    payload = wire[1 + prefix_len :]
    expect = {"P": hash_len, "S": hash_len, "LV": 2 * hash_len, "C": 2 * hash_len}[rtype]
    if len(payload) != expect:
        raise ValueError(f"{rtype} record payload is {len(payload)} bytes, expected {expect}")
    return Record(rtype, uid, payload)


@dataclass(frozen=True, order=True)
class RecordAddress:
    """(block, seq) where seq counts same-type same-uid records within the block."""

    block: int
    seq: int


@dataclass(frozen=True)
class Block:
    index: int
    gamma_prev: bytes  # root-set digest over blocks 1..index-1 (zero for block 1)
    records: tuple[Record, ...]
    block_hash: bytes

    def addresses(self) -> tuple[RecordAddress, ...]:
        counters: dict[tuple[str, bytes], int] = {}
        out = []
        for rec in self.records:
            key = (rec.rtype, rec.uid)
            seq = counters.get(key, 0)
            counters[key] = seq + 1
            out.append(RecordAddress(self.index, seq))
        return tuple(out)


def serialize_block(index: int, gamma_prev: bytes, records: tuple[Record, ...]) -> bytes:
    """4-byte index + root-set digest + 2-byte record count + record wires."""
    out = index.to_bytes(4, "big") + gamma_prev + len(records).to_bytes(2, "big")
    for rec in records:
        out += record_wire(rec)
    return out


def form_block(index: int, gamma_prev: bytes, pending: list[Record],
               hash_len: int = DEFAULT_HASH_LEN) -> Block:
    """Deterministic block assembly: records ordered by type tag, then uid,
    then arrival; identical pending records collapse to one."""
    seen: set[Record] = set()
    unique = []
    for rec in pending:
        if rec not in seen:
            seen.add(rec)
            unique.append(rec)
    ordered = tuple(sorted(unique, key=lambda r: (_TAG[r.rtype], r.uid)))
    body = serialize_block(index, gamma_prev, ordered)
    return Block(index=index, gamma_prev=gamma_prev, records=ordered,
                 block_hash=hash_data(body, hash_len))


def parse_block(body: bytes, hash_len: int = DEFAULT_HASH_LEN, prefix_len: int = 2) -> Block:
    index = int.from_bytes(body[:4], "big")
    gamma_prev = body[4 : 4 + hash_len]
    count = int.from_bytes(body[4 + hash_len : 6 + hash_len], "big")
    off = 6 + hash_len
    records = []
    for _ in range(count):
        rtype = _TAG_REV[body[off]]
        if rtype == "G":
            size = 1 + hash_len
        else:
            size = 1 + prefix_len + {"P": 1, "S": 1, "LV": 2, "C": 2}[rtype] * hash_len
        records.append(parse_record(body[off : off + size], hash_len, prefix_len))
        off += size
    return Block(index=index, gamma_prev=gamma_prev, records=tuple(records),
                 block_hash=hash_data(body[: off], hash_len))


class Chain:
    """Append-only block sequence with its Merkle forest and optional CAS
    persistence of block bodies."""

    def __init__(self, arity: int = 4, hash_len: int = DEFAULT_HASH_LEN, store=None):
        self.hash_len = hash_len
        self.forest = MerkleForest(arity=arity, hash_len=hash_len)
        self.blocks: list[Block] = []
        self.store = store

    @property
    def next_index(self) -> int:
        return len(self.blocks) + 1

    def gamma_prev(self) -> bytes:
        if not self.blocks:
            return bytes(self.hash_len)
        return self.forest.gamma()

    def append_block(self, pending: list[Record]) -> Block:
        block = form_block(self.next_index, self.gamma_prev(), pending, self.hash_len)
        if self.store is not None:
            if self.blocks:
                self.store.put(self.forest.serialize_roots())
            self.store.put(serialize_block(block.index, block.gamma_prev, block.records))
        self.blocks.append(block)
        self.forest.add_leaf(block.block_hash)
        return block

    def block(self, index: int) -> Block:
        return self.blocks[index - 1]

    def records_in_window(self, uid: bytes, rtype: str, lo_excl: int,
                          hi_excl: int) -> list[tuple[RecordAddress, Record]]:
        """Records under ``uid`` of type ``rtype`` with lo_excl < block < hi_excl,
        in ascending address order."""
        out = []
        first = max(lo_excl + 1, 1)
        for index in range(first, min(hi_excl, self.next_index)):
            block = self.blocks[index - 1]
            for addr, rec in zip(block.addresses(), block.records):
                if rec.rtype == rtype and rec.uid == uid:
                    out.append((addr, rec))
        return out


class Sequencer:
    """Air-gapped block publisher: one broadcast-signing round per block.

    Its only secret is the next interval's nonce, held inside the
    transmitter state and never exported."""

    def __init__(self, rng: random.Random | None = None, hash_len: int = DEFAULT_HASH_LEN):
        self._tx = PlsTransmitter(rng=rng, hash_len=hash_len)
        self.hash_len = hash_len

    @property
    def p1(self) -> bytes:
        return self._tx.p1

    @property
    def round(self) -> int:
        return self._tx.round

    def publish_block(self, block: Block) -> PlsBroadcast:
        if block.index != self._tx.round:
            raise ValueError(f"block {block.index} out of schedule (round {self._tx.round})")
        return self._tx.next_round(serialize_block(block.index, block.gamma_prev, block.records))


@dataclass
class ThingIdentity:
    uid: bytes
    p1: bytes
    key: bytes
    enrolment_block: int
    probation_rounds: int  # SLVP rounds before emergency signing is allowed


class UidRegistry:
    """Enrolled users keyed by their proof-record prefix (the UID)."""

    def __init__(self, prefix_len: int = 2):
        self.prefix_len = prefix_len
        self._users: dict[bytes, ThingIdentity] = {}

    def __len__(self) -> int:
        return len(self._users)

    def __contains__(self, uid: bytes) -> bool:
        return uid in self._users

    def get(self, uid: bytes) -> ThingIdentity | None:
        return self._users.get(uid)

    def uids(self) -> list[bytes]:
        return list(self._users)

    def register(self, identity: ThingIdentity) -> None:
        if identity.uid in self._users:
            raise EnrolmentError(f"uid {identity.uid.hex()} already enrolled")
        self._users[identity.uid] = identity

    def remove(self, uid: bytes) -> None:
        """Withdraw a thing: bare registry removal."""
        self._users.pop(uid, None)


def fs_enrol(registry: UidRegistry, key: bytes, q: bytes, current_block: int = 0,
             hash_len: int = DEFAULT_HASH_LEN, probation_rounds: int = 0) -> bytes | None:
    """Server side of the enrolment handshake.

    ``q`` is P1 || E_K(P1 xor N*).  Registers the prefix of P1 as the new
    UID and acknowledges with H(N*); returns None (FAIL) on a prefix clash
    or malformed request, prompting the device to regenerate its nonces.
    """
    if len(q) != 2 * hash_len:
        return None
    p1, sealed = q[:hash_len], q[hash_len:]
    uid = p1[: registry.prefix_len]
    if uid in registry:
        return None
    n_star = xor_bytes(decrypt(key, sealed), p1)
    registry.register(ThingIdentity(uid=uid, p1=p1, key=key,
                                    enrolment_block=current_block,
                                    probation_rounds=probation_rounds))
    return hash_data(n_star, hash_len)


@dataclass
class EnrolledDevice:
    uid: bytes
    p1: bytes
    n_star: bytes
    key: bytes
    sequencer_p: bytes  # latest sequencer proof, the device's receiver anchor
    schedule: NonceSchedule
    attempts: int = 1


def enrol_device(registry: UidRegistry, key: bytes, sequencer_p: bytes,
                 rng: random.Random, alpha: int = 64, bootstrap: bool = False,
                 hash_len: int = DEFAULT_HASH_LEN, current_block: int = 0,
                 probation_rounds: int | None = None,
                 max_attempts: int = 8) -> EnrolledDevice:
    """Device side: generate nonce state, run the handshake, retry on FAIL.

    The round-1 nonce is drawn as the top of a fresh hash chain so the
    posting history doubles as emergency-signature key material.  Raises
    EnrolmentError when the acknowledgement does not hash-match (quoting the
    evidence) or when ``max_attempts`` prefixes in a row clash.
    """
    if probation_rounds is None:
        probation_rounds = 0 if bootstrap else alpha
    for attempt in range(1, max_attempts + 1):
        schedule = NonceSchedule(alpha=alpha, rng=rng, hash_len=hash_len, bootstrap=bootstrap)
        n1 = schedule.next_nonce()
        n_star = random_bytes(rng, hash_len)
        p1 = hash_data(n1, hash_len)
        q = p1 + encrypt(key, xor_bytes(p1, n_star))
        ack = fs_enrol(registry, key, q, current_block, hash_len, probation_rounds)
        if ack is None:
            continue
        if ack != hash_data(n_star, hash_len):
            raise EnrolmentError(
                "acknowledgement mismatch: "
                f"p1={p1.hex()} n_star={n_star.hex()} ack={ack.hex()}")
        return EnrolledDevice(uid=p1[: registry.prefix_len], p1=p1, n_star=n_star,
                              key=key, sequencer_p=sequencer_p, schedule=schedule,
                              attempts=attempt)
    raise EnrolmentError(f"no free uid prefix after {max_attempts} attempts")


def mac_trailer(key: bytes, message: bytes, hash_len: int = DEFAULT_HASH_LEN) -> bytes:
    return mac(key, message, MAC_TRAILER_LEN, hash_len)


def mac_filter(registry: UidRegistry, uid: bytes, message: bytes, trailer: bytes,
               hash_len: int = DEFAULT_HASH_LEN) -> bool:
    """Noise gate only: a passing MAC carries no posting authority."""
    entry = registry.get(uid)
    if entry is None:
        return False
    return trailer == mac_trailer(entry.key, message, hash_len)


def make_proxy_auth(key: bytes, uid: bytes, category: str, message: bytes,
                    prefix_len: int = 2, hash_len: int = DEFAULT_HASH_LEN) -> bytes:
    """Authenticator u = uid | category | short-hash(message), MAC-extended.

    Sent by a proxy on the auxiliary channel so a thing can confirm it holds
    the genuine broadcast and join the re-broadcast group.
    """
    if category not in ("P", "L", "S"):
        raise ValueError(f"category must be P/L/S, got {category!r}")
    u = uid + category.encode() + hash_data(message, hash_len)[:prefix_len]
    return u + mac(key, u, MAC_TRAILER_LEN, hash_len)


def check_proxy_auth(key: bytes, wire: bytes, latest: dict[str, bytes], uid: bytes,
                     prefix_len: int = 2, hash_len: int = DEFAULT_HASH_LEN) -> bool:
    """Device-side check; True means "join the re-broadcast group"."""
    body, trailer = wire[:-MAC_TRAILER_LEN], wire[-MAC_TRAILER_LEN:]
    if len(body) != len(uid) + 1 + prefix_len or body[: len(uid)] != uid:
        return False
    if trailer != mac(key, body, MAC_TRAILER_LEN, hash_len):
        return False
    category = body[len(uid) : len(uid) + 1].decode(errors="replace")
    received = latest.get(category)
    if received is None:
        return False
    return hash_data(received, hash_len)[:prefix_len] == body[len(uid) + 1 :]
