"""User-side posting rounds and the server-side validator.

A round posts three records in order: the signature S, the link-verify pair
LV, then the proof P that closes the round:

    S_k  = E_{N_k}(H(M_k) xor H(N_{k+1}))
    LV_k = H(N_{k+1}) xor N_k  ||  H(H(N_{k+1}) || N_k)
    P_k1 = H(N_{k+1})

The verify half of LV proves its author knew H(N_{k+1}) before it was
posted, which only the genuine user can.  An attacker who sniffs the proof
reveal while jamming the server can forge a link for the same current nonce
with its own next nonce, but its forged LV necessarily lands in a later
block than the honest one, and for records proving knowledge of the same
revealed nonce the earliest posted wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .emergency import NonceSchedule
from .ledger import Block, Record, RecordAddress, lv_record, p_record, s_record
from .primitives import DEFAULT_HASH_LEN, decrypt, encrypt, hash_data, xor_bytes


@dataclass(frozen=True)
class LvRecord:
    l: bytes
    v: bytes


def make_s(n_k: bytes, h_m: bytes, n_next: bytes, hash_len: int = DEFAULT_HASH_LEN) -> bytes:
    return encrypt(n_k, xor_bytes(h_m, hash_data(n_next, hash_len)))


def make_lv(n_k: bytes, n_next: bytes, hash_len: int = DEFAULT_HASH_LEN) -> LvRecord:
    h_next = hash_data(n_next, hash_len)
    return LvRecord(l=xor_bytes(h_next, n_k), v=hash_data(h_next + n_k, hash_len))


def recover_message_hash(s: bytes, l: bytes, p_next: bytes,
                         hash_len: int = DEFAULT_HASH_LEN) -> bytes:
    """Reverse a signature record once the closing proof is known:
    H_M = P_{k+1} xor D_{P_{k+1} xor L}(S)."""
    return xor_bytes(p_next, decrypt(xor_bytes(p_next, l), s))


@dataclass(frozen=True)
class Accept:
    uid: bytes
    round: int  # the round this proof closed (0 for the enrolment anchor)
    p: bytes
    lv_addr: RecordAddress | None
    revealed_nonce: bytes | None
    s_results: tuple[tuple[RecordAddress, bytes], ...]  # (address, H_M) per S record


@dataclass(frozen=True)
class Reject:
    uid: bytes
    p: bytes
    reason: str  # no-valid-lv | earlier-lv-wins | unknown-uid | anchor-mismatch


@dataclass
class _UserRound:
    p: bytes  # latest accepted proof
    block: int | None  # block it was posted in; None until the anchor lands
    round: int  # round currently open (1 after the anchor posts)


class SlvpValidator:
    """Per-UID round arbitration over a ledger view.

    ``v_checks=False`` drops the verify-record check and the earlier-record
    arbitration, leaving link-only validation: the historical construction
    that the jam-spoof attack forks.  Kept as a baseline for comparison.
    """

    def __init__(self, hash_len: int = DEFAULT_HASH_LEN, v_checks: bool = True):
        self.hash_len = hash_len
        self.v_checks = v_checks
        self._users: dict[bytes, _UserRound] = {}
        # round -> revealed nonce per uid; bootstrap entries use rounds <= 0
        self.revealed: dict[bytes, dict[int, bytes]] = {}

    def register(self, uid: bytes, p1: bytes, bootstrap_nonces=None) -> None:
        self._users[uid] = _UserRound(p=p1, block=None, round=0)
        self.revealed[uid] = dict(bootstrap_nonces) if bootstrap_nonces else {}

    def is_registered(self, uid: bytes) -> bool:
        return uid in self._users

    def open_round(self, uid: bytes) -> int:
        return self._users[uid].round

    def last_proof(self, uid: bytes) -> tuple[bytes, int | None] | None:
        """(latest accepted proof, block it sits in); block None before the anchor."""
        st = self._users.get(uid)
        return None if st is None else (st.p, st.block)

    def validate_p(self, uid: bytes, p_candidate: bytes, ledger,
                   current_block: int) -> Accept | Reject:
        """Arbitrate a proof candidate against the window since the user's
        last accepted proof.

        Scans link-verify records in ascending address order for the first
        one consistent with both the previous proof (H(L xor P) == P_prev)
        and the knowledge check (H(P || N) == V).  Any earlier record in the
        window proving knowledge of the same revealed nonce defeats the
        candidate: it belongs to a fork of the user's chain.  On acceptance,
        every signature record posted in the window before the chosen LV is
        reversed into its message hash.

        The caller must post accepted proofs into block ``current_block``;
        the window for the next round starts there.
        """
        st = self._users.get(uid)
        if st is None:
            return Reject(uid, p_candidate, "unknown-uid")
        if st.block is None:
            # enrolment anchor: the registered first proof, accepted as-is
            if p_candidate != st.p:
                return Reject(uid, p_candidate, "anchor-mismatch")
            st.block = current_block
            st.round = 1
            return Accept(uid, 0, p_candidate, None, None, ())

        lvs = ledger.records_in_window(uid, "LV", st.block, current_block)
        chosen = None
        for addr, rec in lvs:
            l, v = rec.lv_parts(self.hash_len)
            n = xor_bytes(l, p_candidate)
            if hash_data(n, self.hash_len) != st.p:
                continue
            if self.v_checks and hash_data(p_candidate + n, self.hash_len) != v:
                continue
            chosen = (addr, n)
            break
        if chosen is None:
            return Reject(uid, p_candidate, "no-valid-lv")
        lv_addr, n = chosen

        if self.v_checks:
            for addr, rec in lvs:
                if addr >= lv_addr:
                    break
                l2, v2 = rec.lv_parts(self.hash_len)
                if v2 == hash_data(xor_bytes(l2, n) + n, self.hash_len):
                    return Reject(uid, p_candidate, "earlier-lv-wins")

        s_results = []
        for s_addr, rec in ledger.records_in_window(uid, "S", st.block, current_block):
            if s_addr.block < lv_addr.block:
                h_m = xor_bytes(decrypt(n, rec.payload), p_candidate)
                s_results.append((s_addr, h_m))

        closed = st.round
        st.p = p_candidate
        st.block = current_block
        st.round = closed + 1
        self.revealed[uid][closed] = n
        return Accept(uid, closed, p_candidate, lv_addr, n, tuple(s_results))


@dataclass
class UserOutput:
    """What a user wants transmitted after observing a block."""

    records: list[Record] = field(default_factory=list)
    contents: list[bytes] = field(default_factory=list)
    alarms: list[str] = field(default_factory=list)


class SlvpUser:
    """Posting state machine for one thing.

    Drives S -> LV -> P through observed blocks: a stage advances only when
    the user's own pending record appears under its UID, and a pending
    record absent from ``retransmit_after`` consecutive blocks is re-sent
    byte-identically.  After a round's proof posts, the round's content is
    submitted for storage until its confirmation record appears.
    """

    STAGES = ("await-p", "await-s", "await-lv", "idle")

    def __init__(self, uid: bytes, p1: bytes, schedule: NonceSchedule,
                 hash_len: int = DEFAULT_HASH_LEN, retransmit_after: int = 2,
                 document_source=None):
        self.uid = uid
        self.hash_len = hash_len
        self.retransmit_after = retransmit_after
        self.schedule = schedule
        self.document_source = document_source  # round -> content bytes | None
        self.round = 0  # open round; 0 until the anchor posts
        self.stage = "await-p"
        self.n_k = schedule.nonce(1)
        self.n_next: bytes | None = None
        self.pending: Record | None = p_record(uid, p1)
        self._pending_misses = 0
        self.queued: list[bytes] = []
        self._round_content: dict[int, bytes] = {}
        # content awaiting its confirmation record: h_m -> [content, misses]
        self._awaiting_c: dict[bytes, list] = {}
        self._sent_p: set[bytes] = {p1}
        self.completed_rounds = 0

    def queue_document(self, content: bytes) -> None:
        self.queued.append(content)

    def initial_record(self) -> Record:
        """The first proof record, sent right after enrolment."""
        return self.pending

    def _next_document(self) -> bytes | None:
        if self.queued:
            return self.queued.pop(0)
        if self.document_source is not None:
            return self.document_source(self.round)
        return None

    def _start_round(self, out: UserOutput) -> None:
        content = self._next_document()
        if content is None:
            self.stage = "idle"
            self.pending = None
            return
        self._round_content[self.round] = content
        h_m = hash_data(content, self.hash_len)
        self.n_next = self.schedule.next_nonce()
        self.pending = s_record(self.uid, make_s(self.n_k, h_m, self.n_next, self.hash_len))
        self._pending_misses = 0
        self.stage = "await-s"
        out.records.append(self.pending)

    def _advance(self, out: UserOutput) -> None:
        if self.stage == "await-p":
            self.round += 1
            if self.round > 1:
                self.n_k = self.n_next
                closed = self.round - 1
                self.completed_rounds = closed
                content = self._round_content.pop(closed, None)
                if content is not None:
                    h_m = hash_data(content, self.hash_len)
                    self._awaiting_c[h_m] = [content, 0]
                    out.contents.append(content)
            self.schedule.posted_round = self.round
            self._start_round(out)
        elif self.stage == "await-s":
            lv = make_lv(self.n_k, self.n_next, self.hash_len)
            self.pending = lv_record(self.uid, lv.l, lv.v)
            self._pending_misses = 0
            self.stage = "await-lv"
            out.records.append(self.pending)
        elif self.stage == "await-lv":
            p_next = hash_data(self.n_next, self.hash_len)
            self.pending = p_record(self.uid, p_next)
            self._sent_p.add(p_next)
            self._pending_misses = 0
            self.stage = "await-p"
            out.records.append(self.pending)

    def observe_block(self, block: Block) -> UserOutput:
        """React to one published (and authenticated) block."""
        out = UserOutput()

        confirmed = {rec.c_parts(self.hash_len)[0] for rec in block.records
                     if rec.rtype == "C" and rec.uid == self.uid}
        for h_m in list(self._awaiting_c):
            if h_m in confirmed:
                del self._awaiting_c[h_m]
                continue
            entry = self._awaiting_c[h_m]
            entry[1] += 1
            if entry[1] >= self.retransmit_after:
                entry[1] = 0
                out.contents.append(entry[0])

        for rec in block.records:
            if rec.rtype == "P" and rec.uid == self.uid and rec.payload not in self._sent_p:
                out.alarms.append(f"foreign proof posted under uid {self.uid.hex()}")

        if self.stage == "idle":
            if self.queued or self.document_source is not None:
                self._start_round(out)
            return out

        if self.pending is not None:
            if self.pending in block.records:
                self._advance(out)
            else:
                self._pending_misses += 1
                if self._pending_misses >= self.retransmit_after:
                    self._pending_misses = 0
                    out.records.append(self.pending)
        return out
