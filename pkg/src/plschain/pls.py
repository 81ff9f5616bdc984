"""Broadcast signing over proof/link/signature (P, L, S) triples.

The transmitter commits to each interval's message hash one interval before
the key material that authenticates it is revealed:

    L_k = H(N_{k+1}) xor N_k
    S_k = E_{N_k}(H(M_k) xor H(N_{k+1}))
    P_k = H(N_k)

A receiver holding the verified P_{k-1} picks the genuine (L_{k-1}, P_k)
out of arbitrary candidate sets by checking H(L xor P) == P_{k-1}, then
recovers H(M_{k-1}) = P_k xor D_{L xor P}(S_{k-1}).  Candidates may come
from the radio channel or from peers; corrupt ones simply fail the check,
so attacks degrade into denial of service, never forgery.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .primitives import DEFAULT_HASH_LEN, decrypt, encrypt, hash_data, random_bytes, xor_bytes

CATEGORIES = ("P", "L", "S")

DEFAULT_CANDIDATE_CAP = 64


class DosFailure(Exception):
    """No candidate pair verifies; the caller should solicit more candidates."""


class ProtocolBreach(Exception):
    """More than one distinct candidate pair verifies. Either the hash is
    broken or the transmitter's short-lived secret leaked; surface loudly."""


@dataclass(frozen=True)
class PlsBroadcast:
    """One interval's broadcast: three hash-length payloads tagged by BIN."""

    bin: int
    p: bytes
    l: bytes
    s: bytes

    def payloads(self) -> tuple[tuple[str, bytes], ...]:
        return (("P", self.p), ("L", self.l), ("S", self.s))


def encode_payload(category: str, bin: int, payload: bytes) -> bytes:
    """Wire form: 1 tag byte + 4-byte big-endian BIN + payload."""
    if category not in CATEGORIES:
        raise ValueError(f"unknown category {category!r}")
    return category.encode() + bin.to_bytes(4, "big") + payload


def decode_payload(wire: bytes) -> tuple[str, int, bytes]:
    category = wire[:1].decode()
    if category not in CATEGORIES:
        raise ValueError(f"unknown category tag {wire[:1]!r}")
    return category, int.from_bytes(wire[1:5], "big"), wire[5:]


class PlsTransmitter:
    """Holds the current and next nonce; emits one (P, L, S) triple per round.

    The next nonce never leaves the transmitter except hashed (inside P of
    the following round) or hash-masked (inside L and S), so its secrecy
    window is exactly two broadcast intervals.
    """

    def __init__(self, n1: bytes | None = None, rng: random.Random | None = None,
                 hash_len: int = DEFAULT_HASH_LEN):
        self.hash_len = hash_len
        self._rng = rng if rng is not None else random.Random()
        self._current_nonce = n1 if n1 is not None else random_bytes(self._rng, hash_len)
        self.round = 1
        self.p1 = hash_data(self._current_nonce, hash_len)

    def next_round(self, message: bytes) -> PlsBroadcast:
        """Sign ``message``'s hash for this round and rotate nonces."""
        n_k = self._current_nonce
        n_next = random_bytes(self._rng, self.hash_len)
        h_next = hash_data(n_next, self.hash_len)
        h_m = hash_data(message, self.hash_len)
        out = PlsBroadcast(
            bin=self.round,
            p=hash_data(n_k, self.hash_len),
            l=xor_bytes(h_next, n_k),
            s=encrypt(n_k, xor_bytes(h_m, h_next)),
        )
        self._current_nonce = n_next
        self.round += 1
        return out


@dataclass
class VerifyResult:
    """Outcome of one receiver round: the genuine link/proof pair plus every
    message-hash candidate recovered from the S set (one per S candidate;
    corrupt S values decrypt to garbage that matches no stored content)."""

    bin: int
    link: bytes
    proof: bytes
    message_hashes: tuple[bytes, ...]


class _CandidateSet:
    """Insertion-ordered deduplicating set with a drop-counting cap."""

    def __init__(self, cap: int):
        self.cap = cap
        self.values: list[bytes] = []
        self._seen: set[bytes] = set()
        self.dropped = 0

    def add(self, value: bytes) -> None:
        if value in self._seen:
            return
        if len(self.values) >= self.cap:
            self.dropped += 1
            return
        self._seen.add(value)
        self.values.append(value)


class PlsReceiver:
    """Receiver state machine: collects candidates per BIN, verifies in order.

    ``verify_bin(k)`` consumes L/S candidates of bin k-1 and P candidates of
    bin k; bins must be verified strictly in sequence because each round's
    proof anchors the next.
    """

    def __init__(self, p1: bytes, hash_len: int = DEFAULT_HASH_LEN,
                 cap: int = DEFAULT_CANDIDATE_CAP, retain_bins: int = 12):
        self.hash_len = hash_len
        self.cap = cap
        # verified candidate sets stay around for this many bins so peers
        # that fell behind can still pull them over gossip
        self.retain_bins = retain_bins
        self.verified_p = p1
        self.next_bin = 2  # first verifiable round: P of bin 2 closes bin 1
        self.candidates: dict[tuple[int, str], _CandidateSet] = {}
        self.authenticated: list[tuple[int, tuple[bytes, ...]]] = []
        self.dropped = 0

    def ingest(self, bin: int, category: str, value: bytes) -> None:
        if category not in CATEGORIES:
            raise ValueError(f"unknown category {category!r}")
        if bin < self.next_bin - self.retain_bins:
            return  # far behind the verified frontier; not worth keeping
        cs = self.candidates.get((bin, category))
        if cs is None:
            cs = self.candidates[(bin, category)] = _CandidateSet(self.cap)
        before = cs.dropped
        cs.add(value)
        self.dropped += cs.dropped - before

    def ingest_broadcast(self, bc: PlsBroadcast) -> None:
        for cat, value in bc.payloads():
            self.ingest(bc.bin, cat, value)

    def candidate_values(self, bin: int, category: str) -> list[bytes]:
        cs = self.candidates.get((bin, category))
        return list(cs.values) if cs else []

    def verify_bin(self, bin: int) -> VerifyResult:
        """Select the genuine (L, P) pair for ``bin`` and recover H(M_{bin-1})."""
        if bin != self.next_bin:
            raise ValueError(f"bins verify in order; expected {self.next_bin}, got {bin}")
        l_cands = self.candidate_values(bin - 1, "L")
        p_cands = self.candidate_values(bin, "P")
        passing: list[tuple[bytes, bytes]] = []
        for l in l_cands:
            for p in p_cands:
                if hash_data(xor_bytes(l, p), self.hash_len) == self.verified_p:
                    passing.append((l, p))
        if not passing:
            raise DosFailure(f"bin {bin}: no candidate pair matches the verified proof")
        if len(passing) > 1:
            raise ProtocolBreach(f"bin {bin}: {len(passing)} distinct candidate pairs verify")
        link, proof = passing[0]
        key = xor_bytes(link, proof)  # the nonce revealed for bin-1
        hashes: list[bytes] = []
        for s in self.candidate_values(bin - 1, "S"):
            h_m = xor_bytes(proof, decrypt(key, s))
            if h_m not in hashes:
                hashes.append(h_m)
        self.verified_p = proof
        self.next_bin = bin + 1
        result = VerifyResult(bin=bin, link=link, proof=proof, message_hashes=tuple(hashes))
        self.authenticated.append((bin, result.message_hashes))
        horizon = self.next_bin - self.retain_bins
        for key in [k for k in self.candidates if k[0] < horizon]:
            del self.candidates[key]
        return result
