"""Zero-latency signed messaging from posted nonce history.

Every posting-round nonce is the top of a private hash chain, so the chain
of already-revealed nonces doubles as an authenticated public key: a
signature discloses deeper chain values that hash back onto nonces the
verifier already holds.  The verifier therefore needs no key distribution
at all, only the on-ledger posting history and the shared noise-filter key
that keys the message digest.

Chain use slides one step per round: the value revealed for a given chain
in a later round is always deeper than in an earlier round, so published
signatures never help forge future ones.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .primitives import (
    DEFAULT_HASH_LEN,
    WinternitzChain,
    chain_build,
    hash_data,
    hash_iter,
    mac,
    random_bytes,
)


class ProbationError(Exception):
    """Not enough posted rounds yet to back a signature."""


class MissingNonceError(Exception):
    """The verifier lacks a nonce the signature verifies against; the
    signature can be neither accepted nor refuted."""


class NonceSchedule:
    """Per-user source of posting nonces, each the top of a fresh hash chain.

    ``current_round`` is the latest round whose nonce has been generated;
    ``posted_round`` is the latest round whose proof record is known posted,
    i.e. the round signatures may be issued for.  With ``bootstrap`` the
    schedule pre-builds ``alpha`` chains for rounds <= 0 whose tops are
    shared at enrolment, removing the probation period.
    """

    def __init__(self, alpha: int = 64, rng: random.Random | None = None,
                 hash_len: int = DEFAULT_HASH_LEN, bootstrap: bool = False):
        if alpha < 2:
            raise ValueError(f"alpha must be >= 2, got {alpha}")
        self.alpha = alpha
        self.hash_len = hash_len
        self.bootstrap = bootstrap
        self._rng = rng if rng is not None else random.Random()
        self.chains: dict[int, WinternitzChain] = {}
        self.current_round = 0
        self.posted_round = 0
        if bootstrap:
            for r in range(1 - alpha, 1):
                self.chains[r] = chain_build(random_bytes(self._rng, hash_len), alpha, hash_len)

    def next_nonce(self) -> bytes:
        """Build the next round's chain from a fresh secret seed; return its top."""
        r = self.current_round + 1
        self.chains[r] = chain_build(random_bytes(self._rng, self.hash_len), self.alpha,
                                     self.hash_len)
        self.current_round = r
        return self.chains[r].top

    def nonce(self, round: int) -> bytes:
        return self.chains[round].top

    def bootstrap_nonces(self) -> dict[int, bytes]:
        """Chain tops for rounds <= 0, handed to the server at enrolment."""
        return {r: c.top for r, c in self.chains.items() if r <= 0}

    def _require_round(self, round: int) -> None:
        if round < 1:
            raise ProbationError(f"no posted round yet (round {round})")
        if not self.bootstrap and round <= self.alpha:
            raise ProbationError(
                f"round {round} within the {self.alpha}-round probation period")

    def private_window(self, round: int | None = None) -> dict[int, bytes]:
        """The signing window between two proof postings: i -> value of chain
        round-i at depth alpha-i-1, for i = 1..alpha-1.  None of these values
        has appeared on the wire."""
        k = self.posted_round if round is None else round
        self._require_round(k)
        return {i: self.chains[k - i].values[self.alpha - i - 1]
                for i in range(1, self.alpha)}

    def reveal(self, round: int, i: int) -> bytes:
        """Chain value disclosed for slot ``i`` (1..alpha) when signing at
        ``round``.  Slot alpha falls on the fully-used chain round-alpha whose
        remaining value is its seed."""
        if not 1 <= i <= self.alpha:
            raise IndexError(f"slot {i} out of range 1..{self.alpha}")
        exponent = max(self.alpha - i - 1, 0)
        return self.chains[round - i].values[exponent]

    def prune(self) -> None:
        """Drop chains fully used for signing (older than posted_round - alpha)."""
        for r in [r for r in self.chains if r < self.posted_round - self.alpha]:
            del self.chains[r]


@dataclass(frozen=True)
class HorsParams:
    """Digest slicing parameters: ``alpha`` (power of two) values per slice
    alphabet, ``digest_bits`` split into slices of log2(alpha) bits."""

    alpha: int = 64
    digest_bits: int = 126

    def __post_init__(self):
        if self.alpha < 2 or self.alpha & (self.alpha - 1):
            raise ValueError(f"alpha must be a power of 2, got {self.alpha}")
        if self.digest_bits % self.slice_bits:
            raise ValueError(
                f"digest_bits {self.digest_bits} not a multiple of slice width "
                f"{self.slice_bits}")

    @property
    def slice_bits(self) -> int:
        return self.alpha.bit_length() - 1

    @property
    def t(self) -> int:
        """Number of slices, hence of values per signature."""
        return self.digest_bits // self.slice_bits


@dataclass(frozen=True)
class HorsSignature:
    round: int
    values: tuple[bytes, ...]  # one chain value per slice, duplicates permitted


def hors_digest(key: bytes, message: bytes, params: HorsParams,
                hash_len: int = DEFAULT_HASH_LEN) -> list[int]:
    """Keyed-MAC digest of the message, truncated to digest_bits and sliced
    MSB-first into integers < alpha."""
    nbytes = (params.digest_bits + 7) // 8
    tag = mac(key, message, nbytes, hash_len)
    value = int.from_bytes(tag, "big") >> (8 * nbytes - params.digest_bits)
    out = []
    for j in range(params.t):
        shift = params.digest_bits - (j + 1) * params.slice_bits
        out.append((value >> shift) & (params.alpha - 1))
    return out


def sigma_slot(sigma: int) -> int:
    """A slice value sigma discloses chain round-(sigma+1).  Slot 0 would sit
    on the live round's own chain and leak its unposted proof, so slots are
    shifted up by one."""
    return sigma + 1


def hors_sign(schedule: NonceSchedule, key: bytes, message: bytes,
              params: HorsParams | None = None,
              round: int | None = None) -> HorsSignature:
    if params is None:
        params = HorsParams(alpha=schedule.alpha)
    if params.alpha != schedule.alpha:
        raise ValueError(f"params alpha {params.alpha} != schedule alpha {schedule.alpha}")
    k = schedule.posted_round if round is None else round
    schedule._require_round(k)
    sigmas = hors_digest(key, message, params, schedule.hash_len)
    values = tuple(schedule.reveal(k, sigma_slot(s)) for s in sigmas)
    return HorsSignature(round=k, values=values)


def hors_verify(nonces, key: bytes, message: bytes, sig: HorsSignature,
                params: HorsParams, hash_len: int = DEFAULT_HASH_LEN) -> bool:
    """Check each disclosed value hashes up to the nonce of its slot's chain.

    ``nonces`` maps round -> posted nonce; it needs rounds sig.round-1 down
    to sig.round-alpha.  All-or-nothing: any mismatching value fails the
    whole signature.  A missing nonce raises MissingNonceError instead of
    returning False.
    """
    sigmas = hors_digest(key, message, params, hash_len)
    if len(sig.values) != len(sigmas):
        return False
    for sigma, value in zip(sigmas, sig.values):
        i = sigma_slot(sigma)
        chain_round = sig.round - i
        expected = nonces.get(chain_round)
        if expected is None:
            raise MissingNonceError(f"no posted nonce for round {chain_round}")
        steps = min(i + 1, params.alpha)  # slot alpha discloses a chain seed
        if hash_iter(value, steps, hash_len) != expected:
            return False
    return True


def encode_emergency(uid: bytes, sig: HorsSignature, message: bytes,
                     mac_trailer: bytes) -> bytes:
    """Wire form: uid + 4-byte round + message + signature values + trailer."""
    return uid + sig.round.to_bytes(4, "big") + message + b"".join(sig.values) + mac_trailer


def parse_emergency(wire: bytes, params: HorsParams, uid_len: int = 2,
                    hash_len: int = DEFAULT_HASH_LEN,
                    trailer_len: int = 2) -> tuple[bytes, HorsSignature, bytes, bytes]:
    """Inverse of :func:`encode_emergency`; returns (uid, sig, message, trailer)."""
    sig_bytes = params.t * hash_len
    if len(wire) < uid_len + 4 + sig_bytes + trailer_len:
        raise ValueError(f"emergency message too short: {len(wire)} bytes")
    uid = wire[:uid_len]
    round = int.from_bytes(wire[uid_len : uid_len + 4], "big")
    trailer = wire[-trailer_len:]
    values_start = len(wire) - trailer_len - sig_bytes
    message = wire[uid_len + 4 : values_start]
    values = tuple(wire[values_start + i * hash_len : values_start + (i + 1) * hash_len]
                   for i in range(params.t))
    return uid, HorsSignature(round=round, values=values), message, trailer


# --- classic one-time signature, kept as the reference construction ---


@dataclass
class LamportKeyPair:
    """k pairs of secret nonces and their hashes; sign-once enforced."""

    secrets: tuple[tuple[bytes, bytes], ...]
    public: tuple[tuple[bytes, bytes], ...]
    consumed: bool = False

    @property
    def bits(self) -> int:
        return len(self.secrets)


def lamport_keygen(k_bits: int, rng: random.Random,
                   hash_len: int = DEFAULT_HASH_LEN) -> LamportKeyPair:
    secrets = tuple((random_bytes(rng, hash_len), random_bytes(rng, hash_len))
                    for _ in range(k_bits))
    public = tuple((hash_data(a, hash_len), hash_data(b, hash_len)) for a, b in secrets)
    return LamportKeyPair(secrets=secrets, public=public)


def _message_bits(message: bytes, k_bits: int) -> list[int]:
    if len(message) * 8 < k_bits:
        raise ValueError(f"message too short for {k_bits} bits")
    value = int.from_bytes(message, "big")
    top = len(message) * 8
    return [(value >> (top - 1 - i)) & 1 for i in range(k_bits)]


def lamport_sign(pair: LamportKeyPair, message: bytes) -> tuple[bytes, ...]:
    if pair.consumed:
        raise ValueError("one-time pair already used")
    pair.consumed = True
    return tuple(pair.secrets[i][bit]
                 for i, bit in enumerate(_message_bits(message, pair.bits)))


def lamport_verify(public: tuple[tuple[bytes, bytes], ...], message: bytes,
                   values: tuple[bytes, ...], hash_len: int = DEFAULT_HASH_LEN) -> bool:
    if len(values) != len(public):
        return False
    bits = _message_bits(message, len(public))
    return all(hash_data(v, hash_len) == public[i][bit]
               for i, (v, bit) in enumerate(zip(values, bits)))


# --- forgery-rate estimation ---


def sigma_sets_subset(candidate: list[int], target: list[int]) -> bool:
    return set(candidate).issubset(set(target))


def hors_forgery_rate(params: HorsParams, trials: int, rng: random.Random,
                      target_sigmas: list[int] | None = None) -> float:
    """Monte Carlo Pr[a random digest's slice set is a subset of the target's].

    That is exactly the event letting an attacker reuse one observed
    signature's values for its own message.
    """
    if target_sigmas is None:
        target_sigmas = _random_sigmas(params, rng)
    target = set(target_sigmas)
    hits = 0
    for _ in range(trials):
        if set(_random_sigmas(params, rng)).issubset(target):
            hits += 1
    return hits / trials


def exhaustive_forgery_rate(params: HorsParams, target_sigmas: list[int]) -> float:
    """Exact rate by enumerating every possible digest (desk scale only)."""
    if params.digest_bits > 20:
        raise ValueError("exhaustive enumeration limited to digest_bits <= 20")
    target = set(target_sigmas)
    hits = 0
    for value in range(1 << params.digest_bits):
        sigmas = [(value >> (params.digest_bits - (j + 1) * params.slice_bits))
                  & (params.alpha - 1) for j in range(params.t)]
        if set(sigmas).issubset(target):
            hits += 1
    return hits / (1 << params.digest_bits)


def _random_sigmas(params: HorsParams, rng: random.Random) -> list[int]:
    value = rng.getrandbits(params.digest_bits)
    return [(value >> (params.digest_bits - (j + 1) * params.slice_bits))
            & (params.alpha - 1) for j in range(params.t)]
