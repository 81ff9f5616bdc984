"""Shared test helpers: independent oracles the implementation is checked
against, and a minimal ledger stub for validator scenarios."""

from __future__ import annotations

from plschain.ledger import Record, RecordAddress
from plschain.primitives import decrypt, hash_data, xor_bytes


class FakeLedger:
    """Record window provider built from an explicit (block -> records) map."""

    def __init__(self, blocks: dict[int, list[Record]]):
        self._blocks = blocks

    def records_in_window(self, uid, rtype, lo_excl, hi_excl):
        out = []
        for index in sorted(self._blocks):
            if not lo_excl < index < hi_excl:
                continue
            counters = {}
            for rec in self._blocks[index]:
                key = (rec.rtype, rec.uid)
                seq = counters.get(key, 0)
                counters[key] = seq + 1
                if rec.rtype == rtype and rec.uid == uid:
                    out.append((RecordAddress(index, seq), rec))
        return out


def slvp_oracle(ledger, uid, prev_p, prev_block, p_candidate, current_block,
                hash_len=32):
    """Brute-force arbitration oracle, written independently of the validator.

    Enumerates every link-verify record in the window, splits them into the
    set consistent with the proof candidate and the set proving knowledge of
    the revealed nonce, and applies earliest-knowledge-wins directly.
    Returns ("accept", lv_addr, nonce, s_results) or ("reject", reason).
    """
    lvs = ledger.records_in_window(uid, "LV", prev_block, current_block)
    valid = []
    for addr, rec in lvs:
        l, v = rec.payload[:hash_len], rec.payload[hash_len:]
        n = xor_bytes(l, p_candidate)
        if hash_data(n, hash_len) == prev_p and hash_data(p_candidate + n, hash_len) == v:
            valid.append(addr)
    if not valid:
        return ("reject", "no-valid-lv")
    best = min(valid)
    n = xor_bytes(
        next(rec for addr, rec in lvs if addr == best).payload[:hash_len], p_candidate)
    knowing = [addr for addr, rec in lvs
               if rec.payload[hash_len:]
               == hash_data(xor_bytes(rec.payload[:hash_len], n) + n, hash_len)]
    if min(knowing) < best:
        return ("reject", "earlier-lv-wins")
    s_results = []
    for addr, rec in ledger.records_in_window(uid, "S", prev_block, current_block):
        if addr.block < best.block:
            s_results.append((addr, xor_bytes(decrypt(n, rec.payload), p_candidate)))
    return ("accept", best, n, tuple(s_results))


def witness_merkle_roots(leaves: list[bytes], arity: int, hash_len=32) -> list[bytes]:
    """Minimal root set recomputed from scratch by recursion over raw leaf
    digests, independent of the incremental forest."""

    def subtree(chunk):
        if len(chunk) == 1:
            return chunk[0]
        size = len(chunk) // arity
        return hash_data(
            b"".join(subtree(chunk[i * size : (i + 1) * size]) for i in range(arity)),
            hash_len)

    digits = []
    k = len(leaves)
    power = 0
    while k:
        digits.append((power, k % arity))
        k //= arity
        power += 1
    roots = []
    offset = 0
    for power, digit in reversed(digits):
        if digit == 0:
            continue
        width = arity**power
        trees = [subtree(leaves[offset + i * width : offset + (i + 1) * width])
                 for i in range(digit)]
        roots.append(trees[0] if digit == 1 else hash_data(b"".join(trees), hash_len))
        offset += digit * width
    return roots


def witness_gamma(leaves: list[bytes], arity: int, hash_len=32) -> bytes:
    roots = witness_merkle_roots(leaves, arity, hash_len)
    return hash_data(bytes([len(roots)]) + b"".join(roots), hash_len)
