"""Incremental Merkle forest over the block sequence.

Block hashes are appended as leaves; every completed subtree node is formed
once and never changes.  The forest's state after k leaves is summarised by
its *minimal root set*: one root per nonzero digit of k in the tree's base
(arity).  A digit d covers d completed subtrees of the same height; for
d == 1 the root is that subtree's node, for d > 1 it is the hash of the d
node digests concatenated (the parent still being formed).  Membership
proofs climb from a leaf to exactly one of those roots.
"""

from __future__ import annotations

from dataclasses import dataclass

from .primitives import DEFAULT_HASH_LEN, hash_data


@dataclass(frozen=True)
class MembershipProof:
    """Path from a leaf to one minimal root.

    Each level is (position, siblings): the node's index among its parent's
    children and the other children's digests in child order.  The last
    level may be partial (fewer than arity children) when the covering root
    is a still-forming node.
    """

    leaf_index: int  # 1-based, matching block numbering
    levels: tuple[tuple[int, tuple[bytes, ...]], ...]


class MerkleForest:
    def __init__(self, arity: int = 4, hash_len: int = DEFAULT_HASH_LEN):
        if arity not in (2, 4):
            raise ValueError(f"arity must be 2 or 4, got {arity}")
        self.arity = arity
        self.hash_len = hash_len
        # levels[h] = completed nodes at height h, in formation order;
        # levels[0] holds the leaves themselves.
        self.levels: list[list[bytes]] = [[]]

    @property
    def leaf_count(self) -> int:
        return len(self.levels[0])

    @property
    def internal_node_count(self) -> int:
        return sum(len(lv) for lv in self.levels[1:])

    def add_leaf(self, digest: bytes) -> None:
        """Append a leaf; cascade-complete any subtree this closes."""
        self.levels[0].append(digest)
        h = 0
        while len(self.levels[h]) % self.arity == 0 and self.levels[h]:
            children = self.levels[h][-self.arity :]
            if h + 1 == len(self.levels):
                self.levels.append([])
            self.levels[h + 1].append(hash_data(b"".join(children), self.hash_len))
            h += 1

    def node(self, height: int, index: int) -> bytes:
        return self.levels[height][index]

    def _digits(self) -> list[tuple[int, int]]:
        """Base-arity digits of leaf_count as (height, digit), most significant first."""
        k = self.leaf_count
        out = []
        height = 0
        while k:
            out.append((height, k % self.arity))
            k //= self.arity
            height += 1
        return list(reversed(out))

    def minimal_roots(self) -> list[bytes]:
        """One root per nonzero digit of leaf_count, most significant first."""
        if self.leaf_count < 1:
            raise ValueError("forest is empty")
        k = self.leaf_count
        roots = []
        for height, digit in self._digits():
            if digit == 0:
                continue
            base = (k // (self.arity ** (height + 1))) * self.arity
            nodes = self.levels[height][base : base + digit]
            roots.append(nodes[0] if digit == 1 else hash_data(b"".join(nodes), self.hash_len))
        return roots

    def root_spans(self) -> list[tuple[int, int]]:
        """Leaf ranges (first, last), 1-based, covered by each minimal root."""
        spans = []
        consumed = 0
        for height, digit in self._digits():
            if digit == 0:
                continue
            width = digit * self.arity**height
            spans.append((consumed + 1, consumed + width))
            consumed += width
        return spans

    def serialize_roots(self) -> bytes:
        roots = self.minimal_roots()
        return bytes([len(roots)]) + b"".join(roots)

    def gamma(self) -> bytes:
        """Digest of the minimal root set; posted at the head of the next block."""
        return hash_data(self.serialize_roots(), self.hash_len)

    def prove(self, leaf_index: int) -> MembershipProof:
        if not 1 <= leaf_index <= self.leaf_count:
            raise IndexError(f"leaf {leaf_index} out of range 1..{self.leaf_count}")
        i = leaf_index - 1
        consumed = 0
        for height, digit in self._digits():
            width = digit * self.arity**height
            if digit and consumed <= i < consumed + width:
                break
            consumed += width
        levels = []
        j = i
        for h in range(height):
            group = (j // self.arity) * self.arity
            pos = j % self.arity
            sibs = tuple(self.levels[h][group + m] for m in range(self.arity) if m != pos)
            levels.append((pos, sibs))
            j //= self.arity
        if digit > 1:
            base = consumed // self.arity**height
            pos = j - base
            sibs = tuple(self.levels[height][base + m] for m in range(digit) if m != pos)
            levels.append((pos, sibs))
        return MembershipProof(leaf_index=leaf_index, levels=tuple(levels))

    def persist_nodes(self, put) -> int:
        """Store every completed internal node's child list via ``put(content)``.

        The node digest doubles as the storage name (content-addressed), so
        re-persisting is dedup-idempotent.  Returns the node count.
        """
        n = 0
        for h in range(1, len(self.levels)):
            for j in range(len(self.levels[h])):
                children = self.levels[h - 1][j * self.arity : (j + 1) * self.arity]
                put(b"".join(children))
                n += 1
        return n


def verify_proof(roots: list[bytes], leaf_index: int, leaf_digest: bytes,
                 proof: MembershipProof, hash_len: int = DEFAULT_HASH_LEN) -> bool:
    """Recombine siblings up the path; true iff the result is a known root."""
    if proof.leaf_index != leaf_index:
        return False
    x = leaf_digest
    for pos, sibs in proof.levels:
        if pos > len(sibs):
            return False
        children = sibs[:pos] + (x,) + sibs[pos:]
        x = hash_data(b"".join(children), hash_len)
    return x in roots


def serialize_proof(proof: MembershipProof, arity: int, hash_len: int = DEFAULT_HASH_LEN) -> bytes:
    """4-byte leaf index + level count + per level a position byte and
    (arity-1) sibling slots.  The position byte packs the sibling count in
    its high nibble; unused trailing slots are zero-filled."""
    out = proof.leaf_index.to_bytes(4, "big") + bytes([len(proof.levels)])
    for pos, sibs in proof.levels:
        out += bytes([(len(sibs) << 4) | pos])
        out += b"".join(sibs)
        out += b"\x00" * hash_len * (arity - 1 - len(sibs))
    return out


def parse_proof(wire: bytes, arity: int, hash_len: int = DEFAULT_HASH_LEN) -> MembershipProof:
    leaf_index = int.from_bytes(wire[:4], "big")
    n_levels = wire[4]
    off = 5
    levels = []
    for _ in range(n_levels):
        nsibs = wire[off] >> 4
        pos = wire[off] & 0x0F
        off += 1
        sibs = tuple(wire[off + m * hash_len : off + (m + 1) * hash_len] for m in range(nsibs))
        off += (arity - 1) * hash_len
        levels.append((pos, sibs))
    return MembershipProof(leaf_index=leaf_index, levels=tuple(levels))
