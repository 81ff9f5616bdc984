import random

import pytest
from conftest import witness_gamma, witness_merkle_roots

from plschain.cas import CasStore
from plschain.merkle import MerkleForest, parse_proof, serialize_proof, verify_proof
from plschain.primitives import hash_data


def leaves(n):
    return [hash_data(f"block {k}".encode()) for k in range(1, n + 1)]


def build(n, arity):
    forest = MerkleForest(arity=arity)
    for leaf in leaves(n):
        forest.add_leaf(leaf)
    return forest


def test_quad_four_leaves_forms_one_node():
    forest = build(4, arity=4)
    assert len(forest.levels[1]) == 1
    assert forest.levels[1][0] == hash_data(b"".join(leaves(4)))


def test_nodes_never_change_once_formed():
    forest = MerkleForest(arity=2)
    snapshots = {}
    for leaf in leaves(100):
        forest.add_leaf(leaf)
        for h in range(1, len(forest.levels)):
            for j, digest in enumerate(forest.levels[h]):
                key = (h, j)
                assert snapshots.setdefault(key, digest) == digest


def test_binary_seven_leaf_roots_cover_known_groups():
    forest = build(7, arity=2)
    roots = forest.minimal_roots()
    assert forest.root_spans() == [(1, 4), (5, 6), (7, 7)]
    ls = leaves(7)
    node_12 = hash_data(ls[0] + ls[1])
    node_34 = hash_data(ls[2] + ls[3])
    assert roots == [hash_data(node_12 + node_34), hash_data(ls[4] + ls[5]), ls[6]]


def test_binary_five_leaves_two_roots():
    forest = build(5, arity=2)
    assert forest.root_spans() == [(1, 4), (5, 5)]
    assert len(forest.minimal_roots()) == 2


def test_quad_power_of_arity_single_root():
    forest = build(4096, arity=4)
    assert len(forest.minimal_roots()) == 1


@pytest.mark.parametrize("arity", [2, 4])
def test_root_count_equals_nonzero_digits_small(arity):
    forest = MerkleForest(arity=arity)
    for k, leaf in enumerate(leaves(300), start=1):
        forest.add_leaf(leaf)
        digits = 0
        v = k
        while v:
            digits += v % arity != 0
            v //= arity
        assert len(forest.minimal_roots()) == digits


@pytest.mark.parametrize("arity", [2, 4])
@pytest.mark.parametrize("n", [1, 2, 3, 5, 7, 13, 16, 21, 64, 85])
def test_roots_match_independent_witness(arity, n):
    forest = build(n, arity)
    assert forest.minimal_roots() == witness_merkle_roots(leaves(n), arity)
    assert forest.gamma() == witness_gamma(leaves(n), arity)


def test_gamma_changes_with_any_root():
    forest = build(9, arity=4)
    before = forest.gamma()
    forest.add_leaf(hash_data(b"block 10"))
    assert forest.gamma() != before


def test_gamma_single_leaf():
    forest = build(1, arity=4)
    assert forest.gamma() == hash_data(bytes([1]) + leaves(1)[0])


@pytest.mark.parametrize("arity", [2, 4])
def test_all_proofs_verify_small(arity):
    forest = MerkleForest(arity=arity)
    for k, leaf in enumerate(leaves(64), start=1):
        forest.add_leaf(leaf)
        roots = forest.minimal_roots()
        for i in range(1, k + 1):
            proof = forest.prove(i)
            assert verify_proof(roots, i, leaves(k)[i - 1], proof), (arity, k, i)


def test_singleton_root_has_empty_proof():
    forest = build(7, arity=2)
    proof = forest.prove(7)
    assert proof.levels == ()
    assert verify_proof(forest.minimal_roots(), 7, leaves(7)[6], proof)


def test_flipped_sibling_fails_verification():
    forest = build(21, arity=4)
    proof = forest.prove(5)
    pos, sibs = proof.levels[0]
    bad = list(sibs)
    bad[0] = bytes([bad[0][0] ^ 1]) + bad[0][1:]
    broken = type(proof)(leaf_index=5, levels=((pos, tuple(bad)),) + proof.levels[1:])
    assert not verify_proof(forest.minimal_roots(), 5, leaves(21)[4], broken)


def test_wrong_leaf_digest_fails():
    forest = build(16, arity=4)
    proof = forest.prove(3)
    assert not verify_proof(forest.minimal_roots(), 3, hash_data(b"not it"), proof)


def test_proof_length_bound():
    import math

    for arity in (2, 4):
        forest = build(100, arity)
        for i in range(1, 101):
            assert len(forest.prove(i).levels) <= math.ceil(math.log(100, arity))


def test_proof_serialization_roundtrip_including_partial_levels():
    rng = random.Random(11)
    for arity in (2, 4):
        for n in (3, 7, 9, 14, 21):
            forest = build(n, arity)
            i = rng.randrange(1, n + 1)
            proof = forest.prove(i)
            wire = serialize_proof(proof, arity)
            assert parse_proof(wire, arity) == proof


def test_prove_out_of_range():
    forest = build(5, arity=2)
    with pytest.raises(IndexError):
        forest.prove(0)
    with pytest.raises(IndexError):
        forest.prove(6)


def test_node_count_matches_geometric_sum():
    forest = build(4**3, arity=4)
    assert forest.internal_node_count == (4**3 - 1) // 3


def test_persist_nodes_content_addressed_and_dedup():
    forest = build(4**3, arity=4)
    store = CasStore()
    count = forest.persist_nodes(store.put)
    assert count == forest.internal_node_count
    assert len(store) == count
    # every stored name is the node digest of its child concatenation
    for h in range(1, len(forest.levels)):
        for digest in forest.levels[h]:
            assert store.get(digest) is not None
    forest.persist_nodes(store.put)  # re-persisting stores nothing new
    assert len(store) == count


def test_arity_validation():
    with pytest.raises(ValueError):
        MerkleForest(arity=3)
