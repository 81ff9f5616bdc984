import random
import time

import pytest

from plschain.emergency import (
    HorsParams,
    HorsSignature,
    MissingNonceError,
    NonceSchedule,
    ProbationError,
    encode_emergency,
    exhaustive_forgery_rate,
    hors_digest,
    hors_forgery_rate,
    hors_sign,
    hors_verify,
    lamport_keygen,
    lamport_sign,
    lamport_verify,
    parse_emergency,
    sigma_slot,
)
from plschain.primitives import hash_data, hash_iter


def schedule_at_round(k, alpha=8, seed=0, bootstrap=True):
    rng = random.Random(seed)
    schedule = NonceSchedule(alpha=alpha, rng=rng, bootstrap=bootstrap)
    for _ in range(k):
        schedule.next_nonce()
    schedule.posted_round = k
    return schedule


def all_nonces(schedule):
    return {r: c.top for r, c in schedule.chains.items()}


# --- nonce schedule ---


def test_next_nonce_is_chain_top():
    schedule = schedule_at_round(3, alpha=8)
    chain = schedule.chains[3]
    assert hash_iter(chain.seed, 8) == schedule.nonce(3)
    assert schedule.nonce(3) == chain.top


def test_nonce_generation_cost_reported():
    rng = random.Random(1)
    schedule = NonceSchedule(alpha=100, rng=rng)
    t0 = time.perf_counter()
    for _ in range(50):
        schedule.next_nonce()
    per_nonce = (time.perf_counter() - t0) / 50
    # informational only: the chain costs alpha hash applications per round
    print(f"\nalpha=100 nonce generation: {per_nonce * 1e3:.3f} ms")


def test_nonces_distinct_across_rounds():
    schedule = schedule_at_round(200, alpha=4)
    tops = [schedule.nonce(r) for r in range(1, 201)]
    assert len(set(tops)) == 200


def test_bootstrap_provisions_alpha_chains():
    schedule = schedule_at_round(1, alpha=8, bootstrap=True)
    boot = schedule.bootstrap_nonces()
    assert sorted(boot) == list(range(-7, 1))
    for r, top in boot.items():
        assert schedule.chains[r].top == top


def test_prune_drops_spent_chains():
    schedule = schedule_at_round(20, alpha=4, bootstrap=False)
    schedule.prune()
    assert min(schedule.chains) == 20 - 4


# --- private window ---


def test_window_values_hash_to_published_nonces():
    schedule = schedule_at_round(12, alpha=8, bootstrap=False)
    window = schedule.private_window()
    assert sorted(window) == list(range(1, 8))
    for i, value in window.items():
        assert hash_iter(value, i + 1) == schedule.nonce(12 - i)


def test_window_depth_strictly_decreases_per_chain():
    schedule = schedule_at_round(12, alpha=8, bootstrap=False)
    w_k = schedule.private_window(11)
    w_next = schedule.private_window(12)
    # chain m appears as slot i at round k and slot i+1 at round k+1
    for i in range(1, 7):
        chain_round = 11 - i
        assert w_k[i] == schedule.chains[chain_round].values[8 - i - 1]
        assert w_next[i + 1] == schedule.chains[chain_round].values[8 - i - 2]


def test_window_shape_alpha_3():
    schedule = schedule_at_round(10, alpha=3, bootstrap=False)
    window = schedule.private_window()
    assert window == {
        1: schedule.chains[9].values[1],
        2: schedule.chains[8].values[0],
    }


def test_window_probation_enforced():
    schedule = schedule_at_round(5, alpha=8, bootstrap=False)
    with pytest.raises(ProbationError):
        schedule.private_window()
    assert schedule_at_round(9, alpha=8, bootstrap=False).private_window()


def test_window_values_never_on_the_wire():
    # nothing in the window equals any published nonce
    schedule = schedule_at_round(12, alpha=8, bootstrap=False)
    published = set(all_nonces(schedule).values())
    assert not set(schedule.private_window().values()) & published


# --- digest slicing ---


def test_digest_21_sigmas_at_default_params():
    params = HorsParams(alpha=64, digest_bits=126)
    assert params.t == 21
    sigmas = hors_digest(b"k" * 32, b"message", params)
    assert len(sigmas) == 21
    assert all(0 <= s < 64 for s in sigmas)


def test_digest_deterministic_and_keyed():
    params = HorsParams(alpha=64, digest_bits=126)
    a = hors_digest(b"k" * 32, b"message", params)
    assert a == hors_digest(b"k" * 32, b"message", params)
    assert a != hors_digest(b"q" * 32, b"message", params)


def test_params_validation():
    with pytest.raises(ValueError):
        HorsParams(alpha=10, digest_bits=12)
    with pytest.raises(ValueError):
        HorsParams(alpha=8, digest_bits=13)


# --- signing and verification ---


def test_sign_verify_round_trip():
    schedule = schedule_at_round(3, alpha=8)
    params = HorsParams(alpha=8, digest_bits=12)
    key = b"k" * 32
    sig = hors_sign(schedule, key, b"alert: reactor", params)
    assert sig.round == 3
    assert len(sig.values) == 4
    assert hors_verify(all_nonces(schedule), key, b"alert: reactor", sig, params)


def test_signature_size_at_paper_scale():
    schedule = schedule_at_round(2, alpha=64)
    params = HorsParams(alpha=64, digest_bits=126)
    sig = hors_sign(schedule, b"k" * 32, b"msg", params)
    assert len(sig.values) == 21
    assert sum(len(v) for v in sig.values) == 672


def test_tampered_message_fails():
    schedule = schedule_at_round(3, alpha=8)
    params = HorsParams(alpha=8, digest_bits=12)
    key = b"k" * 32
    sig = hors_sign(schedule, key, b"alert", params)
    assert not hors_verify(all_nonces(schedule), key, b"alert!", sig, params)


def test_wrong_key_fails():
    schedule = schedule_at_round(3, alpha=8)
    params = HorsParams(alpha=8, digest_bits=12)
    sig = hors_sign(schedule, b"k" * 32, b"alert", params)
    assert not hors_verify(all_nonces(schedule), b"x" * 32, b"alert", sig, params)


def test_shallower_chain_values_do_not_verify():
    # replaying values one rung above the scheduled depth overshoots the
    # published nonce under the fixed verification step count
    schedule = schedule_at_round(4, alpha=8)
    params = HorsParams(alpha=8, digest_bits=12)
    key = b"k" * 32
    sig = hors_sign(schedule, key, b"alert", params)
    sigmas = hors_digest(key, b"alert", params)
    shallow = []
    for sigma in sigmas:
        i = sigma_slot(sigma)
        exponent = max(8 - i - 1, 0)
        shallow.append(schedule.chains[4 - i].values[min(exponent + 1, 8)])
    forged = HorsSignature(round=4, values=tuple(shallow))
    assert not hors_verify(all_nonces(schedule), key, b"alert", forged, params)


def test_deepest_slice_uses_spent_chain_seed():
    # the top slice value lands on the chain exactly alpha rounds back, whose
    # seed is already public knowledge; it verifies with alpha steps
    schedule = schedule_at_round(2, alpha=8)
    params = HorsParams(alpha=8, digest_bits=12)
    key = b"k" * 32
    message = None
    for i in range(1000):
        candidate = f"probe {i}".encode()
        if max(hors_digest(key, candidate, params)) == 7:
            message = candidate
            break
    assert message is not None
    sig = hors_sign(schedule, key, message, params)
    sigmas = hors_digest(key, message, params)
    j = sigmas.index(7)
    assert sig.values[j] == schedule.chains[2 - 8].seed
    assert hors_verify(all_nonces(schedule), key, message, sig, params)


def test_signature_values_never_expose_live_nonce():
    schedule = schedule_at_round(5, alpha=8)
    params = HorsParams(alpha=8, digest_bits=12)
    key = b"k" * 32
    unrevealed = {schedule.nonce(5), schedule.nonce(6)} if 6 in schedule.chains else {
        schedule.nonce(5)}
    for i in range(50):
        sig = hors_sign(schedule, key, f"msg {i}".encode(), params)
        for value in sig.values:
            assert value not in unrevealed
            assert hash_data(value) not in unrevealed


def test_depth_monotone_across_signing_rounds():
    # for a fixed chain, the revealed depth never rises round over round and
    # strictly falls while above the seed
    alpha = 8
    params = HorsParams(alpha=alpha, digest_bits=12)
    key = b"k" * 32
    schedule = schedule_at_round(alpha + 1, alpha=alpha, bootstrap=False)
    exponents: dict[int, dict[int, int]] = {}
    for k in range(alpha + 1, alpha + 6):
        if schedule.current_round < k:
            schedule.next_nonce()
        schedule.posted_round = k
        sig = hors_sign(schedule, key, f"round {k} message".encode(), params)
        for sigma, value in zip(hors_digest(key, f"round {k} message".encode(), params),
                                sig.values):
            chain_round = k - sigma_slot(sigma)
            exponent = schedule.chains[chain_round].values.index(value)
            exponents.setdefault(chain_round, {})[k] = exponent
    for chain_round, per_round in exponents.items():
        seen = [per_round[k] for k in sorted(per_round)]
        for earlier, later in zip(seen, seen[1:]):
            assert later <= earlier
            if earlier > 0:
                assert later < earlier


def test_probation_refusal_and_bootstrap_waiver():
    params = HorsParams(alpha=8, digest_bits=12)
    plain = schedule_at_round(4, alpha=8, bootstrap=False)
    with pytest.raises(ProbationError):
        hors_sign(plain, b"k" * 32, b"msg", params)
    booted = schedule_at_round(1, alpha=8, bootstrap=True)
    sig = hors_sign(booted, b"k" * 32, b"msg", params)
    assert hors_verify(all_nonces(booted), b"k" * 32, b"msg", sig, params)


def test_missing_nonce_is_not_a_false():
    schedule = schedule_at_round(3, alpha=8)
    params = HorsParams(alpha=8, digest_bits=12)
    key = b"k" * 32
    sig = hors_sign(schedule, key, b"msg", params)
    nonces = all_nonces(schedule)
    needed = {sig.round - sigma_slot(s) for s in hors_digest(key, b"msg", params)}
    del nonces[sorted(needed)[0]]
    with pytest.raises(MissingNonceError):
        hors_verify(nonces, key, b"msg", sig, params)


def test_emergency_wire_roundtrip():
    schedule = schedule_at_round(2, alpha=8)
    params = HorsParams(alpha=8, digest_bits=12)
    sig = hors_sign(schedule, b"k" * 32, b"the message body", params)
    wire = encode_emergency(b"\x12\x34", sig, b"the message body", b"\xaa\xbb")
    uid, parsed, message, trailer = parse_emergency(wire, params)
    assert (uid, parsed, message, trailer) == (b"\x12\x34", sig, b"the message body",
                                               b"\xaa\xbb")


# --- classic one-time signatures ---


def test_lamport_round_trip_16_bits():
    rng = random.Random(1)
    pair = lamport_keygen(16, rng)
    message = b"\xa5\x3c"
    values = lamport_sign(pair, message)
    assert lamport_verify(pair.public, message, values)


def test_lamport_flipped_bit_fails():
    rng = random.Random(2)
    pair = lamport_keygen(16, rng)
    values = lamport_sign(pair, b"\xa5\x3c")
    assert not lamport_verify(pair.public, b"\xa5\x3d", values)


def test_lamport_reuse_refused():
    rng = random.Random(3)
    pair = lamport_keygen(8, rng)
    lamport_sign(pair, b"\x01")
    with pytest.raises(ValueError):
        lamport_sign(pair, b"\x02")


def test_lamport_public_key_size_for_256_bits():
    rng = random.Random(4)
    pair = lamport_keygen(256, rng)
    total = sum(len(a) + len(b) for a, b in pair.public)
    assert total == 2 * 256 * 32  # 16 KB


# --- forgery rate ---


def test_forgery_monte_carlo_matches_exhaustive_small():
    params = HorsParams(alpha=8, digest_bits=12)
    rng = random.Random(5)
    target = hors_digest(b"k" * 32, b"victim message", params)
    exact = exhaustive_forgery_rate(params, target)
    estimate = hors_forgery_rate(params, 40_000, rng, target)
    assert exact > 0
    assert exact / 2 <= estimate <= exact * 2


def test_forgery_degenerate_all_equal_target():
    params = HorsParams(alpha=8, digest_bits=12)
    exact = exhaustive_forgery_rate(params, [3, 3, 3, 3])
    assert exact == (1 / 8) ** 4  # only the all-3 digest is a subset


def test_forgery_full_target_rate_one():
    params = HorsParams(alpha=4, digest_bits=8)  # t=4 slices of 2 bits
    assert exhaustive_forgery_rate(params, [0, 1, 2, 3]) == 1.0
