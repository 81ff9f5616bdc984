"""Command-line front end: simulations, attack scenarios, protocol demos,
forest inspection and emergency-signature tooling.

Exit status: 0 success, 2 usage error, 3 scenario assertion failure.
"""

from __future__ import annotations

import argparse
import random
import sys

from . import __version__
from .cas import CasStore, DirBackend
from .emergency import (
    HorsParams,
    NonceSchedule,
    exhaustive_forgery_rate,
    hors_digest,
    hors_forgery_rate,
    hors_sign,
    hors_verify,
)
from .ledger import (
    Chain,
    UidRegistry,
    enrol_device,
    lv_record,
    p_record,
    parse_block,
    s_record,
)
from .merkle import MerkleForest, verify_proof
from .netsim import (
    Corrupt,
    JamSpoof,
    NoiseFlood,
    SimConfig,
    Simulation,
)
from .pls import PlsReceiver, PlsTransmitter
from .primitives import hash_data, random_bytes
from .report import write_outputs
from .slvp import SlvpValidator, make_lv, make_s

EXIT_SCENARIO_FAILURE = 3


def _bool_flag(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {value!r}")


def load_config_file(path: str) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw.rstrip()}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


_CONFIG_INT = ("num_things", "intervals", "num_proxies", "gossip_rounds", "seed",
               "alpha", "hors_digest_bits", "prefix_len", "hash_len",
               "candidate_cap", "trigger_expiry", "emergency_thing",
               "emergency_interval")
_CONFIG_FLOAT = ("tau", "epsilon", "loss_prob", "corrupt_prob")
_CONFIG_BOOL = ("mac_filter", "proxy_auth", "hors_bootstrap", "jam_all")
_ATTACKER_KEYS = ("attacker", "corrupt_p", "jam_target", "jam_round", "flood_rate")


def build_config(file_values: dict[str, str], overrides: dict) -> SimConfig:
    kwargs = {}
    attacker_opts = {"corrupt_p": 0.2, "jam_target": 0, "jam_round": 1, "flood_rate": 50}
    attacker_names: list[str] = []
    for key, value in file_values.items():
        if key == "attacker":
            attacker_names = [v.strip() for v in value.split(",") if v.strip()]
        elif key in ("corrupt_p",):
            attacker_opts[key] = float(value)
        elif key in ("jam_target", "jam_round", "flood_rate"):
            attacker_opts[key] = int(value)
        elif key in _CONFIG_INT:
            kwargs[key] = int(value)
        elif key in _CONFIG_FLOAT:
            kwargs[key] = float(value)
        elif key in _CONFIG_BOOL:
            kwargs[key] = _bool_flag(value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "attacker":
            attacker_names = [value] if value != "none" else []
        elif key in attacker_opts:
            attacker_opts[key] = value
        else:
            kwargs[key] = value
    attackers = []
    for name in attacker_names:
        if name == "none":
            continue
        if name == "corrupt":
            attackers.append(Corrupt(p=attacker_opts["corrupt_p"]))
        elif name == "jam-spoof":
            attackers.append(JamSpoof(target=attacker_opts["jam_target"],
                                      trigger_round=attacker_opts["jam_round"]))
        elif name == "noise-flood":
            attackers.append(NoiseFlood(rate=attacker_opts["flood_rate"]))
        else:
            raise ValueError(f"unknown attacker {name!r}")
    kwargs["attackers"] = tuple(attackers)
    return SimConfig(**kwargs)


def _run_and_print(config: SimConfig, full_validation: bool, out: str | None):
    if out:
        config.cas_dir = f"{out}/cas"
    sim = Simulation(config, full_validation=full_validation)
    report = sim.run()
    for line in config.lines():
        print(line)
    for line in report.report_lines():
        print(line)
    if out:
        for path in write_outputs(report, out, chain=sim.chain):
            print(f"wrote {path}")
    return report


def cmd_simulate(args) -> int:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {
        "seed": args.seed, "intervals": args.intervals, "num_things": args.things,
        "loss_prob": args.loss, "corrupt_prob": args.corrupt,
        "mac_filter": args.mac_filter, "alpha": args.alpha,
        "prefix_len": args.prefix_len, "attacker": args.attacker,
        "flood_rate": args.flood_rate, "jam_target": args.jam_target,
        "jam_round": args.jam_round, "corrupt_p": args.corrupt_p,
        "emergency_thing": args.emergency_thing,
        "emergency_interval": args.emergency_interval,
    }
    config = build_config(file_values, overrides)
    _run_and_print(config, args.mode == "slvp", args.out)
    return 0


def cmd_attack(args) -> int:
    overrides = {
        "seed": args.seed, "intervals": args.intervals,
        "mac_filter": args.mac_filter if args.mac_filter is not None else False,
        "attacker": args.scenario, "flood_rate": args.flood_rate,
        "jam_target": args.jam_target, "jam_round": args.jam_round,
        "corrupt_p": args.corrupt_p,
    }
    failures = []
    if args.scenario == "jam-spoof":
        modes = ["slvp", "gf-baseline"] if args.mode == "both" else [args.mode]
        for mode in modes:
            print(f"--- mode={mode}")
            out = f"{args.out}/{mode}" if args.out and len(modes) > 1 else args.out
            report = _run_and_print(build_config({}, overrides), mode == "slvp", out)
            if mode == "slvp" and report.attack_outcome != "defended":
                failures.append(f"slvp mode: expected defended, got {report.attack_outcome}")
            if mode == "gf-baseline" and report.attack_outcome != "fork-accepted":
                failures.append(
                    f"gf-baseline mode: expected fork-accepted, got {report.attack_outcome}")
    elif args.scenario == "noise-flood":
        results = {}
        for filt in (False, True):
            print(f"--- mac_filter={'on' if filt else 'off'}")
            overrides["mac_filter"] = filt
            out = f"{args.out}/{'on' if filt else 'off'}" if args.out else None
            report = _run_and_print(build_config({}, overrides), True, out)
            results[filt] = report.attacker_passed_filter
        if results[False]:
            reduction = 1 - results[True] / results[False]
            print(f"filter_reduction={reduction:.6f}")
            if reduction < 0.99:
                failures.append(f"filter reduction {reduction:.4f} below 0.99")
    else:  # corrupt
        report = _run_and_print(build_config({}, overrides), True, args.out)
        if report.integrity_violations:
            failures.append(f"{report.integrity_violations} integrity violations")
    for failure in failures:
        print(f"scenario-failure: {failure}", file=sys.stderr)
    return EXIT_SCENARIO_FAILURE if failures else 0


def cmd_pls_demo(args) -> int:
    rng = random.Random(args.seed)
    tx = PlsTransmitter(rng=rng)
    receivers = [PlsReceiver(tx.p1) for _ in range(args.receivers)]
    messages = [f"broadcast message {k}".encode() for k in range(1, args.rounds + 1)]
    for k, message in enumerate(messages, start=1):
        bc = tx.next_round(message)
        for r in receivers:
            r.ingest_broadcast(bc)
        if k >= 2:
            for i, r in enumerate(receivers):
                res = r.verify_bin(k)
                ok = res.message_hashes[0] == hash_data(messages[k - 2])
                print(f"bin={k} receiver={i} recovered={res.message_hashes[0].hex()[:16]} "
                      f"match={ok}")
                if not ok:
                    return EXIT_SCENARIO_FAILURE
    print(f"rounds={args.rounds} receivers={args.receivers} all verified")
    return 0


def cmd_slvp_demo(args) -> int:
    rng = random.Random(args.seed)
    chain = Chain(store=CasStore())
    registry = UidRegistry()
    validator = SlvpValidator()
    key = random_bytes(rng, 32)
    device = enrol_device(registry, key, b"\x00" * 32, rng, alpha=4, bootstrap=True)
    validator.register(device.uid, device.p1, device.schedule.bootstrap_nonces())
    uid = device.uid
    print(f"enrolled uid={uid.hex()} p1={device.p1.hex()[:16]}")

    n1 = device.schedule.nonce(1)
    n2 = device.schedule.next_nonce()
    content = b"demo content signed over one posting round"
    h_m = hash_data(content)

    chain.append_block([])  # genesis
    decision = validator.validate_p(uid, device.p1, chain, chain.next_index)
    block = chain.append_block([p_record(uid, device.p1)])
    print(f"block {block.index}: anchor proof posted ({type(decision).__name__})")
    block = chain.append_block([s_record(uid, make_s(n1, h_m, n2))])
    print(f"block {block.index}: signature record posted")
    lv = make_lv(n1, n2)
    block = chain.append_block([lv_record(uid, lv.l, lv.v)])
    print(f"block {block.index}: link-verify record posted")
    p2 = hash_data(n2)
    decision = validator.validate_p(uid, p2, chain, chain.next_index)
    print(f"proof candidate: {type(decision).__name__}")
    for s_addr, recovered in decision.s_results:
        print(f"  signature at block {s_addr.block} seq {s_addr.seq}: "
              f"H_M={recovered.hex()[:16]} match={recovered == h_m}")
        if recovered != h_m:
            return EXIT_SCENARIO_FAILURE
    return 0


def cmd_enrol_demo(args) -> int:
    rng = random.Random(args.seed)
    registry = UidRegistry(prefix_len=args.prefix_len)
    total_attempts = 0
    worst = 0
    for i in range(args.count):
        device = enrol_device(registry, random_bytes(rng, 32), b"\x00" * 32, rng,
                              alpha=4, max_attempts=args.max_attempts)
        total_attempts += device.attempts
        worst = max(worst, device.attempts)
    print(f"enrolled={len(registry)} prefix_len={args.prefix_len}")
    print(f"total_attempts={total_attempts} retries={total_attempts - args.count} "
          f"worst_single={worst}")
    return 0


def cmd_merkle(args) -> int:
    forest = MerkleForest(arity=args.arity)
    for k in range(1, args.leaves + 1):
        forest.add_leaf(hash_data(f"leaf {k}".encode()))
    roots = forest.minimal_roots()
    spans = forest.root_spans()
    if args.action == "roots":
        print(f"leaves={args.leaves} arity={args.arity} roots={len(roots)}")
        for i, (root, (lo, hi)) in enumerate(zip(roots, spans), start=1):
            print(f"root {i} leaves {lo}..{hi} {root.hex()}")
        print(f"gamma={forest.gamma().hex()}")
        print(f"internal_nodes={forest.internal_node_count}")
        return 0
    proof = forest.prove(args.leaf)
    ok = verify_proof(roots, args.leaf, hash_data(f"leaf {args.leaf}".encode()), proof)
    print(f"leaf={args.leaf} levels={len(proof.levels)} verified={ok}")
    return 0 if ok else EXIT_SCENARIO_FAILURE


def cmd_hors(args) -> int:
    if args.digest_bits is None:
        slice_bits = args.alpha.bit_length() - 1
        args.digest_bits = 126 if args.alpha == 64 else slice_bits * 4
    params = HorsParams(alpha=args.alpha, digest_bits=args.digest_bits)
    rng = random.Random(args.seed)
    schedule = NonceSchedule(alpha=args.alpha, rng=rng, bootstrap=True)
    nonces = dict(schedule.bootstrap_nonces())
    nonces[1] = schedule.next_nonce()
    schedule.posted_round = 1
    key = random_bytes(rng, 32)
    message = b"emergency demo message"
    sig = hors_sign(schedule, key, message, params)
    ok = hors_verify(nonces, key, message, sig, params)
    print(f"alpha={args.alpha} digest_bits={args.digest_bits} sigmas={params.t}")
    print(f"signature_bytes={params.t * 32} verified={ok}")
    if args.trials:
        target = hors_digest(key, message, params)
        rate = hors_forgery_rate(params, args.trials, rng, target)
        print(f"forgery_rate_mc={rate:.3e} trials={args.trials}")
        if params.digest_bits <= 20:
            exact = exhaustive_forgery_rate(params, target)
            print(f"forgery_rate_exact={exact:.3e}")
    return 0 if ok else EXIT_SCENARIO_FAILURE


def cmd_inspect(args) -> int:
    manifest = f"{args.out}/chain.txt"
    entries = {}
    with open(manifest) as fh:
        for line in fh:
            index, hexhash = line.split()
            entries[int(index)] = bytes.fromhex(hexhash)
    if args.block not in entries:
        print(f"no block {args.block} in {manifest}", file=sys.stderr)
        return 1
    store = CasStore(DirBackend(f"{args.out}/cas"))
    body = store.get(entries[args.block])
    if body is None:
        print(f"block body {entries[args.block].hex()} missing from store", file=sys.stderr)
        return 1
    block = parse_block(body)
    print(f"block={block.index} hash={block.block_hash.hex()}")
    print(f"gamma_prev={block.gamma_prev.hex()}")
    print(f"records={len(block.records)}")
    for addr, rec in zip(block.addresses(), block.records):
        uid = rec.uid.hex() if rec.uid else "-"
        print(f"  {rec.rtype:<2} uid={uid} seq={addr.seq} payload={rec.payload.hex()[:32]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plschain",
        description="hash-chain blockchain protocol suite and simulator")
    parser.add_argument("--version", action="version", version=f"plschain {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a full simulation")
    p.add_argument("--config", help="flat key=value scenario file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (trace, report, store, figures)")
    p.add_argument("--intervals", type=int)
    p.add_argument("--things", type=int)
    p.add_argument("--loss", type=float)
    p.add_argument("--corrupt", type=float)
    p.add_argument("--mac-filter", type=_bool_flag, dest="mac_filter")
    p.add_argument("--alpha", type=int)
    p.add_argument("--prefix-len", type=int, dest="prefix_len")
    p.add_argument("--attacker", choices=["none", "corrupt", "jam-spoof", "noise-flood"])
    p.add_argument("--flood-rate", type=int, dest="flood_rate")
    p.add_argument("--jam-target", type=int, dest="jam_target")
    p.add_argument("--jam-round", type=int, dest="jam_round")
    p.add_argument("--corrupt-p", type=float, dest="corrupt_p")
    p.add_argument("--emergency-thing", type=int, dest="emergency_thing")
    p.add_argument("--emergency-interval", type=int, dest="emergency_interval")
    p.add_argument("--mode", choices=["slvp", "gf-baseline"], default="slvp")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack", help="run a scripted attack scenario")
    p.add_argument("scenario", choices=["jam-spoof", "noise-flood", "corrupt"])
    p.add_argument("--mode", choices=["slvp", "gf-baseline", "both"], default="both")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--intervals", type=int, default=30)
    p.add_argument("--out")
    p.add_argument("--mac-filter", type=_bool_flag, dest="mac_filter")
    p.add_argument("--flood-rate", type=int, dest="flood_rate", default=50)
    p.add_argument("--jam-target", type=int, dest="jam_target", default=0)
    p.add_argument("--jam-round", type=int, dest="jam_round", default=1)
    p.add_argument("--corrupt-p", type=float, dest="corrupt_p", default=0.2)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("pls-demo", help="honest broadcast-signing loop")
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--receivers", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pls_demo)

    p = sub.add_parser("slvp-demo", help="one honest posting round, record by record")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_slvp_demo)

    p = sub.add_parser("enrol-demo", help="prefix-collision enrolment demo")
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--prefix-len", type=int, dest="prefix_len", default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-attempts", type=int, dest="max_attempts", default=10000)
    p.set_defaults(func=cmd_enrol_demo)

    p = sub.add_parser("merkle", help="minimal forest roots and proofs")
    p.add_argument("action", choices=["roots", "prove"])
    p.add_argument("--arity", type=int, choices=[2, 4], default=4)
    p.add_argument("--leaves", type=int, default=7)
    p.add_argument("--leaf", type=int, default=1)
    p.set_defaults(func=cmd_merkle)

    p = sub.add_parser("hors", help="emergency signature demo and forgery rate")
    p.add_argument("--alpha", type=int, default=64)
    p.add_argument("--digest-bits", type=int, dest="digest_bits")
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_hors)

    p = sub.add_parser("inspect", help="decode a block from a simulation output dir")
    p.add_argument("--out", required=True)
    p.add_argument("--block", type=int, required=True)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
