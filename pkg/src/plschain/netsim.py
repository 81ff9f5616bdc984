"""Deterministic discrete-event simulation of the whole architecture.

One logical interval per loop iteration: the sequencer broadcast-signs the
newest block, payloads reach each thing over lossy/corruptible links with
proxy duplicates, peers gossip candidate versions, receivers verify and
catch up their chains, things run their posting rounds (and optionally an
emergency signature), and the fog server filters noise, arbitrates proof
candidates, drives storage triggers and forms the next block.

Everything is driven by one seeded generator, so a config (seed included)
maps to exactly one trace; the trace digest pins that down.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field, fields

from .cas import CasStore, DirBackend, TriggerManager, WsProof
from .emergency import (
    HorsParams,
    MissingNonceError,
    ProbationError,
    encode_emergency,
    hors_sign,
    hors_verify,
    parse_emergency,
)
from .ledger import (
    Chain,
    Record,
    Sequencer,
    UidRegistry,
    c_record,
    check_proxy_auth,
    enrol_device,
    lv_record,
    mac_filter,
    mac_trailer,
    make_proxy_auth,
    p_record,
    parse_block,
    parse_record,
    record_wire,
)
from .pls import DosFailure, PlsReceiver, ProtocolBreach
from .primitives import DEFAULT_HASH_LEN, hash_data, random_bytes, xor_bytes
from .slvp import Accept, SlvpUser, SlvpValidator, make_lv


@dataclass(frozen=True)
class Corrupt:
    """Replace downlink copies with attacker bytes at probability p."""

    p: float = 0.2


@dataclass(frozen=True)
class JamSpoof:
    """Intercept one thing's proof reveal while jamming the server, then
    fork its chain with a forged link-verify record and proof."""

    target: int = 0  # thing index
    trigger_round: int = 1  # posting round whose closing reveal is stolen


@dataclass(frozen=True)
class NoiseFlood:
    """Forged records under enrolled UIDs with random MAC trailers."""

    rate: int = 50  # records per interval


@dataclass
class SimConfig:
    num_things: int = 4
    intervals: int = 30
    tau: float = 1.0  # logical interval length, bookkeeping only
    epsilon: float = 0.05  # clock-skew bound; must stay well under tau
    loss_prob: float = 0.0
    corrupt_prob: float = 0.0
    num_proxies: int = 2
    gossip_rounds: int = 2
    attackers: tuple = ()
    seed: int = 0
    mac_filter: bool = True
    proxy_auth: bool = True
    alpha: int = 64
    hors_digest_bits: int = 126
    hors_bootstrap: bool = True
    prefix_len: int = 2
    hash_len: int = DEFAULT_HASH_LEN
    candidate_cap: int = 64
    trigger_expiry: int = 16
    emergency_thing: int = -1
    emergency_interval: int = -1
    jam_all: bool = False  # premise violation: no downlink copy ever delivered
    cas_dir: str | None = None

    def __post_init__(self):
        if isinstance(self.attackers, (Corrupt, JamSpoof, NoiseFlood)):
            self.attackers = (self.attackers,)
        self.attackers = tuple(self.attackers)
        for name in ("loss_prob", "corrupt_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {p}")
        if self.intervals < 1 or self.num_things < 1:
            raise ValueError("need at least one interval and one thing")
        if not 0 <= 2 * self.epsilon < self.tau:
            raise ValueError(f"interval length {self.tau} too short for skew {self.epsilon}")

    def lines(self) -> list[str]:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "attackers":
                value = ",".join(_attacker_key(a) for a in value) or "none"
            out.append(f"config.{f.name}={value}")
        return out


def _attacker_key(a) -> str:
    if isinstance(a, Corrupt):
        return f"corrupt(p={a.p})"
    if isinstance(a, JamSpoof):
        return f"jam-spoof(target={a.target},round={a.trigger_round})"
    if isinstance(a, NoiseFlood):
        return f"noise-flood(rate={a.rate})"
    return str(a)


@dataclass(frozen=True)
class TraceEvent:
    interval: int
    actor: str
    kind: str  # broadcast|ingest|gossip|validate|accept|reject|trigger-fire|trigger-expire|alarm
    detail: str

    def line(self) -> str:
        return f"{self.interval}|{self.actor}|{self.kind}|{self.detail}"


@dataclass
class SimReport:
    config: SimConfig
    full_validation: bool
    blocks_formed: int = 0
    verified_chain: dict = field(default_factory=dict)  # thing name -> chain length
    accepts: int = 0
    anchor_accepts: int = 0
    rejects: dict = field(default_factory=dict)  # reason -> count
    dropped_by_mac: int = 0
    attacker_sent: int = 0
    attacker_passed_filter: int = 0
    malformed: int = 0
    ignored_confirmations: int = 0
    dos_failures: int = 0
    alarms: int = 0
    triggers_registered: int = 0
    triggers_fired: int = 0
    triggers_expired: int = 0
    refused_contents: int = 0
    c_records: int = 0
    relays: int = 0
    emergency_accepted: int = 0
    emergency_rejected: int = 0
    integrity_violations: int = 0
    attack_outcome: str = "n/a"
    completed_rounds: dict = field(default_factory=dict)  # thing name -> rounds
    trace: list = field(default_factory=list)

    def trace_lines(self) -> list[str]:
        return [ev.line() for ev in self.trace]

    @property
    def trace_digest(self) -> str:
        h = hashlib.sha256()
        for line in self.trace_lines():
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()

    def report_lines(self) -> list[str]:
        out = [
            f"blocks_formed={self.blocks_formed}",
            f"full_validation={self.full_validation}",
            f"accepts={self.accepts}",
            f"anchor_accepts={self.anchor_accepts}",
            f"rejects_total={sum(self.rejects.values())}",
        ]
        out += [f"rejects.{reason}={n}" for reason, n in sorted(self.rejects.items())]
        out += [f"verified_chain.{name}={n}" for name, n in self.verified_chain.items()]
        out += [f"completed_rounds.{name}={n}" for name, n in self.completed_rounds.items()]
        out += [
            f"dropped_by_mac={self.dropped_by_mac}",
            f"attacker_sent={self.attacker_sent}",
            f"attacker_passed_filter={self.attacker_passed_filter}",
            f"malformed={self.malformed}",
            f"ignored_confirmations={self.ignored_confirmations}",
            f"dos_failures={self.dos_failures}",
            f"alarms={self.alarms}",
            f"triggers_registered={self.triggers_registered}",
            f"triggers_fired={self.triggers_fired}",
            f"triggers_expired={self.triggers_expired}",
            f"refused_contents={self.refused_contents}",
            f"c_records={self.c_records}",
            f"relays={self.relays}",
            f"emergency_accepted={self.emergency_accepted}",
            f"emergency_rejected={self.emergency_rejected}",
            f"integrity_violations={self.integrity_violations}",
            f"attack_outcome={self.attack_outcome}",
            f"events={len(self.trace)}",
            f"trace_digest={self.trace_digest}",
        ]
        return out


def gossip_phase(receivers: list[PlsReceiver], rounds: int = 2) -> int:
    """Union-merge candidate sets across all peers; returns candidates added."""
    added = 0
    for _ in range(rounds):
        snapshots = [
            {key: list(cs.values) for key, cs in r.candidates.items()} for r in receivers
        ]
        for i, r in enumerate(receivers):
            for j, snap in enumerate(snapshots):
                if i == j:
                    continue
                for (bin, cat), values in snap.items():
                    for v in values:
                        before = len(r.candidate_values(bin, cat))
                        r.ingest(bin, cat, v)
                        added += len(r.candidate_values(bin, cat)) - before
    return added


class _Thing:
    def __init__(self, name: str, device, receiver: PlsReceiver, user: SlvpUser):
        self.name = name
        self.device = device
        self.receiver = receiver
        self.user = user
        self.relay = False
        self.last_received: dict[str, bytes] = {}
        self.outbound_records: list[Record] = []
        self.outbound_contents: list[bytes] = []
        self.verified_blocks = 0

    @property
    def uid(self) -> bytes:
        return self.device.uid

    @property
    def key(self) -> bytes:
        return self.device.key


class _JamSpoofRun:
    """Scripted fork attempt: capture the target's proof reveal off the air,
    keep the server jammed for it, then post a forged link-verify and proof
    built from the stolen reveal and the on-chain link record."""

    def __init__(self, spec: JamSpoof, uid: bytes, hash_len: int):
        self.spec = spec
        self.uid = uid
        self.hash_len = hash_len
        self.phase = "wait"
        self.captured: bytes | None = None
        self.p_hat: bytes | None = None
        self.lv_rec: Record | None = None
        self.outcome = "not-triggered"

    def _posted_p_count(self, chain: Chain) -> int:
        return sum(1 for blk in chain.blocks for rec in blk.records
                   if rec.rtype == "P" and rec.uid == self.uid)

    def intercept(self, rec: Record, uid: bytes, chain: Chain) -> bool:
        """True when the uplink record must be suppressed (and possibly kept)."""
        if uid != self.uid or rec.rtype != "P":
            return False
        if self.phase == "wait":
            if self._posted_p_count(chain) == self.spec.trigger_round:
                self.captured = rec.payload
                self.phase = "captured"
                return True
            return False
        return self.phase in ("captured", "lv-sent", "p-sent")

    def emissions(self, chain: Chain, rng: random.Random) -> list[Record]:
        if self.phase == "captured":
            lvs = chain.records_in_window(self.uid, "LV", 0, chain.next_index)
            if not lvs:
                return []
            l, _ = lvs[-1][1].lv_parts(self.hash_len)
            n_k = xor_bytes(l, self.captured)
            n_hat = random_bytes(rng, self.hash_len)
            forged = make_lv(n_k, n_hat, self.hash_len)
            self.p_hat = hash_data(n_hat, self.hash_len)
            self.lv_rec = lv_record(self.uid, forged.l, forged.v)
            self.phase = "lv-sent"
            return [self.lv_rec]
        if self.phase == "lv-sent":
            posted = any(self.lv_rec in blk.records for blk in chain.blocks)
            if posted:
                self.phase = "p-sent"
                return [p_record(self.uid, self.p_hat)]
            return [self.lv_rec]
        if self.phase == "p-sent":
            return [p_record(self.uid, self.p_hat)]
        return []

    def on_decision(self, p_payload: bytes, accepted: bool, reason: str) -> str | None:
        if self.phase == "p-sent" and p_payload == self.p_hat:
            self.phase = "done"
            self.outcome = "fork-accepted" if accepted else f"rejected:{reason}"
            return self.outcome
        if self.phase == "done" and self.outcome.startswith("rejected") \
                and accepted and p_payload == self.captured:
            self.outcome = "defended"
            return self.outcome
        return None


class Simulation:
    def __init__(self, config: SimConfig, full_validation: bool = True):
        self.config = config
        self.full_validation = full_validation
        self.rng = random.Random(config.seed)
        self.hash_len = config.hash_len
        store = CasStore(DirBackend(config.cas_dir) if config.cas_dir else None,
                         hash_len=config.hash_len)
        self.cas = store
        self.chain = Chain(arity=4, hash_len=config.hash_len, store=store)
        self.triggers = TriggerManager(store, expiry_after=config.trigger_expiry)
        self.registry = UidRegistry(prefix_len=config.prefix_len)
        self.validator = SlvpValidator(hash_len=config.hash_len, v_checks=full_validation)
        self.sequencer = Sequencer(rng=self.rng, hash_len=config.hash_len)
        self.report = SimReport(config=config, full_validation=full_validation)
        self.originated: set[bytes] = set()
        self.pool: list[Record] = []
        self.things: list[_Thing] = []
        self.jam_run: _JamSpoofRun | None = None
        self.flood_rate = 0
        self.corrupt_p = 0.0
        self._hors_params = HorsParams(alpha=config.alpha,
                                       digest_bits=config.hors_digest_bits)

        for i in range(config.num_things):
            key = random_bytes(self.rng, config.hash_len)
            device = enrol_device(
                self.registry, key, self.sequencer.p1, self.rng,
                alpha=config.alpha, bootstrap=config.hors_bootstrap,
                hash_len=config.hash_len, current_block=0)
            boot = device.schedule.bootstrap_nonces() if config.hors_bootstrap else None
            self.validator.register(device.uid, device.p1, boot)
            name = f"thing{i}"
            user = SlvpUser(device.uid, device.p1, device.schedule,
                            hash_len=config.hash_len,
                            document_source=_document_source(name))
            receiver = PlsReceiver(self.sequencer.p1, hash_len=config.hash_len,
                                   cap=config.candidate_cap)
            thing = _Thing(name, device, receiver, user)
            thing.outbound_records.append(user.initial_record())
            self.things.append(thing)

        for atk in config.attackers:
            if isinstance(atk, JamSpoof):
                self.jam_run = _JamSpoofRun(atk, self.things[atk.target].uid,
                                            config.hash_len)
            elif isinstance(atk, NoiseFlood):
                self.flood_rate += atk.rate
            elif isinstance(atk, Corrupt):
                self.corrupt_p = max(self.corrupt_p, atk.p)

        self.chain.append_block([])  # genesis
        self.report.blocks_formed = 1

    # -- helpers ----------------------------------------------------------

    def _trace(self, interval: int, actor: str, kind: str, detail: str) -> None:
        self.report.trace.append(TraceEvent(interval, actor, kind, detail))

    def _flip_byte(self, data: bytes) -> bytes:
        i = self.rng.randrange(len(data))
        return data[:i] + bytes([data[i] ^ (1 + self.rng.randrange(255))]) + data[i + 1 :]

    # -- per-interval phases ----------------------------------------------

    def _deliver(self, t: int, bc) -> None:
        copies = 1 + self.config.num_proxies + sum(1 for th in self.things if th.relay)
        for th in self.things:
            counts = []
            for cat, payload in bc.payloads():
                got = 0
                for _ in range(copies):
                    if self.config.jam_all:
                        continue
                    if self.rng.random() < self.config.loss_prob:
                        continue
                    data = payload
                    if self.config.corrupt_prob and self.rng.random() < self.config.corrupt_prob:
                        data = self._flip_byte(data)
                    if self.corrupt_p and self.rng.random() < self.corrupt_p:
                        data = random_bytes(self.rng, len(payload))
                    th.receiver.ingest(t, cat, data)
                    th.last_received[cat] = data
                    got += 1
                counts.append(f"{cat.lower()}={got}")
            self._trace(t, th.name, "ingest", f"bin={t} " + " ".join(counts))

    def _proxy_auth(self, t: int, bc) -> None:
        if not self.config.proxy_auth:
            return
        joined = 0
        for th in self.things:
            ok = True
            for cat, payload in bc.payloads():
                wire = make_proxy_auth(th.key, th.uid, cat, payload,
                                       self.config.prefix_len, self.hash_len)
                if not check_proxy_auth(th.key, wire, th.last_received, th.uid,
                                        self.config.prefix_len, self.hash_len):
                    ok = False
            th.relay = ok
            joined += ok
        self.report.relays += joined

    def _verify(self, t: int, process_users: bool) -> None:
        for th in self.things:
            while th.receiver.next_bin <= t:
                bin = th.receiver.next_bin
                try:
                    res = th.receiver.verify_bin(bin)
                except DosFailure:
                    self.report.dos_failures += 1
                    self._trace(t, th.name, "reject", f"reason=dos-failure bin={bin}")
                    break
                except ProtocolBreach as exc:
                    self.report.alarms += 1
                    self._trace(t, th.name, "alarm", f"reason=pair-breach bin={bin} ({exc})")
                    break
                block = None
                for h in res.message_hashes:
                    body = self.cas.get(h)
                    if body is None:
                        continue
                    parsed = parse_block(body, self.hash_len, self.config.prefix_len)
                    if parsed.index == bin - 1 and parsed.block_hash == h:
                        block = parsed
                        break
                if block is None:
                    self.report.dos_failures += 1
                    self._trace(t, th.name, "reject", f"reason=no-block-body bin={bin}")
                    break
                if block.block_hash not in self.originated:
                    self.report.integrity_violations += 1
                    self._trace(t, th.name, "alarm",
                                f"reason=foreign-block block={block.index}")
                th.verified_blocks = block.index
                self._trace(t, th.name, "validate",
                            f"bin={bin} block={block.index} hash={block.block_hash.hex()[:16]}")
                if process_users:
                    out = th.user.observe_block(block)
                    th.outbound_records.extend(out.records)
                    th.outbound_contents.extend(out.contents)
                    for msg in out.alarms:
                        self.report.alarms += 1
                        self._trace(t, th.name, "alarm", f"reason=sequence-fork {msg}")

    def _emergency(self, t: int) -> None:
        cfg = self.config
        if cfg.emergency_interval != t or not 0 <= cfg.emergency_thing < len(self.things):
            return
        th = self.things[cfg.emergency_thing]
        message = f"emergency {th.name} interval {t}".encode()
        try:
            sig = hors_sign(th.user.schedule, th.key, message, self._hors_params)
        except ProbationError as exc:
            self.report.emergency_rejected += 1
            self._trace(t, th.name, "reject", f"reason=emergency-probation ({exc})")
            return
        self._trace(t, th.name, "broadcast", f"type=emergency round={sig.round}")
        if self.rng.random() < cfg.loss_prob:
            return
        body = encode_emergency(th.uid, sig, message, b"")
        wire = encode_emergency(th.uid, sig, message,
                                mac_trailer(th.key, body, self.hash_len))
        uid, sig, message, trailer = parse_emergency(
            wire, self._hors_params, cfg.prefix_len, self.hash_len)
        entry = self.registry.get(uid)
        if entry is None or trailer != mac_trailer(
                entry.key, wire[: -len(trailer)], self.hash_len):
            self.report.dropped_by_mac += 1
            return
        try:
            ok = hors_verify(self.validator.revealed[uid], entry.key, message,
                             sig, self._hors_params, self.hash_len)
        except MissingNonceError as exc:
            self.report.emergency_rejected += 1
            self._trace(t, "fs", "reject", f"reason=emergency-unverifiable ({exc})")
            return
        if ok:
            self.report.emergency_accepted += 1
            self._trace(t, "fs", "accept", f"emergency uid={th.uid.hex()} round={sig.round}")
        else:
            self.report.emergency_rejected += 1
            self._trace(t, "fs", "reject", f"reason=emergency-bad-signature uid={th.uid.hex()}")

    def _collect_uplinks(self, t: int):
        records = []
        contents = []
        for th in self.things:
            for rec in th.outbound_records:
                self._trace(t, th.name, "broadcast", f"type={rec.rtype}")
                if self.jam_run is not None and self.jam_run.intercept(rec, th.uid, self.chain):
                    self._trace(t, "attacker", "ingest",
                                f"intercepted type={rec.rtype} uid={th.uid.hex()}")
                    continue
                if self.rng.random() < self.config.loss_prob:
                    continue
                wire = record_wire(rec)
                trailer = mac_trailer(th.key, wire, self.hash_len)
                if self.config.corrupt_prob and self.rng.random() < self.config.corrupt_prob:
                    wire = self._flip_byte(wire)
                records.append((wire, trailer, th.name))
            th.outbound_records = []
            for content in th.outbound_contents:
                if self.rng.random() < self.config.loss_prob:
                    continue
                contents.append((th.uid, content, mac_trailer(th.key, content, self.hash_len),
                                 th.name))
            th.outbound_contents = []

        if self.jam_run is not None:
            for rec in self.jam_run.emissions(self.chain, self.rng):
                self.report.attacker_sent += 1
                self._trace(t, "attacker", "broadcast", f"type={rec.rtype} forged=1")
                records.append((record_wire(rec), random_bytes(self.rng, 2), "attacker"))
        if self.flood_rate:
            uids = self.registry.uids()
            for _ in range(self.flood_rate):
                rtype = ("P", "S", "LV", "C")[self.rng.randrange(4)]
                uid = uids[self.rng.randrange(len(uids))]
                size = {"P": 1, "S": 1, "LV": 2, "C": 2}[rtype] * self.hash_len
                rec = Record(rtype, uid, random_bytes(self.rng, size))
                records.append((record_wire(rec), random_bytes(self.rng, 2), "attacker"))
            self.report.attacker_sent += self.flood_rate
            self._trace(t, "attacker", "broadcast", f"type=flood count={self.flood_rate}")
        return records, contents

    def _audit_accept(self, uid: bytes, prev_p: bytes, prev_block: int,
                      decision: Accept, current_block: int) -> bool:
        """Independent earliest-knowledge recheck of an accepted proof."""
        lvs = self.chain.records_in_window(uid, "LV", prev_block, current_block)
        valid = []
        knows = []
        for addr, rec in lvs:
            l, v = rec.lv_parts(self.hash_len)
            n = xor_bytes(l, decision.p)
            if hash_data(n, self.hash_len) == prev_p \
                    and hash_data(decision.p + n, self.hash_len) == v:
                valid.append(addr)
        if not valid:
            return False
        n = decision.revealed_nonce
        for addr, rec in lvs:
            l, v = rec.lv_parts(self.hash_len)
            if v == hash_data(xor_bytes(l, n) + n, self.hash_len):
                knows.append(addr)
        return decision.lv_addr == min(valid) == min(knows)

    def _fog_server(self, t: int, records, contents) -> None:
        forming = self.chain.next_index
        for wire, trailer, origin in records:
            uid = wire[1 : 1 + self.config.prefix_len]
            if self.config.mac_filter:
                if not mac_filter(self.registry, uid, wire, trailer, self.hash_len):
                    self.report.dropped_by_mac += 1
                    continue
            if origin == "attacker":
                self.report.attacker_passed_filter += 1
            try:
                rec = parse_record(wire, self.hash_len, self.config.prefix_len)
            except (ValueError, KeyError, IndexError):
                self.report.malformed += 1
                continue
            if rec.rtype in ("C", "G"):
                # confirmations come only from the storage manager
                self.report.ignored_confirmations += 1
                continue
            if rec.rtype != "P":
                self.pool.append(rec)
                continue
            prev_snapshot = self.validator.last_proof(rec.uid)
            decision = self.validator.validate_p(rec.uid, rec.payload, self.chain, forming)
            accepted = isinstance(decision, Accept)
            if self.jam_run is not None:
                outcome = self.jam_run.on_decision(
                    rec.payload, accepted, "" if accepted else decision.reason)
                if outcome is not None:
                    self.report.attack_outcome = outcome
            if not accepted:
                self.report.rejects[decision.reason] = \
                    self.report.rejects.get(decision.reason, 0) + 1
                self._trace(t, "fs", "reject",
                            f"uid={rec.uid.hex()} reason={decision.reason}")
                continue
            self.pool.append(rec)
            if decision.round == 0:
                self.report.anchor_accepts += 1
                self._trace(t, "fs", "accept", f"uid={rec.uid.hex()} anchor=1")
                continue
            self.report.accepts += 1
            if self.full_validation and prev_snapshot is not None:
                if not self._audit_accept(rec.uid, prev_snapshot[0], prev_snapshot[1],
                                          decision, forming):
                    self.report.integrity_violations += 1
                    self._trace(t, "fs", "alarm",
                                f"reason=audit-mismatch uid={rec.uid.hex()}")
            for s_addr, h_m in decision.s_results:
                ws = WsProof(decision.round, rec.uid, h_m, decision.lv_addr, s_addr)
                self.triggers.register_trigger(ws, forming)
                self.report.triggers_registered += 1
            self._trace(t, "fs", "accept",
                        f"uid={rec.uid.hex()} round={decision.round} "
                        f"lv={decision.lv_addr.block}.{decision.lv_addr.seq} "
                        f"s_count={len(decision.s_results)}")

        for uid, content, trailer, origin in contents:
            if self.config.mac_filter:
                if not mac_filter(self.registry, uid, content, trailer, self.hash_len):
                    self.report.dropped_by_mac += 1
                    continue
            fired = self.triggers.submit_content(uid, content, forming)
            if not fired:
                self.report.refused_contents += 1
                continue
            for conf in fired:
                self.pool.append(c_record(conf.uid, conf.h_m, conf.ws_name))
                self.report.triggers_fired += 1
                self.report.c_records += 1
                self._trace(t, "fs", "trigger-fire",
                            f"uid={conf.uid.hex()} h_m={conf.h_m.hex()[:16]} "
                            f"ws={conf.ws_name.hex()[:16]}")

        for name in self.triggers.expire_triggers(forming):
            self.report.triggers_expired += 1
            self._trace(t, "fs", "trigger-expire", f"ws={name.hex()[:16]}")

    def step(self, t: int) -> None:
        block = self.chain.block(t)
        bc = self.sequencer.publish_block(block)
        self.originated.add(block.block_hash)
        self._trace(t, "sequencer", "broadcast",
                    f"bin={t} block={block.index} hash={block.block_hash.hex()[:16]}")
        self._deliver(t, bc)
        self._proxy_auth(t, bc)
        merged = gossip_phase([th.receiver for th in self.things],
                              self.config.gossip_rounds)
        self._trace(t, "net", "gossip", f"rounds={self.config.gossip_rounds} merged={merged}")
        self._verify(t, process_users=True)
        self._emergency(t)
        records, contents = self._collect_uplinks(t)
        self._fog_server(t, records, contents)
        self.chain.append_block(self.pool)
        self.pool = []
        self.report.blocks_formed += 1

    def closing_pass(self, t: int) -> None:
        """One extra broadcast so the last content-bearing block verifies."""
        block = self.chain.block(t)
        bc = self.sequencer.publish_block(block)
        self.originated.add(block.block_hash)
        self._trace(t, "sequencer", "broadcast",
                    f"bin={t} block={block.index} hash={block.block_hash.hex()[:16]}")
        self._deliver(t, bc)
        merged = gossip_phase([th.receiver for th in self.things],
                              self.config.gossip_rounds)
        self._trace(t, "net", "gossip", f"rounds={self.config.gossip_rounds} merged={merged}")
        self._verify(t, process_users=False)

    def run(self) -> SimReport:
        for t in range(1, self.config.intervals + 1):
            self.step(t)
        self.closing_pass(self.config.intervals + 1)
        for th in self.things:
            self.report.verified_chain[th.name] = th.verified_blocks
            self.report.completed_rounds[th.name] = th.user.completed_rounds
        if self.jam_run is not None and self.report.attack_outcome == "n/a":
            self.report.attack_outcome = self.jam_run.outcome
        return self.report


def _document_source(name: str):
    def source(round: int) -> bytes:
        return f"{name} document for round {round}".encode()

    return source


def run(config: SimConfig) -> SimReport:
    """Full protocol: verify-record checks and earliest-wins arbitration on."""
    return Simulation(config, full_validation=True).run()


def run_gf_baseline(config: SimConfig) -> SimReport:
    """Link-only validation baseline, demonstrating the fork the verify
    records exist to prevent."""
    return Simulation(config, full_validation=False).run()
