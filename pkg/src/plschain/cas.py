"""Content-addressable storage (write-once) and the proof/trigger pipeline.

Every entry is named by the hash of its content, so a reader never has to
trust the store: it re-hashes whatever comes back.  After validating a
posting round the server parks a proof object here per signature record and
arms a trigger on the expected content hash; when the matching content
arrives the trigger fires into a confirmation record, otherwise it expires
into the security log.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .ledger import RecordAddress
from .primitives import DEFAULT_HASH_LEN, hash_data


class IntegrityError(Exception):
    """Stored bytes no longer hash to their name."""


class HashBreakAlarm(Exception):
    """Different content arrived under an existing name. Practically
    unreachable; detected rather than silently overwritten."""


class MemoryBackend:
    def __init__(self):
        self._data: dict[str, bytes] = {}

    def load(self, name: str) -> bytes | None:
        return self._data.get(name)

    def save(self, name: str, content: bytes) -> None:
        self._data[name] = content

    def exists(self, name: str) -> bool:
        return name in self._data

    def __len__(self) -> int:
        return len(self._data)


class DirBackend:
    """One file per entry in a two-level hex fan-out under ``root``."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)

    def _path(self, name: str) -> str:
        return os.path.join(self.root, name[:2], name[2:4], name)

    def load(self, name: str) -> bytes | None:
        try:
            with open(self._path(name), "rb") as fh:
                return fh.read()
        except FileNotFoundError:
            return None

    def save(self, name: str, content: bytes) -> None:
        path = self._path(name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(content)

    def exists(self, name: str) -> bool:
        return os.path.exists(self._path(name))

    def __len__(self) -> int:
        n = 0
        for _, _, files in os.walk(self.root):
            n += len(files)
        return n


class CasStore:
    def __init__(self, backend=None, hash_len: int = DEFAULT_HASH_LEN):
        self.backend = backend if backend is not None else MemoryBackend()
        self.hash_len = hash_len

    def __len__(self) -> int:
        return len(self.backend)

    def put(self, content: bytes) -> bytes:
        """Store once; idempotent. Returns the content hash (the name)."""
        name = hash_data(content, self.hash_len)
        hexname = name.hex()
        existing = self.backend.load(hexname)
        if existing is not None:
            if existing != content:
                raise HashBreakAlarm(f"name {hexname} already maps to different content")
            return name
        self.backend.save(hexname, content)
        return name

    def get(self, name: bytes) -> bytes | None:
        """Fetch and re-hash; None when absent."""
        content = self.backend.load(name.hex())
        if content is None:
            return None
        if hash_data(content, self.hash_len) != name:
            raise IntegrityError(f"entry {name.hex()} fails its own hash")
        return content

    def exists(self, name: bytes) -> bool:
        return self.backend.exists(name.hex())


@dataclass(frozen=True)
class WsProof:
    """Proof that signature record s_addr, arbitrated by the link-verify
    record at lv_addr, signed content hash h_m in the given round."""

    round: int
    uid: bytes
    h_m: bytes
    lv_addr: RecordAddress
    s_addr: RecordAddress


def serialize_ws(ws: WsProof) -> bytes:
    """4-byte round + uid + h_m + 4+4 bytes per address (lv then s)."""
    return (ws.round.to_bytes(4, "big") + ws.uid + ws.h_m
            + ws.lv_addr.block.to_bytes(4, "big") + ws.lv_addr.seq.to_bytes(4, "big")
            + ws.s_addr.block.to_bytes(4, "big") + ws.s_addr.seq.to_bytes(4, "big"))


def parse_ws(wire: bytes, hash_len: int = DEFAULT_HASH_LEN) -> WsProof:
    uid_len = len(wire) - 4 - hash_len - 16
    if uid_len < 1:
        raise ValueError(f"proof record too short: {len(wire)} bytes")
    round = int.from_bytes(wire[:4], "big")
    uid = wire[4 : 4 + uid_len]
    h_m = wire[4 + uid_len : 4 + uid_len + hash_len]
    rest = wire[4 + uid_len + hash_len :]
    lv = RecordAddress(int.from_bytes(rest[:4], "big"), int.from_bytes(rest[4:8], "big"))
    s = RecordAddress(int.from_bytes(rest[8:12], "big"), int.from_bytes(rest[12:16], "big"))
    return WsProof(round=round, uid=uid, h_m=h_m, lv_addr=lv, s_addr=s)


@dataclass
class Trigger:
    uid: bytes
    h_m: bytes
    ws_name: bytes
    created_block: int
    expiry_after: int


@dataclass(frozen=True)
class ConfirmationData:
    """Material for the C-record posted when a trigger fires."""

    uid: bytes
    h_m: bytes
    ws_name: bytes


class TriggerManager:
    """Active triggers keyed by proof name; every trigger ends exactly once,
    either fired (content arrived) or expired (copied to the security log)."""

    def __init__(self, store: CasStore, expiry_after: int = 16):
        self.store = store
        self.expiry_after = expiry_after
        self.active: dict[bytes, Trigger] = {}
        self.fired: list[bytes] = []
        self.security_log: list[Trigger] = []

    def register_trigger(self, ws: WsProof, current_block: int) -> bytes:
        """Store the proof object under its hash and arm a trigger on its
        content hash.  Re-registering an identical proof is a no-op; distinct
        proofs for the same (uid, h_m) coexist and all fire together."""
        ws_name = self.store.put(serialize_ws(ws))
        if ws_name not in self.active:
            self.active[ws_name] = Trigger(uid=ws.uid, h_m=ws.h_m, ws_name=ws_name,
                                           created_block=current_block,
                                           expiry_after=self.expiry_after)
        return ws_name

    def submit_content(self, uid: bytes, content: bytes,
                       current_block: int) -> list[ConfirmationData]:
        """Fire every active trigger matching (uid, H(content)).  Content with
        no armed trigger is refused: no storage, no confirmation."""
        h_m = hash_data(content, self.store.hash_len)
        matches = [t for t in self.active.values() if t.uid == uid and t.h_m == h_m]
        if not matches:
            return []
        self.store.put(content)
        out = []
        for trig in matches:
            del self.active[trig.ws_name]
            self.fired.append(trig.ws_name)
            out.append(ConfirmationData(uid=uid, h_m=h_m, ws_name=trig.ws_name))
        return out

    def expire_triggers(self, current_block: int) -> list[bytes]:
        """Retire triggers older than their window; returns their proof names."""
        expired = [t for t in self.active.values()
                   if current_block - t.created_block > t.expiry_after]
        for trig in expired:
            del self.active[trig.ws_name]
            self.security_log.append(trig)
        return [t.ws_name for t in expired]
