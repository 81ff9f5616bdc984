"""Byte-string crypto primitives shared by every protocol module.

All protocol values (proofs, links, nonces, keys) are binary strings of a
single configurable length ``hash_len`` (default 32, i.e. SHA-256 output).
The cipher is deterministic and length-preserving: protocol equality checks
require that encrypting the same block under the same key always yields the
same ciphertext, so there is no IV or randomness here.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

DEFAULT_HASH_LEN = 32
_AES_BLOCK = 16

ZERO32 = b"\x00" * 32


def hash_data(data: bytes, hash_len: int = DEFAULT_HASH_LEN) -> bytes:
    """SHA-256 of ``data``, truncated to ``hash_len`` bytes (1..32)."""
    if not 1 <= hash_len <= 32:
        raise ValueError(f"hash_len must be in 1..32, got {hash_len}")
    return hashlib.sha256(data).digest()[:hash_len]


def hash_hex(data: bytes, hash_len: int = DEFAULT_HASH_LEN) -> str:
    return hash_data(data, hash_len).hex()


def xor_bytes(a: bytes, b: bytes) -> bytes:
    """Bitwise XOR of two equal-length strings."""
    if len(a) != len(b):
        raise ValueError(f"xor length mismatch: {len(a)} vs {len(b)}")
    return bytes(x ^ y for x, y in zip(a, b))


# Key schedules are the expensive part of the AES wrapper below; protocol
# rounds reuse the same handful of keys, so a small cache pays off.
_cipher_cache: dict[bytes, Cipher] = {}
_CIPHER_CACHE_MAX = 256


def _aes_for_key(key: bytes) -> Cipher:
    ciph = _cipher_cache.get(key)
    if ciph is None:
        if len(key) in (16, 24, 32):
            material = key
        else:
            material = hashlib.sha256(key).digest()
        ciph = Cipher(algorithms.AES(material), modes.ECB())
        if len(_cipher_cache) >= _CIPHER_CACHE_MAX:
            _cipher_cache.clear()
        _cipher_cache[key] = ciph
    return ciph


def _block_tweak(index: int) -> bytes:
    return index.to_bytes(_AES_BLOCK, "big")


def encrypt(key: bytes, plaintext: bytes) -> bytes:
    """Deterministic length-preserving encryption of a hash-length block.

    The plaintext is split into 16-byte cipher blocks; each block is XORed
    with its block index before encryption so equal halves do not produce
    equal ciphertext halves.  Requires ``len(plaintext)`` to be a multiple
    of 16 (hash_len 16 and 32 both qualify).
    """
    if len(plaintext) % _AES_BLOCK != 0:
        raise ValueError(f"plaintext length {len(plaintext)} not a multiple of {_AES_BLOCK}")
    enc = _aes_for_key(key).encryptor()
    out = bytearray()
    for i in range(0, len(plaintext), _AES_BLOCK):
        block = xor_bytes(plaintext[i : i + _AES_BLOCK], _block_tweak(i // _AES_BLOCK))
        out += enc.update(block)
    enc.finalize()
    return bytes(out)


def decrypt(key: bytes, ciphertext: bytes) -> bytes:
    """Inverse of :func:`encrypt`."""
    if len(ciphertext) % _AES_BLOCK != 0:
        raise ValueError(f"ciphertext length {len(ciphertext)} not a multiple of {_AES_BLOCK}")
    dec = _aes_for_key(key).decryptor()
    out = bytearray()
    for i in range(0, len(ciphertext), _AES_BLOCK):
        block = dec.update(ciphertext[i : i + _AES_BLOCK])
        out += xor_bytes(block, _block_tweak(i // _AES_BLOCK))
    dec.finalize()
    return bytes(out)


def mac(key: bytes, data: bytes, out_len: int, hash_len: int = DEFAULT_HASH_LEN) -> bytes:
    """Truncated cipher-based MAC (CBC-MAC over length-prefixed data).

    The full-length tag is fixed for a given (key, data); shorter tags are
    prefixes of it.  ``out_len`` may be 1..hash_len, so the CBC residue is
    extended block-by-block when more than 16 bytes are requested.
    """
    if not 1 <= out_len <= hash_len:
        raise ValueError(f"mac out_len must be in 1..{hash_len}, got {out_len}")
    msg = len(data).to_bytes(8, "big") + data
    if len(msg) % _AES_BLOCK != 0:
        msg += b"\x00" * (_AES_BLOCK - len(msg) % _AES_BLOCK)
    enc = _aes_for_key(key).encryptor()
    state = bytes(_AES_BLOCK)
    for i in range(0, len(msg), _AES_BLOCK):
        state = enc.update(xor_bytes(state, msg[i : i + _AES_BLOCK]))
    tag = state
    while len(tag) < hash_len:
        state = enc.update(xor_bytes(state, _block_tweak(len(tag) // _AES_BLOCK)))
        tag += state
    enc.finalize()
    return tag[:out_len]


@dataclass(frozen=True)
class WinternitzChain:
    """Hash chain N[0..alpha]: values[i] = H(values[i-1]), top = published nonce."""

    seed: bytes
    alpha: int
    values: tuple[bytes, ...]

    @property
    def top(self) -> bytes:
        return self.values[self.alpha]


def chain_build(seed: bytes, alpha: int, hash_len: int = DEFAULT_HASH_LEN) -> WinternitzChain:
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    values = [seed]
    for _ in range(alpha):
        values.append(hash_data(values[-1], hash_len))
    return WinternitzChain(seed=seed, alpha=alpha, values=tuple(values))


def chain_value(chain: WinternitzChain, i: int) -> bytes:
    if not 0 <= i <= chain.alpha:
        raise IndexError(f"chain index {i} out of range 0..{chain.alpha}")
    return chain.values[i]


def hash_iter(value: bytes, n: int, hash_len: int = DEFAULT_HASH_LEN) -> bytes:
    """Apply the hash ``n`` times."""
    if n < 0:
        raise ValueError("iteration count must be >= 0")
    for _ in range(n):
        value = hash_data(value, hash_len)
    return value


def random_bytes(rng: random.Random, n: int) -> bytes:
    """Draw n bytes from a seeded generator (all protocol randomness is injectable)."""
    return rng.randbytes(n)
