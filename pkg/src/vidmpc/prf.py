"""AES-128-CTR keystreams used as the PRF and as seeded dealer randomness.

Streams are random-access: ``words(label, count, start)`` returns the same
values regardless of how a caller chunks its requests.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

KEY_BYTES = 16


def derive_key(*parts) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode() if not isinstance(p, bytes) else p)
        h.update(b"\x00")
    return h.digest()[:KEY_BYTES]


def _nonce(label) -> int:
    if isinstance(label, int):
        return label & ((1 << 64) - 1)
    data = label if isinstance(label, bytes) else str(label).encode()
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "big")


class Keystream:
    def __init__(self, key: bytes):
        if len(key) != KEY_BYTES:
            raise ValueError("keystream key must be 16 bytes")
        self.key = bytes(key)

    @classmethod
    def from_seed(cls, seed) -> "Keystream":
        return cls(derive_key("vidmpc-seed", seed))

    @classmethod
    def fresh(cls) -> "Keystream":
        return cls(os.urandom(KEY_BYTES))

    def raw(self, label, nbytes: int, start: int = 0) -> bytes:
        if nbytes <= 0:
            return b""
        block, skip = divmod(start, 16)
        counter = (_nonce(label) << 64) | block
        enc = Cipher(algorithms.AES(self.key), modes.CTR(counter.to_bytes(16, "big"))).encryptor()
        return enc.update(bytes(skip + nbytes))[skip:]

    def words(self, label, count: int, start: int = 0) -> np.ndarray:
        buf = self.raw(label, 8 * count, 8 * start)
        return np.frombuffer(buf, dtype="<u8").astype(np.uint64)

    def bits(self, label, count: int, start: int = 0) -> np.ndarray:
        buf = self.raw(label, count, start)
        return (np.frombuffer(buf, dtype=np.uint8) & 1).astype(np.uint64)
