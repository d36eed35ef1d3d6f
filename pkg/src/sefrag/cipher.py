"""Strong encryption for private-fragment streams (default AES-128 in CTR mode)."""
from __future__ import annotations

import enum
import hashlib
import threading
from typing import Protocol

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import NonceReuseError, StructuralError
from .model import SecretKey

NONCE_BYTES = 12


class CipherSuiteId(enum.IntEnum):
    AES128_CTR = 1


class StreamCipher(Protocol):
    def encrypt(self, key: SecretKey, nonce: bytes, data: bytes) -> bytes: ...

    def decrypt(self, key: SecretKey, nonce: bytes, data: bytes) -> bytes: ...


class Aes128Ctr:
    """Counter blocks are ``nonce (96 bits) || counter (32 bits, from 0)``."""

    def _apply(self, key: SecretKey, nonce: bytes, data: bytes) -> bytes:
        if len(data) > (1 << 32) * 16:
            raise StructuralError("stream exceeds the 2^32-block counter space")
        ctx = Cipher(algorithms.AES(key.bytes), modes.CTR(nonce + b"\x00\x00\x00\x00")).encryptor()
        return ctx.update(bytes(data)) + ctx.finalize()

    encrypt = _apply
    decrypt = _apply


_SUITES: dict[CipherSuiteId, StreamCipher] = {CipherSuiteId.AES128_CTR: Aes128Ctr()}


def register_suite(suite_id: int, impl: StreamCipher) -> None:
    """Install an alternative length-preserving stream cipher under a new header tag."""
    _SUITES[suite_id] = impl  # type: ignore[index]


def get_suite(suite_id: int) -> StreamCipher:
    try:
        return _SUITES[suite_id]  # type: ignore[index]
    except KeyError as exc:
        raise StructuralError(f"unknown cipher suite {suite_id}") from exc


def chunk_nonce(chunk_index: int) -> bytes:
    if not 0 <= chunk_index < 1 << 96:
        raise StructuralError("chunk index out of nonce range")
    return chunk_index.to_bytes(NONCE_BYTES, "big")


class NonceGuard:
    """Remembers (key, nonce) pairs used for encryption during one run."""

    def __init__(self) -> None:
        self._seen: set[tuple[bytes, bytes]] = set()
        self._lock = threading.Lock()

    def claim(self, key: SecretKey, nonce: bytes) -> None:
        tag = (hashlib.sha256(b"nonce-guard" + key.bytes).digest()[:8], bytes(nonce))
        with self._lock:
            if tag in self._seen:
                raise NonceReuseError(f"nonce {nonce.hex()} reused under the same key")
            self._seen.add(tag)


def encrypt_stream(
    key: SecretKey,
    nonce: bytes | int,
    plain: bytes,
    guard: NonceGuard | None = None,
    suite: int = CipherSuiteId.AES128_CTR,
) -> bytes:
    n = chunk_nonce(nonce) if isinstance(nonce, int) else bytes(nonce)
    if len(n) != NONCE_BYTES:
        raise StructuralError("chunk nonce must be 96 bits")
    if guard is not None:
        guard.claim(key, n)
    return get_suite(suite).encrypt(key, n, plain)


def decrypt_stream(key: SecretKey, nonce: bytes | int, cipher: bytes, suite: int = CipherSuiteId.AES128_CTR) -> bytes:
    n = chunk_nonce(nonce) if isinstance(nonce, int) else bytes(nonce)
    if len(n) != NONCE_BYTES:
        raise StructuralError("chunk nonce must be 96 bits")
    return get_suite(suite).decrypt(key, n, cipher)


