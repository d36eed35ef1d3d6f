"""Hash-derived keystreams and per-block check values.

Message framing (all integers big-endian, fixed width)::

    tag (1) || key (16) || chunk_index (8) || block_row (4) || block_col (4) || payload

Tags: 0x01 public fragment B (SHA-256 over the plain private fragment),
0x02 public fragment C (SHA-512 over masked B), 0x03 DCT public pixels
(SHA-512 over the plain 66-bit private fragment). Digests are truncated
MSB-first to the fragment width.
"""
from __future__ import annotations

import binascii
import hashlib

from .model import BlockAddress, SecretKey

TAG_B = 0x01
TAG_C = 0x02
TAG_DCT = 0x03

KS_B_BITS = 124
KS_C_BITS = 480


def _truncate(digest: bytes, nbits: int) -> bytes:
    nbytes = (nbits + 7) // 8
    out = bytearray(digest[:nbytes])
    if nbits % 8:
        out[-1] &= (0xFF << (8 - nbits % 8)) & 0xFF
    return bytes(out)


def keystream(tag: int, key: SecretKey, address: BlockAddress, payload: bytes, nbits: int) -> bytes:
    algo = hashlib.sha256 if tag == TAG_B else hashlib.sha512
    digest = algo(bytes([tag]) + key.bytes + address.encode() + bytes(payload)).digest()
    return _truncate(digest, nbits)


def derive_keystream_b(key: SecretKey, address: BlockAddress, priv_a_plain: bytes) -> bytes:
    """124 keystream bits (16 bytes, 4 zero pad bits) masking public fragment B."""
    return keystream(TAG_B, key, address, priv_a_plain, KS_B_BITS)


def derive_keystream_c(key: SecretKey, address: BlockAddress, frag_b_masked: bytes) -> bytes:
    """480 keystream bits masking public fragment C, chained on masked B."""
    return keystream(TAG_C, key, address, frag_b_masked, KS_C_BITS)


def derive_dct_mask(key: SecretKey, address: BlockAddress, priv66_plain: bytes) -> bytes:
    """512 bits masking the 64 public pixels of a DCT block."""
    return keystream(TAG_DCT, key, address, priv66_plain, 512)


def block_check(*parts: bytes) -> bytes:
    """CRC-16/CCITT (init 0xFFFF) over a block's stored public bytes, big-endian."""
    crc = 0xFFFF
    for p in parts:
        crc = binascii.crc_hqx(p, crc)
    return crc.to_bytes(2, "big")


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError("xor operands differ in length")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")
