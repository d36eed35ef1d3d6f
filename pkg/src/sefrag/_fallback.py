"""Pure numpy/hashlib implementation of the chunk kernels.

Selected at import when the compiled ``_kernels`` extension is unavailable
(or when ``SEFRAG_BACKEND=python``). Every function mirrors the compiled one
bit for bit.
"""
from __future__ import annotations

import binascii
import hashlib

import numpy as np

from . import bitpack
from .dwt53 import forward_blocks as _forward, inverse_blocks as _inverse
from .errors import CoefficientRangeError

NAME = "python"

_A_POS = [p for p, _ in bitpack.DWT_LAYOUT.private]
_B10_POS = [p for p, w in bitpack.DWT_LAYOUT.public_b if w == 10]
_B11_POS = [p for p, w in bitpack.DWT_LAYOUT.public_b if w == 11]
_C_POS = [p for p, _ in bitpack.DWT_LAYOUT.public_c]


def _gather(coeffs: np.ndarray, positions) -> np.ndarray:
    rows = [r for r, _ in positions]
    cols = [c for _, c in positions]
    return coeffs[:, rows, cols].astype(np.int64)


def _offset_fields(values: np.ndarray, width: int, positions) -> np.ndarray:
    half = 1 << (width - 1)
    bad = (values < -half) | (values >= half)
    if bad.any():
        blk, k = np.argwhere(bad)[0]
        raise CoefficientRangeError(
            f"block {blk}: coefficient {values[blk, k]} at {positions[k]} does not fit {width} bits",
            position=(int(blk), *positions[k]),
            value=int(values[blk, k]),
        )
    return bitpack.fields_to_bits(values + half, width)


def forward_blocks(blocks: np.ndarray) -> np.ndarray:
    return _forward(blocks)


def inverse_blocks(coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return _inverse(coeffs)


def pack_dwt(coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a_bits = _offset_fields(_gather(coeffs, _A_POS), 10, _A_POS)
    b_bits = np.concatenate(
        [
            _offset_fields(_gather(coeffs, _B10_POS), 10, _B10_POS),
            _offset_fields(_gather(coeffs, _B11_POS), 11, _B11_POS),
        ],
        axis=1,
    )
    c_bits = _offset_fields(_gather(coeffs, _C_POS), 10, _C_POS)
    return np.packbits(a_bits, axis=1), np.packbits(b_bits, axis=1), np.packbits(c_bits, axis=1)


def unpack_dwt(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    out = np.zeros((n, 8, 8), dtype=np.int16)
    groups = (
        (np.unpackbits(a, axis=1)[:, :40], [(_A_POS, 10)]),
        (np.unpackbits(b, axis=1)[:, :124], [(_B10_POS, 10), (_B11_POS, 11)]),
        (np.unpackbits(c, axis=1)[:, :480], [(_C_POS, 10)]),
    )
    for bits, parts in groups:
        start = 0
        for positions, width in parts:
            span = len(positions) * width
            vals = bitpack.bits_to_fields(bits[:, start:start + span], width) - (1 << (width - 1))
            rows = [r for r, _ in positions]
            cols = [cc for _, cc in positions]
            out[:, rows, cols] = vals
            start += span
    return out


def _address(chunk_index: int, blocks_per_row: int, i: int) -> bytes:
    return chunk_index.to_bytes(8, "big") + (i // blocks_per_row).to_bytes(4, "big") + (i % blocks_per_row).to_bytes(4, "big")


def _crc(*parts: bytes) -> bytes:
    crc = 0xFFFF
    for p in parts:
        crc = binascii.crc_hqx(p, crc)
    return crc.to_bytes(2, "big")


def _keystreams(algo, tag: bytes, key: bytes, chunk_index: int, bpr: int, rows: np.ndarray, width: int) -> np.ndarray:
    n, step = rows.shape
    raw = rows.tobytes()
    base = algo(tag + key)
    out = np.empty((n, width), dtype=np.uint8)
    for i in range(n):
        h = base.copy()
        h.update(_address(chunk_index, bpr, i) + raw[step * i:step * (i + 1)])
        out[i] = np.frombuffer(h.digest()[:width], dtype=np.uint8)
    return out


def _ks_b(key, chunk_index, bpr, a):
    ks = _keystreams(hashlib.sha256, b"\x01", key, chunk_index, bpr, a, 16)
    ks[:, 15] &= 0xF0
    return ks


def _ks_c(key, chunk_index, bpr, b_masked):
    return _keystreams(hashlib.sha512, b"\x02", key, chunk_index, bpr, b_masked, 60)


def _checks(*arrays: np.ndarray) -> np.ndarray:
    n = arrays[0].shape[0]
    raws = [(x.tobytes(), x.shape[1]) for x in arrays]
    out = np.empty((n, 2), dtype=np.uint8)
    for i in range(n):
        out[i] = np.frombuffer(_crc(*(r[w * i:w * (i + 1)] for r, w in raws)), dtype=np.uint8)
    return out


def mask_dwt(key: bytes, chunk_index: int, bpr: int, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """XOR-mask B and C in place; return the ``(n, 2)`` per-block check values."""
    b ^= _ks_b(key, chunk_index, bpr, a)
    c ^= _ks_c(key, chunk_index, bpr, b)
    return _checks(b, c)


def unmask_dwt(key: bytes, chunk_index: int, bpr: int, a: np.ndarray, b: np.ndarray, c: np.ndarray,
               check: np.ndarray) -> np.ndarray:
    """Unmask B and C in place; return a boolean flag per block whose check failed."""
    bad = (_checks(b, c) != check).any(axis=1)
    c ^= _ks_c(key, chunk_index, bpr, b)
    b ^= _ks_b(key, chunk_index, bpr, a)
    return bad


def mask_dct(key: bytes, chunk_index: int, bpr: int, priv: np.ndarray, public: np.ndarray, masked: bool) -> np.ndarray:
    """Optionally XOR the 64 public bytes with the SHA-512 mask; return checks of the stored public bytes."""
    if masked:
        public ^= _keystreams(hashlib.sha512, b"\x03", key, chunk_index, bpr, priv, 64)
    return _checks(public)


def unmask_dct(key: bytes, chunk_index: int, bpr: int, priv: np.ndarray, public: np.ndarray, masked: bool,
               check: np.ndarray) -> np.ndarray:
    bad = (_checks(public) != check).any(axis=1)
    if masked:
        public ^= _keystreams(hashlib.sha512, b"\x03", key, chunk_index, bpr, priv, 64)
    return bad
