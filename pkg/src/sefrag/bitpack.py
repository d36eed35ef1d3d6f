"""Bit-exact serialisation of coefficient fragments.

DWT fields are offset-binary (``u = v + 2**(w-1)`` in ``w`` bits); DCT private
fields are sign + 10-bit magnitude. Everything is MSB-first.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CoefficientRangeError, StructuralError

# canonical coefficient order inside an 8x8 two-level block
LL2 = [(0, 0), (0, 1), (1, 0), (1, 1)]
HL2 = [(0, 2), (0, 3), (1, 2), (1, 3)]
LH2 = [(2, 0), (2, 1), (3, 0), (3, 1)]
HH2 = [(2, 2), (2, 3), (3, 2), (3, 3)]
HL1 = [(r, c) for r in range(4) for c in range(4, 8)]
LH1 = [(r, c) for r in range(4, 8) for c in range(4)]
HH1 = [(r, c) for r in range(4, 8) for c in range(4, 8)]


@dataclass(frozen=True)
class DwtFragmentLayout:
    """Field positions and widths for the three DWT fragments."""

    private: tuple[tuple[tuple[int, int], int], ...]
    public_b: tuple[tuple[tuple[int, int], int], ...]
    public_c: tuple[tuple[tuple[int, int], int], ...]

    @staticmethod
    def _bits(fields) -> int:
        return sum(w for _, w in fields)

    @property
    def private_bits(self) -> int:
        return self._bits(self.private)

    @property
    def b_bits(self) -> int:
        return self._bits(self.public_b)

    @property
    def c_bits(self) -> int:
        return self._bits(self.public_c)

    @property
    def total_bits(self) -> int:
        return self.private_bits + self.b_bits + self.c_bits


DWT_LAYOUT = DwtFragmentLayout(
    private=tuple((p, 10) for p in LL2),
    public_b=tuple((p, 10) for p in HL2 + LH2) + tuple((p, 11) for p in HH2),
    public_c=tuple((p, 10) for p in HL1 + LH1 + HH1),
)

A_BITS = DWT_LAYOUT.private_bits  # 40
B_BITS = DWT_LAYOUT.b_bits  # 124
C_BITS = DWT_LAYOUT.c_bits  # 480
A_BYTES = (A_BITS + 7) // 8  # 5
B_BYTES = (B_BITS + 7) // 8  # 16, four trailing pad bits
C_BYTES = (C_BITS + 7) // 8  # 60

DCT_FIELD_BITS = 11
DCT_PRIVATE_FIELDS = 6
DCT_PRIVATE_BITS = DCT_FIELD_BITS * DCT_PRIVATE_FIELDS  # 66
DCT_PRIVATE_BYTES = (DCT_PRIVATE_BITS + 7) // 8  # 9


class BitWriter:
    """Growable MSB-first bit sink."""

    def __init__(self) -> None:
        self._buf = bytearray()
        self._acc = 0
        self._nacc = 0
        self.nbits = 0

    def write(self, value: int, width: int) -> None:
        if width <= 0:
            raise StructuralError("field width must be positive")
        if value < 0 or value >> width:
            raise CoefficientRangeError(f"value {value} does not fit in {width} bits", value=value)
        self._acc = (self._acc << width) | value
        self._nacc += width
        self.nbits += width
        while self._nacc >= 8:
            self._nacc -= 8
            self._buf.append((self._acc >> self._nacc) & 0xFF)
        self._acc &= (1 << self._nacc) - 1

    def getvalue(self) -> bytes:
        """Bytes written so far; a partial final byte is zero-padded on the right."""
        if self._nacc:
            return bytes(self._buf) + bytes([(self._acc << (8 - self._nacc)) & 0xFF])
        return bytes(self._buf)


class BitReader:
    def __init__(self, data: bytes, nbits: int | None = None) -> None:
        self._data = bytes(data)
        self.nbits = len(self._data) * 8 if nbits is None else nbits
        if self.nbits > len(self._data) * 8:
            raise StructuralError("bit length exceeds buffer")
        self.pos = 0

    def read(self, width: int) -> int:
        if self.pos + width > self.nbits:
            raise StructuralError("read past end of bit buffer")
        value = 0
        for _ in range(width):
            byte = self._data[self.pos >> 3]
            value = (value << 1) | ((byte >> (7 - (self.pos & 7))) & 1)
            self.pos += 1
        return value

    @property
    def remaining(self) -> int:
        return self.nbits - self.pos


def _offset(value: int, width: int, position) -> int:
    half = 1 << (width - 1)
    if not -half <= value < half:
        raise CoefficientRangeError(
            f"coefficient {value} at {position} outside [{-half}, {half - 1}] for a {width}-bit field",
            position=position,
            value=value,
        )
    return value + half


def _pack_fields(coeffs: np.ndarray, fields) -> bytes:
    w = BitWriter()
    for pos, width in fields:
        w.write(_offset(int(coeffs[pos]), width, pos), width)
    return w.getvalue()


def pack_dwt_block(coeffs: np.ndarray) -> tuple[bytes, bytes, bytes]:
    """Split a two-level coefficient block into (private 40b, public B 124b, public C 480b)."""
    c = np.asarray(coeffs)
    if c.shape != (8, 8):
        raise StructuralError(f"expected an 8x8 coefficient block, got {c.shape}")
    return (
        _pack_fields(c, DWT_LAYOUT.private),
        _pack_fields(c, DWT_LAYOUT.public_b),
        _pack_fields(c, DWT_LAYOUT.public_c),
    )


def unpack_dwt_block(priv_a: bytes, frag_b: bytes, frag_c: bytes) -> np.ndarray:
    for name, raw, want in (("private", priv_a, A_BYTES), ("B", frag_b, B_BYTES), ("C", frag_c, C_BYTES)):
        if len(raw) != want:
            raise StructuralError(f"fragment {name} must be {want} bytes, got {len(raw)}")
    if frag_b[-1] & 0x0F:
        raise StructuralError("fragment B pad bits are not zero")
    out = np.zeros((8, 8), dtype=np.int16)
    for raw, nbits, fields in (
        (priv_a, A_BITS, DWT_LAYOUT.private),
        (frag_b, B_BITS, DWT_LAYOUT.public_b),
        (frag_c, C_BITS, DWT_LAYOUT.public_c),
    ):
        r = BitReader(raw, nbits)
        for pos, width in fields:
            out[pos] = r.read(width) - (1 << (width - 1))
    return out


# -- DCT private fragment ------------------------------------------------------

def _sign_magnitude(value: int, is_dc: bool) -> int:
    if is_dc and value == -1024:
        return 1 << 10  # "negative zero" pattern carries the single out-of-magnitude DC value
    if not -1023 <= value <= 1023:
        raise CoefficientRangeError(f"{'DC' if is_dc else 'AC'} value {value} exceeds the 11-bit field", value=value)
    return ((1 << 10) | -value) if value < 0 else value


def _from_sign_magnitude(field: int, is_dc: bool) -> int:
    sign, mag = field >> 10, field & 0x3FF
    if sign and mag == 0:
        return -1024 if is_dc else 0
    return -mag if sign else mag


def pack_dct_private(values: Sequence[int], dc_index: int = 0) -> bytes:
    """Six signed coefficients -> 66 bits (9 bytes, 6 pad bits)."""
    if len(values) != DCT_PRIVATE_FIELDS:
        raise StructuralError(f"expected {DCT_PRIVATE_FIELDS} private values, got {len(values)}")
    w = BitWriter()
    for i, v in enumerate(values):
        w.write(_sign_magnitude(int(v), i == dc_index), DCT_FIELD_BITS)
    return w.getvalue()


def unpack_dct_private(raw: bytes, dc_index: int = 0) -> list[int]:
    if len(raw) != DCT_PRIVATE_BYTES:
        raise StructuralError(f"DCT private fragment must be {DCT_PRIVATE_BYTES} bytes")
    r = BitReader(raw, DCT_PRIVATE_BITS)
    return [_from_sign_magnitude(r.read(DCT_FIELD_BITS), i == dc_index) for i in range(DCT_PRIVATE_FIELDS)]


# -- vectorised helpers used by the numpy backend -------------------------------

def fields_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    """``(n, k)`` unsigned field values -> ``(n, k*width)`` array of 0/1 bits."""
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    bits = (values.astype(np.int64)[..., None] >> shifts) & 1
    return bits.reshape(values.shape[0], -1).astype(np.uint8)


def bits_to_fields(bits: np.ndarray, width: int) -> np.ndarray:
    n = bits.shape[0]
    b = bits.reshape(n, -1, width).astype(np.int64)
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return (b * weights).sum(axis=-1)


def join_bits(rows: np.ndarray, nbits: int) -> bytes:
    """Concatenate the first ``nbits`` bits of each packed row into one byte-padded stream."""
    bits = np.unpackbits(rows, axis=1)[:, :nbits]
    return np.packbits(bits.reshape(-1)).tobytes()


def split_bits(stream: bytes, count: int, nbits: int) -> np.ndarray:
    """Inverse of :func:`join_bits`: ``(count, ceil(nbits/8))`` rows, zero pad bits."""
    need = (count * nbits + 7) // 8
    if len(stream) != need:
        raise StructuralError(f"stream holds {len(stream)} bytes, expected {need}")
    bits = np.unpackbits(np.frombuffer(stream, dtype=np.uint8))[: count * nbits].reshape(count, nbits)
    return np.packbits(bits, axis=1)


def stream_bytes(count: int, nbits: int) -> int:
    return (count * nbits + 7) // 8



def dct_private_bytes(fields: int = DCT_PRIVATE_FIELDS) -> int:
    return (fields * DCT_FIELD_BITS + 7) // 8


def pack_dct_rows(values: np.ndarray, dc_index: int = 0) -> np.ndarray:
    """Vectorised :func:`pack_dct_private` for ``(n, k)`` integer values."""
    v = np.asarray(values, dtype=np.int64)
    if v.ndim != 2:
        raise StructuralError("expected an (n, k) array of private values")
    dc = np.zeros(v.shape[1], dtype=bool)
    dc[dc_index] = True
    limit = np.where(dc, 1024, 1023)
    bad = (v > 1023) | (v < -limit)
    if bad.any():
        blk, k = np.argwhere(bad)[0]
        raise CoefficientRangeError(
            f"block {blk}: private value {v[blk, k]} exceeds the 11-bit field", position=(int(blk), int(k)),
            value=int(v[blk, k]),
        )
    fields = np.where(v < 0, (1 << 10) | (-v & 0x3FF), v)
    bits = fields_to_bits(fields, DCT_FIELD_BITS)
    return np.packbits(bits, axis=1)


def unpack_dct_rows(rows: np.ndarray, fields: int, dc_index: int = 0) -> np.ndarray:
    bits = np.unpackbits(np.asarray(rows, dtype=np.uint8), axis=1)[:, : fields * DCT_FIELD_BITS]
    raw = bits_to_fields(bits, DCT_FIELD_BITS)
    sign, mag = raw >> 10, raw & 0x3FF
    out = np.where(sign == 1, -mag, mag)
    neg_zero = (sign == 1) & (mag == 0)
    out[:, dc_index] = np.where(neg_zero[:, dc_index], -1024, out[:, dc_index])
    return out
