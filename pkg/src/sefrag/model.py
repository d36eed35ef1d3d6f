"""Domain types shared across the package: keys, scheme tags, block addressing
and chunk tiling."""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import StructuralError

BLOCK = 8
DEFAULT_CHUNK_SIDE = 1024
BENCHMARK_SIDES = (512, 1024, 2048, 3200, 4800)


@dataclass(frozen=True, repr=False)
class SecretKey:
    """128-bit user secret. ``repr`` never shows the bytes."""

    bytes: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.bytes, (bytes, bytearray)) or len(self.bytes) != 16:
            raise StructuralError("secret key must be exactly 16 bytes")
        object.__setattr__(self, "bytes", bytes(self.bytes))

    @classmethod
    def generate(cls) -> "SecretKey":
        return cls(os.urandom(16))

    @classmethod
    def from_hex(cls, text: str) -> "SecretKey":
        try:
            raw = bytes.fromhex(text.strip())
        except ValueError as exc:
            raise StructuralError("key is not valid hex") from exc
        return cls(raw)

    def flip_bit(self, index: int) -> "SecretKey":
        """Return a key differing from this one in bit ``index`` (0 = MSB of byte 0)."""
        if not 0 <= index < 128:
            raise StructuralError("bit index must be in [0, 128)")
        raw = bytearray(self.bytes)
        raw[index // 8] ^= 0x80 >> (index % 8)
        return SecretKey(bytes(raw))

    def __repr__(self) -> str:
        return "SecretKey(<redacted>)"


class SchemeId(enum.Enum):
    DWT2_L2 = 1
    DCT_L1 = 2
    DCT_L2 = 3

    @property
    def tag(self) -> int:
        return self.value

    @property
    def cli_name(self) -> str:
        return {SchemeId.DWT2_L2: "dwt2", SchemeId.DCT_L1: "dct1", SchemeId.DCT_L2: "dct2"}[self]

    @property
    def is_dct(self) -> bool:
        return self is not SchemeId.DWT2_L2

    @classmethod
    def from_tag(cls, tag: int) -> "SchemeId":
        try:
            return cls(tag)
        except ValueError as exc:
            raise StructuralError(f"unknown scheme tag {tag}") from exc

    @classmethod
    def parse(cls, name: str) -> "SchemeId":
        table = {
            "dwt2": cls.DWT2_L2, "dwt2-l2": cls.DWT2_L2,
            "dct1": cls.DCT_L1, "dct-l1": cls.DCT_L1,
            "dct2": cls.DCT_L2, "dct-l2": cls.DCT_L2,
        }
        try:
            return table[name.lower()]
        except KeyError as exc:
            raise StructuralError(f"unknown scheme {name!r}") from exc


@dataclass(frozen=True, order=True)
class BlockAddress:
    chunk_index: int
    block_row: int
    block_col: int

    def encode(self) -> bytes:
        """Fixed-width big-endian form used as keystream nonce material."""
        return (
            self.chunk_index.to_bytes(8, "big")
            + self.block_row.to_bytes(4, "big")
            + self.block_col.to_bytes(4, "big")
        )


def as_byte_matrix(data: bytes | np.ndarray, side: int | None = None) -> np.ndarray:
    """View bytes as a square uint8 matrix, checking the side length."""
    arr = np.frombuffer(data, dtype=np.uint8) if isinstance(data, (bytes, bytearray, memoryview)) else np.asarray(data)
    if arr.dtype != np.uint8:
        raise StructuralError("byte matrix must be uint8")
    if arr.ndim == 1:
        if side is None:
            side = int(round(arr.size ** 0.5))
        if side * side != arr.size:
            raise StructuralError(f"{arr.size} bytes do not form a {side}x{side} matrix")
        arr = arr.reshape(side, side)
    if arr.ndim != 2:
        raise StructuralError("byte matrix must be two-dimensional")
    return arr


def _check_tileable(matrix: np.ndarray) -> None:
    if matrix.ndim != 2:
        raise StructuralError("expected a 2-D matrix")
    h, w = matrix.shape
    if h == 0 or w == 0 or h % BLOCK or w % BLOCK:
        raise StructuralError(f"matrix shape {matrix.shape} is not a positive multiple of {BLOCK}")


def blocks_of(matrix: np.ndarray) -> np.ndarray:
    """Return an ``(n, 8, 8)`` copy of the blocks of ``matrix`` in row-major block order."""
    _check_tileable(matrix)
    h, w = matrix.shape
    return np.ascontiguousarray(
        matrix.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).swapaxes(1, 2).reshape(-1, BLOCK, BLOCK)
    )


def stitch_blocks(blocks: np.ndarray, height: int, width: int | None = None) -> np.ndarray:
    """Inverse of :func:`blocks_of`."""
    width = height if width is None else width
    if height % BLOCK or width % BLOCK:
        raise StructuralError("stitch target must be a multiple of 8")
    nbr, nbc = height // BLOCK, width // BLOCK
    if blocks.shape != (nbr * nbc, BLOCK, BLOCK):
        raise StructuralError(f"{blocks.shape[0]} blocks cannot fill {height}x{width}")
    return np.ascontiguousarray(
        blocks.reshape(nbr, nbc, BLOCK, BLOCK).swapaxes(1, 2).reshape(height, width)
    )


def tile_chunk(chunk: np.ndarray, chunk_index: int = 0) -> Iterator[tuple[BlockAddress, np.ndarray]]:
    """Yield ``(address, 8x8 block)`` pairs in row-major block order."""
    matrix = np.asarray(chunk)
    blocks = blocks_of(matrix)
    nbc = matrix.shape[1] // BLOCK
    for i, block in enumerate(blocks):
        yield BlockAddress(chunk_index, i // nbc, i % nbc), block


def chunk_count(length: int, side: int) -> int:
    per = side * side
    return -(-length // per)
