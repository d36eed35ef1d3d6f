"""8x8 DCT-II through the orthonormal basis matrix, and the coefficient split
used by the bitmap schemes.

Blocks are processed in batches shaped ``(n, 8, 8)``. The split keeps a small
set of low-frequency coefficients private and turns the rest back into
pixels with a fixed DC of 1024 (a flat mid-grey carrier).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CoefficientRangeError, StructuralError

N = 8
PUBLIC_DC = 1024.0
DEFAULT_SELECTION: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2))


def _basis() -> np.ndarray:
    u = np.arange(N)[:, None]
    x = np.arange(N)[None, :]
    alpha = np.where(u == 0, np.sqrt(1.0 / N), np.sqrt(2.0 / N))
    return alpha * np.cos((2 * x + 1) * u * np.pi / (2 * N))


BASIS = _basis()
BASIS.setflags(write=False)


@dataclass(frozen=True)
class SelectedCoeffSet:
    """Ordered coefficient positions kept in the private fragment."""

    positions: tuple[tuple[int, int], ...] = DEFAULT_SELECTION

    def __post_init__(self) -> None:
        pos = tuple((int(r), int(c)) for r, c in self.positions)
        if not pos:
            raise StructuralError("coefficient selection is empty")
        if len(set(pos)) != len(pos):
            raise StructuralError("coefficient selection has duplicates")
        if any(not (0 <= r < N and 0 <= c < N) for r, c in pos):
            raise StructuralError("coefficient selection leaves the 8x8 block")
        if (0, 0) not in pos:
            raise StructuralError("coefficient selection must contain the DC position (0, 0)")
        object.__setattr__(self, "positions", pos)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def dc_index(self) -> int:
        return self.positions.index((0, 0))

    @property
    def rows(self) -> list[int]:
        return [r for r, _ in self.positions]

    @property
    def cols(self) -> list[int]:
        return [c for _, c in self.positions]

    @classmethod
    def parse(cls, text: str) -> "SelectedCoeffSet":
        """``"0,0;0,1;1,0"`` -> selection."""
        pairs = [p.split(",") for p in text.replace(" ", "").split(";") if p]
        return cls(tuple((int(r), int(c)) for r, c in pairs))


DEFAULT_SET = SelectedCoeffSet()


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def dct8_forward(block: np.ndarray, centered: bool = True) -> np.ndarray:
    """``C . X . C^T`` on one block or a batch."""
    x = np.asarray(block, dtype=np.float64)
    if centered:
        x = x - 128.0
    return BASIS @ x @ BASIS.T


def dct8_inverse(coeffs: np.ndarray) -> np.ndarray:
    return BASIS.T @ np.asarray(coeffs, dtype=np.float64) @ BASIS


def dct8_direct(block: np.ndarray) -> np.ndarray:
    """Double-sum evaluation of the 2-D DCT-II, for cross-checking."""
    f = np.asarray(block, dtype=np.float64)
    out = np.zeros((N, N))
    for u in range(N):
        for v in range(N):
            au = np.sqrt(1 / N) if u == 0 else np.sqrt(2 / N)
            av = np.sqrt(1 / N) if v == 0 else np.sqrt(2 / N)
            acc = 0.0
            for x in range(N):
                for y in range(N):
                    acc += f[x, y] * np.cos((2 * x + 1) * u * np.pi / 16) * np.cos((2 * y + 1) * v * np.pi / 16)
            out[u, v] = au * av * acc
    return out


def split_dct_blocks(blocks: np.ndarray, sel: SelectedCoeffSet = DEFAULT_SET) -> tuple[np.ndarray, np.ndarray]:
    """Batch split: ``(n,8,8)`` pixels -> (``(n,k)`` int private values, ``(n,8,8)`` uint8 public pixels)."""
    coeffs = dct8_forward(blocks, centered=True)
    rows, cols = sel.rows, sel.cols
    private = round_half_away(coeffs[:, rows, cols]).astype(np.int64)
    dc = private[:, sel.dc_index]
    ac = np.delete(private, sel.dc_index, axis=1)
    if (np.abs(dc) > 1024).any() or (np.abs(ac) > 1023).any():
        raise CoefficientRangeError("selected DCT coefficient outside the 11-bit range")
    coeffs[:, rows, cols] = 0.0
    coeffs[:, 0, 0] = PUBLIC_DC
    public = round_half_away(np.clip(dct8_inverse(coeffs), 0.0, 255.0)).astype(np.uint8)
    return private, public


def rebuild_dct_blocks(private: np.ndarray, public: np.ndarray, sel: SelectedCoeffSet = DEFAULT_SET) -> np.ndarray:
    """Inverse of :func:`split_dct_blocks`; lossy only through the two rounding points."""
    coeffs = dct8_forward(np.asarray(public), centered=False)
    coeffs[:, sel.rows, sel.cols] = np.asarray(private, dtype=np.float64)
    pixels = dct8_inverse(coeffs) + 128.0
    return round_half_away(np.clip(pixels, 0.0, 255.0)).astype(np.uint8)


def split_dct_block(block: np.ndarray, sel: SelectedCoeffSet = DEFAULT_SET) -> tuple[list[int], np.ndarray]:
    private, public = split_dct_blocks(np.asarray(block)[None], sel)
    return [int(v) for v in private[0]], public[0]


def rebuild_dct_block(private: Sequence[int], public: np.ndarray, sel: SelectedCoeffSet = DEFAULT_SET) -> np.ndarray:
    return rebuild_dct_blocks(np.asarray(private)[None], np.asarray(public)[None], sel)[0]


def energy_fraction(blocks: np.ndarray, sel: SelectedCoeffSet = DEFAULT_SET) -> float:
    """Share of squared (centred) coefficient energy held by the selection."""
    coeffs = dct8_forward(blocks, centered=True)
    total = float((coeffs**2).sum())
    if total == 0.0:
        return 1.0
    return float((coeffs[:, sel.rows, sel.cols] ** 2).sum()) / total
