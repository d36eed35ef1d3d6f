"""Reversible Le Gall 5/3 lifting transform on 8x8 blocks.

Forward lifting on a length-N signal (N even), with whole-sample symmetric
extension ``x(-1) = x(1)`` and ``x(N) = x(N-2)``::

    d(n) = x(2n+1) - floor((x(2n) + x(2n+2)) / 2)
    s(n) = x(2n)   + floor((d(n-1) + d(n) + 2) / 4)

The output is stored s-half first, then d-half. Two dyadic 2-D levels are
applied to a block whose bytes are centred by subtracting 128; the second
level only touches the top-left 4x4 (first-level LL) region.

Block layout after :func:`dwt2_two_level_forward` (row, col slices)::

    [0:2, 0:2] 2nd LL    [0:2, 2:4] 2nd HL    [0:4, 4:8] 1st HL
    [2:4, 0:2] 2nd LH    [2:4, 2:4] 2nd HH
    [4:8, 0:4] 1st LH                         [4:8, 4:8] 1st HH
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CoefficientRangeError, StructuralError

CENTER = 128
HEADROOM = 1 << 20


@dataclass(frozen=True)
class LiftingSignal:
    s: tuple[int, ...]
    d: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.s) != len(self.d):
            raise StructuralError(f"approximation/detail length mismatch: {len(self.s)} != {len(self.d)}")

    def as_list(self) -> list[int]:
        return [*self.s, *self.d]


def lift_forward_1d(signal: Sequence[int]) -> LiftingSignal:
    x = [int(v) for v in signal]
    n = len(x)
    if n < 2 or n % 2:
        raise StructuralError(f"lifting needs an even length >= 2, got {n}")
    if any(abs(v) > HEADROOM for v in x):
        raise CoefficientRangeError("lifting input exceeds the +/-2^20 headroom")
    h = n // 2
    d = []
    for k in range(h):
        right = x[2 * k + 2] if 2 * k + 2 < n else x[n - 2]
        d.append(x[2 * k + 1] - ((x[2 * k] + right) >> 1))
    s = []
    for k in range(h):
        left = d[k - 1] if k > 0 else d[0]
        s.append(x[2 * k] + ((left + d[k] + 2) >> 2))
    return LiftingSignal(tuple(s), tuple(d))


def lift_inverse_1d(ls: LiftingSignal) -> list[int]:
    s, d = list(ls.s), list(ls.d)
    if len(s) != len(d):
        raise StructuralError("approximation/detail length mismatch")
    h = len(s)
    even = [s[k] - (((d[k - 1] if k > 0 else d[0]) + d[k] + 2) >> 2) for k in range(h)]
    out = [0] * (2 * h)
    for k in range(h):
        right = even[k + 1] if k + 1 < h else even[h - 1]
        out[2 * k] = even[k]
        out[2 * k + 1] = d[k] + ((even[k] + right) >> 1)
    return out


# -- vectorised lifting along the last axis ---------------------------------

def _fwd_last(x: np.ndarray) -> np.ndarray:
    even = x[..., 0::2]
    odd = x[..., 1::2]
    right = np.concatenate([even[..., 1:], even[..., -1:]], axis=-1)
    d = odd - ((even + right) >> 1)
    left = np.concatenate([d[..., :1], d[..., :-1]], axis=-1)
    s = even + ((left + d + 2) >> 2)
    return np.concatenate([s, d], axis=-1)


def _inv_last(y: np.ndarray) -> np.ndarray:
    h = y.shape[-1] // 2
    s, d = y[..., :h], y[..., h:]
    left = np.concatenate([d[..., :1], d[..., :-1]], axis=-1)
    even = s - ((left + d + 2) >> 2)
    right = np.concatenate([even[..., 1:], even[..., -1:]], axis=-1)
    odd = d + ((even + right) >> 1)
    out = np.empty_like(y)
    out[..., 0::2] = even
    out[..., 1::2] = odd
    return out


def dwt2_level(block: np.ndarray, inverse: bool = False) -> np.ndarray:
    """One separable 2-D level: rows then columns (inverse: columns then rows).

    Works on a single ``n x n`` region or a stack ``(..., n, n)``.
    """
    arr = np.asarray(block, dtype=np.int64)
    n = arr.shape[-1]
    if arr.ndim < 2 or arr.shape[-2] != n or n not in (8, 4):
        raise StructuralError(f"dwt2_level needs an 8x8 or 4x4 region, got {arr.shape}")
    if not inverse:
        rows = _fwd_last(arr)
        return _fwd_last(rows.swapaxes(-1, -2)).swapaxes(-1, -2)
    cols = _inv_last(arr.swapaxes(-1, -2)).swapaxes(-1, -2)
    return _inv_last(cols)


def forward_blocks(blocks: np.ndarray) -> np.ndarray:
    """Two-level forward transform of a ``(n, 8, 8)`` uint8 stack -> int16."""
    x = np.asarray(blocks).astype(np.int64) - CENTER
    y = dwt2_level(x)
    y[..., :4, :4] = dwt2_level(y[..., :4, :4])
    return y.astype(np.int16)


def inverse_blocks(coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`forward_blocks`.

    Returns the uint8 blocks (clamped) and a boolean flag per block that is
    set when reconstruction left the byte range, i.e. the coefficients cannot
    have come from a legal block.
    """
    y = np.asarray(coeffs).astype(np.int64)
    y[..., :4, :4] = dwt2_level(y[..., :4, :4], inverse=True)
    x = dwt2_level(y, inverse=True) + CENTER
    bad = ((x < 0) | (x > 255)).reshape(x.shape[0], -1).any(axis=1) if x.ndim == 3 else np.array([((x < 0) | (x > 255)).any()])
    return np.clip(x, 0, 255).astype(np.uint8), bad


def dwt2_two_level_forward(block: np.ndarray) -> np.ndarray:
    arr = np.asarray(block)
    if arr.shape != (8, 8):
        raise StructuralError(f"expected an 8x8 block, got {arr.shape}")
    if arr.min() < 0 or arr.max() > 255:
        raise StructuralError("pixel block values must lie in [0, 255]")
    return forward_blocks(arr[None])[0]


def dwt2_two_level_inverse(coeffs: np.ndarray) -> np.ndarray:
    arr = np.asarray(coeffs, dtype=np.int64)
    if arr.shape != (8, 8):
        raise StructuralError(f"expected an 8x8 coefficient block, got {arr.shape}")
    RANGE_TABLE.check(arr)
    pixels, bad = inverse_blocks(arr[None])
    if bad[0]:
        raise CoefficientRangeError("coefficients reconstruct outside [0, 255]")
    return pixels[0]


# -- range derivation --------------------------------------------------------

def lifting_matrix(n: int) -> np.ndarray:
    """Linear part of the forward lifting (rounding dropped): ``out = x @ M``."""
    m = np.zeros((n, n))
    h = n // 2

    def detail(k: int) -> np.ndarray:
        v = np.zeros(n)
        v[2 * k + 1] += 1.0
        v[2 * k] -= 0.5
        v[2 * k + 2 if 2 * k + 2 < n else n - 2] -= 0.5
        return v

    for k in range(h):
        m[:, h + k] = detail(k)
        e = np.zeros(n)
        e[2 * k] = 1.0
        m[:, k] = e + (detail(max(k - 1, 0)) + detail(k)) / 4
    return m


LEVEL1_ANALYSIS = lifting_matrix(8)

# Second-level analysis matrix behind the reference table. Column 1 reads
# (-0.125, 0.25, 0.75, 0.125) where exact 4-point lifting gives
# (-0.125, 0.25, 0.625, 0.25); absolute column sums agree, and the resulting
# bounds dominate the exact ones, so the reference table stays a valid
# (slightly loose) envelope. lifting_matrix(4) gives the exact variant.
LEVEL2_ANALYSIS_REFERENCE = np.array(
    [
        [0.75, -0.125, -0.5, 0.0],
        [0.5, 0.25, 1.0, 0.0],
        [-0.25, 0.75, -0.5, -1.0],
        [0.0, 0.125, 0.0, 1.0],
    ]
)

REFERENCE_LEVEL2_TABLE = (
    (338, 267, 468, 468),
    (267, 211, 369, 369),
    (468, 369, 648, 648),
    (468, 369, 648, 648),
)


def composed_level2_weights(level1: np.ndarray = LEVEL1_ANALYSIS, level2: np.ndarray | None = None) -> np.ndarray:
    """Weights ``W[r, c, i, j]`` of input ``X[i, j]`` (centred) in second-level output ``F[r, c]``."""
    level2 = LEVEL2_ANALYSIS_REFERENCE if level2 is None else level2
    m = level1[:, :4] @ level2  # 8x4: input index -> level-2 coefficient, one axis
    return np.einsum("ir,jc->rcij", m, m)


@dataclass(frozen=True)
class RangeTable:
    """Per-position max |value| of the two-level coefficients.

    ``level2`` covers the top-left 4x4; the three first-level detail bands
    use scalar bounds. ``slack`` absorbs the floor rounding ignored by the
    linear derivation.
    """

    level2: tuple[tuple[int, ...], ...]
    level1: dict[str, int] = field(default_factory=lambda: {"L": 192, "H": 255, "HL": 384, "LH": 384, "HH": 511})
    slack: int = 2

    def as_matrix(self) -> np.ndarray:
        m = np.empty((8, 8), dtype=np.int64)
        m[:4, :4] = np.array(self.level2)
        m[:4, 4:] = self.level1["HL"]
        m[4:, :4] = self.level1["LH"]
        m[4:, 4:] = self.level1["HH"]
        return m

    def violations(self, coeffs: np.ndarray) -> np.ndarray:
        """Boolean mask (same leading shape) of blocks with any coefficient beyond bound + slack."""
        c = np.asarray(coeffs, dtype=np.int64)
        over = np.abs(c) > self.as_matrix() + self.slack
        return over.reshape(*c.shape[:-2], 64).any(axis=-1)

    def check(self, coeffs: np.ndarray) -> None:
        c = np.asarray(coeffs, dtype=np.int64)
        over = np.argwhere(np.abs(c) > self.as_matrix() + self.slack)
        if over.size:
            pos = tuple(int(v) for v in over[0])
            raise CoefficientRangeError(
                f"coefficient {int(c[pos])} at {pos} exceeds its range bound", position=pos, value=int(c[pos])
            )


def derive_range_table(exact: bool = False, amplitude: int = 128) -> RangeTable:
    """Bound every second-level coefficient by ``amplitude * sum(|weights|)``.

    With ``exact=False`` the reference second-level matrix is used and
    the result reproduces the reference 4x4 table; ``exact=True`` composes
    the true 4-point lifting and yields the tighter bounds actually reachable.
    """
    level2 = lifting_matrix(4) if exact else LEVEL2_ANALYSIS_REFERENCE
    w = composed_level2_weights(LEVEL1_ANALYSIS, level2)
    bound = amplitude * np.abs(w).sum(axis=(2, 3))
    # 1e-9 guards exact products such as 648.0 against float noise
    table = tuple(tuple(int(math.ceil(v - 1e-9)) for v in row) for row in bound)
    return RangeTable(level2=table)


RANGE_TABLE = RangeTable(level2=REFERENCE_LEVEL2_TABLE)
