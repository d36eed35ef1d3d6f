"""Bitmap protection on 8x8 DCT blocks.

Level 1 encrypts the private coefficients and leaves the public pixels plain.
Level 2 also XORs the 64 public pixels of each block with a SHA-512 mask
keyed by the secret, the block address and the plain private bits.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import bitpack
from .dct8 import DEFAULT_SET, SelectedCoeffSet, rebuild_dct_blocks, split_dct_blocks
from .errors import AvailabilityError, StructuralError
from .keystream import derive_dct_mask, xor_bytes
from .model import BLOCK, BlockAddress, SecretKey


@dataclass(frozen=True)
class DctBlockArtifact:
    priv: bytes | None
    public: bytes
    level: int

    def __post_init__(self) -> None:
        if self.level not in (1, 2):
            raise StructuralError(f"protection level must be 1 or 2, got {self.level}")
        if len(self.public) != BLOCK * BLOCK:
            raise StructuralError("public DCT fragment must be 64 bytes")

    @property
    def masked(self) -> bool:
        return self.level == 2


def _split(block: np.ndarray, sel: SelectedCoeffSet) -> tuple[bytes, bytes]:
    values, public = split_dct_blocks(np.asarray(block, dtype=np.uint8)[None], sel)
    priv = bitpack.pack_dct_rows(values, sel.dc_index)[0].tobytes()
    return priv, public[0].tobytes()


def protect_dct_level1(key: SecretKey, block: np.ndarray, sel: SelectedCoeffSet = DEFAULT_SET) -> DctBlockArtifact:
    del key  # level 1 only touches the private stream, encrypted per chunk
    priv, public = _split(block, sel)
    return DctBlockArtifact(priv, public, 1)


def protect_dct_level2(key: SecretKey, address: BlockAddress, block: np.ndarray,
                       sel: SelectedCoeffSet = DEFAULT_SET) -> DctBlockArtifact:
    priv, public = _split(block, sel)
    return DctBlockArtifact(priv, xor_bytes(public, derive_dct_mask(key, address, priv)), 2)


def unprotect_dct(key: SecretKey, address: BlockAddress, artifact: DctBlockArtifact,
                  sel: SelectedCoeffSet = DEFAULT_SET) -> np.ndarray:
    if artifact.priv is None:
        raise AvailabilityError("missing private DCT fragment", missing=("A",))
    public = artifact.public
    if artifact.masked:
        public = xor_bytes(public, derive_dct_mask(key, address, artifact.priv))
    row = np.frombuffer(artifact.priv, dtype=np.uint8)[None]
    values = bitpack.unpack_dct_rows(row, len(sel), sel.dc_index)
    pixels = np.frombuffer(public, dtype=np.uint8).reshape(1, BLOCK, BLOCK)
    return rebuild_dct_blocks(values, pixels, sel)[0]


# -- bitmap planes ---------------------------------------------------------------

def read_bitmap(path: str | Path) -> list[np.ndarray]:
    """Decode a bitmap into 8-bit planes: one for gray, three (R, G, B) for colour."""
    with Image.open(path) as im:
        if im.mode == "P":
            im = im.convert("RGB")
        if im.mode in ("1", "L", "I;16", "I", "F"):
            arr = np.asarray(im.convert("L"))
            return [arr.copy()]
        arr = np.asarray(im.convert("RGB"))
    return [arr[..., i].copy() for i in range(3)]


def write_bitmap(path: str | Path, planes: list[np.ndarray]) -> None:
    if len(planes) == 1:
        Image.fromarray(planes[0].astype(np.uint8), "L").save(path, format="BMP")
    elif len(planes) == 3:
        Image.fromarray(np.stack(planes, axis=-1).astype(np.uint8), "RGB").save(path, format="BMP")
    else:
        raise StructuralError(f"cannot write a bitmap with {len(planes)} planes")


def pad_plane(plane: np.ndarray) -> np.ndarray:
    """Edge-replicate a plane up to multiples of 8 in both directions."""
    h, w = plane.shape
    ph, pw = -h % BLOCK, -w % BLOCK
    if ph or pw:
        plane = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    return np.ascontiguousarray(plane, dtype=np.uint8)
