"""Per-block DWT protection: the private fragment goes to the stream cipher,
the two public fragments are XOR-masked with chained hash keystreams."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bitpack
from .errors import AvailabilityError, CoefficientRangeError, StructuralError
from .dwt53 import RANGE_TABLE
from .keystream import derive_keystream_b, derive_keystream_c, xor_bytes
from .model import BlockAddress, SecretKey


@dataclass(frozen=True)
class FragmentTriple:
    """One block's fragments. ``priv_a`` is the plain 40-bit private fragment;
    the pipeline encrypts private fragments a whole chunk at a time."""

    priv_a: bytes | None
    frag_b_masked: bytes | None
    frag_c_masked: bytes | None
    address: BlockAddress

    def __post_init__(self) -> None:
        for name, raw, want in (
            ("private", self.priv_a, bitpack.A_BYTES),
            ("B", self.frag_b_masked, bitpack.B_BYTES),
            ("C", self.frag_c_masked, bitpack.C_BYTES),
        ):
            if raw is not None and len(raw) != want:
                raise StructuralError(f"fragment {name} must be {want} bytes")


def protect_block(key: SecretKey, address: BlockAddress, coeffs: np.ndarray) -> FragmentTriple:
    priv, frag_b, frag_c = bitpack.pack_dwt_block(coeffs)
    b_masked = xor_bytes(frag_b, derive_keystream_b(key, address, priv))
    c_masked = xor_bytes(frag_c, derive_keystream_c(key, address, b_masked))
    return FragmentTriple(priv, b_masked, c_masked, address)


def unprotect_block(key: SecretKey, address: BlockAddress, triple: FragmentTriple) -> np.ndarray:
    missing = tuple(
        name
        for name, raw in (("A", triple.priv_a), ("B", triple.frag_b_masked), ("C", triple.frag_c_masked))
        if raw is None
    )
    if missing:
        raise AvailabilityError(f"missing fragment(s): {', '.join(missing)}", missing=missing)
    frag_c = xor_bytes(triple.frag_c_masked, derive_keystream_c(key, address, triple.frag_b_masked))
    frag_b = xor_bytes(triple.frag_b_masked, derive_keystream_b(key, address, triple.priv_a))
    if frag_b[-1] & 0x0F:
        raise CoefficientRangeError("fragment B pad bits set after unmasking: corrupted block")
    coeffs = bitpack.unpack_dwt_block(triple.priv_a, frag_b, frag_c)
    RANGE_TABLE.check(coeffs)
    return coeffs
