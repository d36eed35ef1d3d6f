import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_tile
from sefrag.errors import StructuralError
from sefrag.model import BlockAddress, SchemeId, SecretKey, blocks_of, chunk_count, stitch_blocks, tile_chunk


def test_key_requires_16_bytes():
    with pytest.raises(StructuralError):
        SecretKey(b"short")
    assert len(SecretKey.generate().bytes) == 16


def test_key_repr_is_redacted(key):
    assert key.bytes.hex() not in repr(key)
    assert "redacted" in repr(key)


def test_flip_bit_msb_first(key):
    flipped = key.flip_bit(0)
    assert flipped.bytes[0] == key.bytes[0] ^ 0x80
    assert flipped.bytes[1:] == key.bytes[1:]
    assert key.flip_bit(127).bytes[15] == key.bytes[15] ^ 0x01


def test_scheme_tags_round_trip():
    for scheme in SchemeId:
        assert SchemeId.from_tag(scheme.tag) is scheme
        assert SchemeId.parse(scheme.cli_name) is scheme
    with pytest.raises(StructuralError):
        SchemeId.from_tag(99)


def test_address_encoding_is_fixed_width_big_endian():
    assert BlockAddress(1, 2, 3).encode() == bytes.fromhex("0000000000000001" "00000002" "00000003")


def test_tile_single_block_is_identity():
    block = np.arange(64, dtype=np.uint8).reshape(8, 8)
    tiles = list(tile_chunk(block))
    assert len(tiles) == 1
    assert tiles[0][0] == BlockAddress(0, 0, 0)
    assert np.array_equal(tiles[0][1], block)


def test_tile_1024_chunk_has_16384_blocks():
    assert blocks_of(np.zeros((1024, 1024), dtype=np.uint8)).shape == (16384, 8, 8)


def test_tile_16x16_matches_naive_extractor():
    m = np.arange(256, dtype=np.uint8).reshape(16, 16)
    tiles = dict(tile_chunk(m, chunk_index=5))
    assert len(tiles) == 4
    block01 = tiles[BlockAddress(5, 0, 1)]
    assert block01.tolist() == naive_tile(m, 0, 1)
    assert block01[0].tolist() == list(range(8, 16))


def test_tile_rejects_unaligned_side():
    with pytest.raises(StructuralError):
        list(tile_chunk(np.zeros((12, 12), dtype=np.uint8)))


def test_addresses_unique_and_total():
    m = np.zeros((64, 64), dtype=np.uint8)
    addrs = [a for a, _ in tile_chunk(m)]
    assert len(set(addrs)) == 64
    assert {(a.block_row, a.block_col) for a in addrs} == {(r, c) for r in range(8) for c in range(8)}


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_tile_then_stitch_is_identity(rows, cols, seed):
    m = np.random.default_rng(seed).integers(0, 256, (rows * 8, cols * 8), dtype=np.uint8)
    assert np.array_equal(stitch_blocks(blocks_of(m), rows * 8, cols * 8), m)


def test_chunk_count():
    assert chunk_count(0, 1024) == 0
    assert chunk_count(1, 1024) == 1
    assert chunk_count(1024 * 1024, 1024) == 1
    assert chunk_count(1024 * 1024 + 1, 1024) == 2
