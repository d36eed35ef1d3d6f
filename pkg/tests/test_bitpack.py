import numpy as np
import pytest

from sefrag import bitpack
from sefrag.bitpack import (
    A_BITS,
    B_BITS,
    C_BITS,
    DCT_PRIVATE_BITS,
    BitReader,
    BitWriter,
    pack_dct_private,
    pack_dwt_block,
    unpack_dct_private,
    unpack_dwt_block,
)
from sefrag.dwt53 import forward_blocks
from sefrag.errors import CoefficientRangeError, StructuralError


def test_layout_sizes():
    assert (A_BITS, B_BITS, C_BITS) == (40, 124, 480)
    assert A_BITS + B_BITS + C_BITS == 644
    assert DCT_PRIVATE_BITS == 66


def test_fragment_ratios_per_block():
    assert A_BITS / 512 == pytest.approx(0.078125)
    assert B_BITS / 512 == pytest.approx(0.2421875)
    assert C_BITS / 512 == pytest.approx(0.9375)
    assert DCT_PRIVATE_BITS / 512 == pytest.approx(0.12890625)


def test_writer_reader_round_trip():
    w = BitWriter()
    fields = [(5, 3), (0, 1), (1023, 10), (1, 11), (0x3FF, 10)]
    for v, width in fields:
        w.write(v, width)
    r = BitReader(w.getvalue(), w.nbits)
    assert [r.read(width) for _, width in fields] == [v for v, _ in fields]
    assert r.remaining == 0


def test_writer_is_msb_first():
    w = BitWriter()
    w.write(1, 1)
    w.write(0, 7)
    assert w.getvalue() == b"\x80"


def test_zero_block_private_is_offset_pattern():
    priv, _, _ = pack_dwt_block(np.zeros((8, 8), dtype=np.int64))
    assert priv == int("1000000000" * 4, 2).to_bytes(5, "big")


def test_pack_unpack_random_blocks(rng):
    blocks = rng.integers(0, 256, (20_000, 8, 8), dtype=np.uint8)
    coeffs = forward_blocks(blocks)
    for c in coeffs[:500]:
        a, b, cc = pack_dwt_block(c)
        assert (len(a), len(b), len(cc)) == (5, 16, 60)
        assert b[-1] & 0x0F == 0
        assert np.array_equal(unpack_dwt_block(a, b, cc), c)


def test_pack_rejects_overflow_naming_position():
    c = np.zeros((8, 8), dtype=np.int64)
    c[5, 6] = 512
    with pytest.raises(CoefficientRangeError) as err:
        pack_dwt_block(c)
    assert err.value.position == (5, 6)


def test_eleven_bit_fields_accept_648():
    c = np.zeros((8, 8), dtype=np.int64)
    c[2:4, 2:4] = [[648, -648], [-1024, 1023]]
    assert np.array_equal(unpack_dwt_block(*pack_dwt_block(c)), c)


def test_unpack_rejects_wrong_lengths():
    with pytest.raises(StructuralError):
        unpack_dwt_block(b"\x00" * 4, b"\x00" * 16, b"\x00" * 60)


def test_dct_field_encodings():
    raw = pack_dct_private([0, -1023, 1023, 0, 0, 0])
    bits = format(int.from_bytes(raw, "big"), "072b")
    assert bits[11:22] == "1" + "1111111111"
    assert bits[22:33] == "0" + "1111111111"
    assert bits[:11] == "0" * 11


def test_dct_fields_exhaustive():
    for v in range(-1023, 1024):
        vals = [v, v, v, v, v, v]
        assert unpack_dct_private(pack_dct_private(vals)) == vals
    # the DC field carries -1024 through the otherwise unused negative-zero pattern
    assert unpack_dct_private(pack_dct_private([-1024, 0, 0, 0, 0, 0]))[0] == -1024


def test_dct_overflow_rejected():
    with pytest.raises(CoefficientRangeError):
        pack_dct_private([0, 1024, 0, 0, 0, 0])
    with pytest.raises(CoefficientRangeError):
        pack_dct_private([1025, 0, 0, 0, 0, 0])


def test_vectorised_dct_rows_match_scalar(rng):
    vals = rng.integers(-1023, 1024, (300, 6))
    vals[0, 0] = -1024
    rows = bitpack.pack_dct_rows(vals)
    for i in range(0, 300, 37):
        assert rows[i].tobytes() == pack_dct_private(vals[i].tolist())
    assert np.array_equal(bitpack.unpack_dct_rows(rows, 6), vals)


def test_join_split_round_trip(rng):
    rows = rng.integers(0, 256, (33, 16), dtype=np.uint8)
    rows[:, 15] &= 0xF0
    stream = bitpack.join_bits(rows, 124)
    assert len(stream) == bitpack.stream_bytes(33, 124) == (33 * 124 + 7) // 8
    assert np.array_equal(bitpack.split_bits(stream, 33, 124), rows)


def test_padding_only_at_stream_end(rng):
    rows = rng.integers(0, 256, (3, 16), dtype=np.uint8)
    rows[:, 15] &= 0xF0
    stream = bitpack.join_bits(rows, 124)
    bits = "".join(format(b, "08b") for b in stream)
    expect = "".join("".join(format(b, "08b") for b in r)[:124] for r in rows)
    assert bits[:372] == expect
    assert bits[372:] == "0000"
