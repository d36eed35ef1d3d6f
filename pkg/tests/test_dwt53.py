import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_lift_forward
from sefrag import dwt53
from sefrag.dwt53 import (
    RANGE_TABLE,
    LiftingSignal,
    composed_level2_weights,
    derive_range_table,
    dwt2_level,
    dwt2_two_level_forward,
    dwt2_two_level_inverse,
    lift_forward_1d,
    lift_inverse_1d,
)
from sefrag.errors import CoefficientRangeError, StructuralError


def test_constant_signal_has_zero_detail():
    assert lift_forward_1d([5] * 8) == LiftingSignal((5, 5, 5, 5), (0, 0, 0, 0))


def test_ramp_signal():
    ls = lift_forward_1d(range(8))
    assert ls == LiftingSignal((0, 2, 4, 6), (0, 0, 0, 1))
    assert (list(ls.s), list(ls.d)) == naive_lift_forward(list(range(8)))


def test_inverse_examples():
    assert lift_inverse_1d(LiftingSignal((5, 5, 5, 5), (0, 0, 0, 0))) == [5] * 8
    assert lift_inverse_1d(LiftingSignal((0, 2, 4, 6), (0, 0, 0, 1))) == list(range(8))


def test_odd_length_rejected():
    with pytest.raises(StructuralError):
        lift_forward_1d([1, 2, 3])


def test_half_length_mismatch_rejected():
    with pytest.raises(StructuralError):
        LiftingSignal((1, 2), (3,))


def test_headroom_guard():
    with pytest.raises(CoefficientRangeError):
        lift_forward_1d([2**21, 0])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(-(2**16), 2**16), min_size=1, max_size=16).map(lambda v: v + v[-1:] if len(v) % 2 else v))
def test_lifting_matches_oracle_and_inverts(x):
    ls = lift_forward_1d(x)
    assert (list(ls.s), list(ls.d)) == naive_lift_forward(x)
    assert lift_inverse_1d(ls) == x


def test_vectorised_lifting_round_trip_1e6(rng):
    x = rng.integers(-512, 512, (10**6 // 8, 8))
    y = dwt53._fwd_last(x)
    assert np.array_equal(dwt53._inv_last(y), x)


def test_two_sample_signals_exhaustive():
    a, b = np.meshgrid(np.arange(-512, 512), np.arange(-512, 512), indexing="ij")
    x = np.stack([a.ravel(), b.ravel()], axis=1)
    assert np.array_equal(dwt53._inv_last(dwt53._fwd_last(x)), x)
    for pair in ([-512, 511], [511, -512], [0, 0], [7, -3]):
        assert lift_inverse_1d(lift_forward_1d(pair)) == pair


def test_level_zero_and_constant():
    assert not dwt2_level(np.zeros((8, 8), dtype=np.int64)).any()
    out = dwt2_level(np.full((8, 8), 37, dtype=np.int64))
    assert (out[:4, :4] == 37).all()
    assert not out[:4, 4:].any() and not out[4:, :].any()


def test_level_rejects_bad_size():
    with pytest.raises(StructuralError):
        dwt2_level(np.zeros((6, 6), dtype=np.int64))


def test_checkerboard_drives_hh_to_its_bound():
    i, j = np.indices((8, 8))
    board = np.where((i + j) % 2, 127, -128)
    hh = dwt2_level(board)[4:, 4:]
    assert np.abs(hh).max() <= 511
    assert np.abs(hh).max() >= 500


def test_all_128_gives_zero_coefficients():
    assert not dwt2_two_level_forward(np.full((8, 8), 128, dtype=np.uint8)).any()


def test_zero_coefficients_give_all_128():
    assert (dwt2_two_level_inverse(np.zeros((8, 8), dtype=np.int64)) == 128).all()


@pytest.mark.parametrize("block", [
    np.zeros((8, 8), dtype=np.uint8),
    np.full((8, 8), 255, dtype=np.uint8),
    np.where(np.indices((8, 8)).sum(0) % 2, 255, 0).astype(np.uint8),
    np.arange(64, dtype=np.uint8).reshape(8, 8) * 4,
])
def test_extreme_blocks_round_trip(block):
    assert np.array_equal(dwt2_two_level_inverse(dwt2_two_level_forward(block)), block)


def test_random_blocks_round_trip_1e6(rng):
    blocks = rng.integers(0, 256, (10**6, 8, 8), dtype=np.uint8)
    for start in range(0, len(blocks), 250_000):
        part = blocks[start:start + 250_000]
        coeffs = dwt53.forward_blocks(part)
        assert not RANGE_TABLE.violations(coeffs).any()
        pixels, bad = dwt53.inverse_blocks(coeffs)
        assert not bad.any()
        assert np.array_equal(pixels, part)


def test_inverse_rejects_out_of_range():
    c = np.zeros((8, 8), dtype=np.int64)
    c[3, 3] = 700
    with pytest.raises(CoefficientRangeError):
        dwt2_two_level_inverse(c)


def test_linearity_up_to_rounding(rng):
    a = rng.integers(-64, 64, (2000, 8, 8))
    b = rng.integers(-64, 64, (2000, 8, 8))

    def fwd(x):
        return np.stack([dwt2_level(v) for v in x])

    gap = np.abs(fwd(a + b) - fwd(a) - fwd(b))
    # floor interactions stay within 2 for nearly every coefficient; the column-detail bands never exceed it
    assert np.mean(gap <= 2) >= 0.999
    assert gap[:, :, 4:].max() <= 2
    assert gap.mean() < 1


# -- range table -----------------------------------------------------------------

REFERENCE_TABLE = (
    (338, 267, 468, 468),
    (267, 211, 369, 369),
    (468, 369, 648, 648),
    (468, 369, 648, 648),
)


def test_range_table_reproduces_reference_matrix():
    assert derive_range_table().level2 == REFERENCE_TABLE
    assert RANGE_TABLE.level2 == REFERENCE_TABLE


def test_range_table_spot_values():
    t = derive_range_table().as_matrix()
    assert t[3, 3] == 648
    assert t[0, 0] == 338
    assert t[1, 1] == 211


def test_exact_range_table_is_tighter():
    # frozen from composing the exact 4-point lifting matrix with the 8-point one
    exact = derive_range_table(exact=True).level2
    assert exact == (
        (338, 260, 468, 468),
        (260, 200, 360, 360),
        (468, 360, 648, 648),
        (468, 360, 648, 648),
    )
    assert (np.array(exact) <= np.array(REFERENCE_TABLE)).all()


def test_hh2_corner_weights():
    w = composed_level2_weights()[3, 3]
    expected = {
        (2, 2): 0.015625, (2, 3): -0.03125, (2, 4): -0.109375, (2, 6): 0.09375, (2, 7): 0.03125,
        (3, 2): -0.03125, (3, 3): 0.0625, (3, 4): 0.21875, (3, 6): -0.1875, (3, 7): -0.0625,
        (4, 2): -0.109375, (4, 3): 0.21875, (4, 4): 0.765625, (4, 6): -0.65625, (4, 7): -0.21875,
        (6, 2): 0.09375, (6, 3): -0.1875, (6, 4): -0.65625, (6, 6): 0.5625, (6, 7): 0.1875,
        (7, 2): 0.03125, (7, 3): -0.0625, (7, 4): -0.21875, (7, 6): 0.1875, (7, 7): 0.0625,
    }
    nonzero = {(i, j): w[i, j] for i in range(8) for j in range(8) if abs(w[i, j]) > 1e-12}
    assert nonzero.keys() == expected.keys()
    for pos, v in expected.items():
        assert nonzero[pos] == pytest.approx(v, abs=1e-12)
    assert 128 * np.abs(w).sum() == pytest.approx(648)


def test_level1_band_bounds_hold_empirically(rng):
    blocks = rng.integers(0, 256, (200_000, 8, 8), dtype=np.uint8)
    c = dwt53.forward_blocks(blocks).astype(np.int64)
    slack = 2
    assert np.abs(c[:, :4, 4:]).max() <= 384 + slack
    assert np.abs(c[:, 4:, :4]).max() <= 384 + slack
    assert np.abs(c[:, 4:, 4:]).max() <= 511 + slack
    x = blocks.astype(np.int64) - 128
    rows = dwt53._fwd_last(x)
    assert np.abs(rows[..., :4]).max() <= 192 + slack
    assert np.abs(rows[..., 4:]).max() <= 255 + slack
