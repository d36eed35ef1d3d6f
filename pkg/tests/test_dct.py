import numpy as np
import pytest

from oracles import naive_dct
from sefrag.dct8 import (
    BASIS,
    DEFAULT_SET,
    SelectedCoeffSet,
    dct8_direct,
    dct8_forward,
    dct8_inverse,
    energy_fraction,
    rebuild_dct_block,
    round_half_away,
    split_dct_block,
    split_dct_blocks,
)
from sefrag.errors import StructuralError
from sefrag.model import blocks_of


def test_basis_values():
    assert np.allclose(BASIS[0], 0.35355, atol=5e-6)
    assert BASIS[1, 0] == pytest.approx(0.49039, abs=5e-6)
    assert BASIS[1, 7] == pytest.approx(-0.49039, abs=5e-6)
    assert BASIS[2, 0] == pytest.approx(0.46194, abs=5e-6)


def test_basis_orthonormal():
    assert np.abs(BASIS @ BASIS.T - np.eye(8)).max() < 1e-9


def test_constant_block_uncentred():
    out = dct8_forward(np.full((8, 8), 37), centered=False)
    assert out[0, 0] == pytest.approx(8 * 37)
    out[0, 0] = 0
    assert np.abs(out).max() < 1e-9


def test_zero_block():
    assert not dct8_forward(np.zeros((8, 8)), centered=False).any()
    assert not dct8_inverse(np.zeros((8, 8))).any()


def test_dc_only_inverse_is_constant():
    y = np.zeros((8, 8))
    y[0, 0] = 8 * 19
    assert np.allclose(dct8_inverse(y), 19)


def test_matrix_product_matches_double_sum(rng):
    for _ in range(20):
        block = rng.integers(0, 256, (8, 8))
        fast = dct8_forward(block, centered=False)
        assert np.abs(fast - np.array(naive_dct(block.tolist()))).max() < 1e-6
        assert np.abs(fast - dct8_direct(block)).max() < 1e-6


def test_inverse_round_trip_1e5(rng):
    blocks = rng.integers(0, 256, (100_000, 8, 8)).astype(np.float64)
    back = dct8_inverse(dct8_forward(blocks, centered=False))
    assert np.abs(back - blocks).max() < 1e-6


def test_round_half_away():
    assert round_half_away(np.array([0.5, -0.5, 1.5, -2.5, 0.49])).tolist() == [1, -1, 2, -3, 0]


@pytest.mark.parametrize("c", [0, 1, 77, 128, 200, 255])
def test_constant_block_split(c):
    private, public = split_dct_block(np.full((8, 8), c, dtype=np.uint8))
    assert private == [8 * (c - 128), 0, 0, 0, 0, 0]
    assert (public == 128).all()
    assert (rebuild_dct_block(private, public) == c).all()


def test_private_range_holds_on_extremes(rng):
    extremes = np.stack([
        np.zeros((8, 8)), np.full((8, 8), 255),
        np.where(np.indices((8, 8)).sum(0) % 2, 255, 0),
        np.where(np.indices((8, 8))[1] < 4, 255, 0),
        np.where(np.indices((8, 8))[0] < 4, 0, 255),
    ]).astype(np.uint8)
    randoms = rng.integers(0, 256, (20_000, 8, 8), dtype=np.uint8)
    for blocks in (extremes, randoms):
        private, _ = split_dct_blocks(blocks)
        assert np.abs(private[:, 0]).max() <= 1024
        assert np.abs(private[:, 1:]).max() <= 1023


def test_selection_validation():
    assert len(DEFAULT_SET) == 6
    assert DEFAULT_SET.positions[:3] == ((0, 0), (0, 1), (1, 0))
    with pytest.raises(StructuralError):
        SelectedCoeffSet(((0, 1),))
    with pytest.raises(StructuralError):
        SelectedCoeffSet(((0, 0), (0, 0)))
    with pytest.raises(StructuralError):
        SelectedCoeffSet(((0, 0), (8, 0)))
    assert SelectedCoeffSet.parse("0,0; 3,3").positions == ((0, 0), (3, 3))


def test_energy_concentration_on_natural_images():
    data = pytest.importorskip("skimage.data")
    for name in ("camera", "moon", "coins"):
        img = getattr(data, name)()
        h, w = img.shape[0] // 8 * 8, img.shape[1] // 8 * 8
        assert energy_fraction(blocks_of(img[:h, :w])) >= 0.90, name
