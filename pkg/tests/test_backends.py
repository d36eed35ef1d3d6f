import numpy as np
import pytest

from sefrag import backend
from sefrag.dwt53 import dwt2_two_level_forward
from sefrag.errors import CoefficientRangeError
from sefrag.model import BlockAddress, SecretKey
from sefrag.protect_dwt import protect_block

BACKENDS = backend.available()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")


@pytest.fixture
def blocks(rng):
    b = rng.integers(0, 256, (600, 8, 8), dtype=np.uint8)
    b[:40] = 0
    b[40:80] = 255
    b[80:120] = (np.indices((8, 8)).sum(0) % 2 * 255)[None]
    return b


def test_select_respects_environment(monkeypatch):
    monkeypatch.setenv("SEFRAG_BACKEND", "python")
    assert backend.select().NAME == "python"
    with pytest.raises(ImportError):
        backend.select("fortran")


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_backend_matches_reference_blocks(name, blocks, key):
    k = BACKENDS[name]
    coeffs = k.forward_blocks(blocks)
    for i in (0, 45, 100, 333):
        assert np.array_equal(coeffs[i], dwt2_two_level_forward(blocks[i]))
    pixels, bad = k.inverse_blocks(coeffs)
    assert np.array_equal(pixels, blocks) and not bad.any()
    a, b, c = k.pack_dwt(coeffs)
    assert np.array_equal(k.unpack_dwt(a, b, c), coeffs)
    b2, c2 = b.copy(), c.copy()
    check = k.mask_dwt(key.bytes, 9, 20, a, b2, c2)
    for i in (0, 45, 599):
        ref = protect_block(key, BlockAddress(9, i // 20, i % 20), coeffs[i])
        assert ref.frag_b_masked == b2[i].tobytes()
        assert ref.frag_c_masked == c2[i].tobytes()
    b2[7, 3] ^= 4
    flagged = k.unmask_dwt(key.bytes, 9, 20, a, b2, c2, check)
    assert flagged.nonzero()[0].tolist() == [7]
    assert np.array_equal(c2[8:], c[8:])


@needs_both
def test_backends_bit_identical(blocks, rng):
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    key = SecretKey(rng.bytes(16)).bytes
    cp, cc = py.forward_blocks(blocks), cy.forward_blocks(blocks)
    assert np.array_equal(cp, cc)
    packs = [m.pack_dwt(cp) for m in (py, cy)]
    for x, y in zip(*packs):
        assert np.array_equal(x, y)
    outs = []
    for m in (py, cy):
        a, b, c = (x.copy() for x in packs[0])
        outs.append((m.mask_dwt(key, 1, 8, a, b, c), b, c))
    for x, y in zip(*outs):
        assert np.array_equal(x, y)
    priv = rng.integers(0, 256, (600, 9), dtype=np.uint8)
    pub = rng.integers(0, 256, (600, 64), dtype=np.uint8)
    dct = []
    for m in (py, cy):
        p = pub.copy()
        dct.append((m.mask_dct(key, 2, 8, priv, p, True), p))
    for x, y in zip(*dct):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_pack_overflow_names_block(name):
    c = np.zeros((3, 8, 8), dtype=np.int16)
    c[2, 6, 1] = 600
    with pytest.raises(CoefficientRangeError) as err:
        BACKENDS[name].pack_dwt(c)
    assert err.value.position == (2, 6, 1)
