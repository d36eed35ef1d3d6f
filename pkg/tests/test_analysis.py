import math

import numpy as np
import pytest

from oracles import (
    naive_bit_difference,
    naive_chi_square,
    naive_correlation,
    naive_entropy,
    naive_nmi,
    naive_psnr,
    naive_ssim,
)
from sefrag.analysis import (
    AnalysisConfig,
    TrialStats,
    adjacent_pairs,
    bit_difference,
    chi_square_uniformity,
    correlation,
    entropy,
    nmi,
    pdf,
    psnr,
    run_battery,
    ssim,
    summarize,
    summary_csv,
)
from sefrag.errors import StructuralError, UndefinedCorrelationError

TOL = 1e-9


@pytest.fixture
def kib(rng):
    a = rng.integers(0, 256, 1024, dtype=np.uint8)
    b = (a.astype(int) * 3 + rng.integers(0, 40, 1024)).astype(np.uint8)
    return a, b


def test_entropy_matches_oracle(kib):
    for x in kib:
        assert abs(entropy(x) - naive_entropy(x.tolist())) < TOL


def test_correlation_matches_oracle(kib):
    a, b = kib
    assert abs(correlation(a, b) - naive_correlation(a.tolist(), b.tolist())) < TOL


def test_bit_difference_matches_oracle(kib):
    a, b = kib
    assert abs(bit_difference(a, b) - naive_bit_difference(a.tolist(), b.tolist())) < TOL


def test_nmi_matches_oracle(kib):
    a, b = kib
    assert abs(nmi(a, b) - naive_nmi(a.tolist(), b.tolist())) < TOL


def test_psnr_ssim_match_oracles(kib):
    a, b = (x.reshape(32, 32) for x in kib)
    assert abs(psnr(a, b) - naive_psnr(a, b)) < TOL
    assert abs(ssim(a, b) - naive_ssim(a, b)) < TOL


def test_chi_square_matches_oracle(kib):
    a, _ = kib
    assert abs(chi_square_uniformity(a).statistic - naive_chi_square(a.tolist())) < TOL


def test_trivial_values():
    assert entropy(bytes(2**20)) == 0.0
    assert entropy(bytes(range(256)) * 16) == pytest.approx(8.0)
    x = np.arange(100)
    assert correlation(x, 2 * x + 1) == pytest.approx(1.0)
    assert correlation(x, -x) == pytest.approx(-1.0)
    assert bit_difference(b"\x00" * 4, b"\xff" * 4) == 100.0
    assert bit_difference(b"abc", b"abc") == 0.0
    assert nmi(x.astype(np.uint8), x.astype(np.uint8)) == pytest.approx(1.0)
    assert psnr(np.zeros((8, 8)), np.zeros((8, 8))) == math.inf
    img = np.arange(256, dtype=np.uint8).reshape(16, 16)
    assert ssim(img, img) == pytest.approx(1.0)


def test_pdf_sums_to_one(kib):
    assert pdf(kib[0]).sum() == pytest.approx(1.0)


def test_constant_correlation_is_undefined():
    with pytest.raises(UndefinedCorrelationError):
        correlation(np.ones(10), np.arange(10))


def test_empty_inputs_rejected():
    with pytest.raises(StructuralError):
        entropy(b"")
    with pytest.raises(StructuralError):
        bit_difference(b"", b"")


def test_adjacent_pairs_are_neighbours_and_unique(rng):
    img = rng.integers(0, 256, (64, 64), dtype=np.uint8)
    a, b = adjacent_pairs(img, "d", n_pairs=500, seed=4)
    assert len(a) == 500
    ia, ib = adjacent_pairs(np.arange(64 * 64).reshape(64, 64), "d", n_pairs=500, seed=4)
    assert (ib - ia == 65).all() and len(set(ia.tolist())) == 500
    with pytest.raises(StructuralError):
        adjacent_pairs(img, "h", n_pairs=10**6)


def test_uniform_noise_passes_chi_square(rng):
    assert chi_square_uniformity(rng.bytes(2**20)).uniform
    assert not chi_square_uniformity(bytes(2**16)).uniform


def test_battery_and_summary(rng):
    orig = rng.integers(0, 256, (128, 128), dtype=np.uint8)
    prot = rng.integers(0, 256, (128, 128), dtype=np.uint8)
    reports = [run_battery(orig, prot, AnalysisConfig(n_pairs=1000, seed=s), is_image=True) for s in range(3)]
    r = reports[0]
    assert r.entropy > 7.98 and abs(r.rho) < 0.05 and 48 < r.dif_percent < 52
    assert r.psnr is not None and r.ks_percent is None
    assert "entropy" in r.to_text()
    s = summarize(reports)
    assert s["entropy"].n == 3 and s["entropy"].std == 0.0
    assert summary_csv(s).startswith("metric,min,mean,max,std,trials\n")
    with pytest.raises(StructuralError):
        TrialStats.of([])
