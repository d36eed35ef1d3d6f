"""Statistical battery for protected fragments.

All byte metrics take ``bytes`` or uint8 arrays. Image metrics take 2-D
uint8 arrays of equal shape. Correlation statistics use 1/N normalisation
throughout.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import ndimage, stats

from .errors import StructuralError, UndefinedCorrelationError

DEFAULT_PAIRS = 4096
SSIM_WINDOW = 8
SSIM_K1, SSIM_K2, SSIM_L = 0.01, 0.03, 255.0
DIRECTIONS = {"h": (0, 1), "v": (1, 0), "d": (1, 1)}


def _u8(data) -> np.ndarray:
    if isinstance(data, (bytes, bytearray, memoryview)):
        return np.frombuffer(data, dtype=np.uint8)
    arr = np.asarray(data)
    if arr.dtype != np.uint8:
        raise StructuralError("expected 8-bit data")
    return arr


def _same_size(a: np.ndarray, b: np.ndarray) -> None:
    if a.size != b.size:
        raise StructuralError(f"inputs differ in size ({a.size} vs {b.size})")


def histogram(data) -> np.ndarray:
    return np.bincount(_u8(data).ravel(), minlength=256)


def pdf(data) -> np.ndarray:
    arr = _u8(data)
    if arr.size == 0:
        raise StructuralError("empty input")
    return histogram(arr) / arr.size


def _entropy_of_counts(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum()) + 0.0


def entropy(data) -> float:
    """Shannon entropy in bits per byte."""
    arr = _u8(data)
    if arr.size == 0:
        raise StructuralError("entropy of empty input")
    return _entropy_of_counts(histogram(arr))


def correlation(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size or x.size < 2:
        raise StructuralError("correlation needs two equal-length sequences of at least 2 values")
    dx, dy = x - x.mean(), y - y.mean()
    vx, vy = (dx * dx).mean(), (dy * dy).mean()
    if vx == 0 or vy == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant sequence")
    return float((dx * dy).mean() / math.sqrt(vx * vy))


def adjacent_pairs(image: np.ndarray, direction: str, n_pairs: int = DEFAULT_PAIRS,
                   seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    img = np.asarray(image)
    if img.ndim != 2:
        raise StructuralError("adjacent correlation needs a 2-D image")
    dr, dc = DIRECTIONS[direction]
    rows, cols = img.shape[0] - dr, img.shape[1] - dc
    if rows <= 0 or cols <= 0 or rows * cols < n_pairs:
        raise StructuralError(f"image {img.shape} too small for {n_pairs} {direction}-pairs")
    rng = np.random.default_rng(seed)
    flat = rng.choice(rows * cols, size=n_pairs, replace=False)
    r, c = flat // cols, flat % cols
    return img[r, c], img[r + dr, c + dc]


def adjacent_correlation(image: np.ndarray, direction: str, n_pairs: int = DEFAULT_PAIRS, seed: int = 0) -> float:
    """Correlation of randomly sampled neighbouring pixel pairs (``h``, ``v`` or ``d``)."""
    return correlation(*adjacent_pairs(image, direction, n_pairs, seed))


def bit_difference(a, b) -> float:
    """Percentage of differing bits."""
    x, y = _u8(a).ravel(), _u8(b).ravel()
    _same_size(x, y)
    if x.size == 0:
        raise StructuralError("bit difference of empty inputs")
    return float(np.unpackbits(x ^ y).sum()) * 100.0 / (8 * x.size)


def joint_histogram(a, b) -> np.ndarray:
    x, y = _u8(a).ravel(), _u8(b).ravel()
    _same_size(x, y)
    return np.bincount(x.astype(np.int64) * 256 + y, minlength=65536).reshape(256, 256)


def mutual_information(a, b) -> float:
    joint = joint_histogram(a, b).astype(np.float64)
    n = joint.sum()
    if n == 0:
        raise StructuralError("mutual information of empty inputs")
    pxy = joint / n
    px, py = pxy.sum(axis=1), pxy.sum(axis=0)
    nz = pxy > 0
    return float((pxy[nz] * np.log2(pxy[nz] / np.outer(px, py)[nz])).sum())


def nmi(a, b) -> float:
    """``I(A;B) / sqrt(H(A) H(B))``; 1.0 for identical inputs, 0.0 if either side is constant."""
    x, y = _u8(a).ravel(), _u8(b).ravel()
    _same_size(x, y)
    ha, hb = entropy(x), entropy(y)
    if ha == 0 or hb == 0:
        return 1.0 if np.array_equal(x, y) else 0.0
    return mutual_information(x, y) / math.sqrt(ha * hb)


def psnr(a, b, peak: float = 255.0) -> float:
    """PSNR in dB; ``math.inf`` marks identical inputs."""
    x, y = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise StructuralError(f"PSNR inputs differ in shape {x.shape} vs {y.shape}")
    mse = float(((x - y) ** 2).mean())
    return math.inf if mse == 0 else 10.0 * math.log10(peak * peak / mse)


def ssim(a, b, window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over every ``window x window`` patch (uniform weights, population moments)."""
    x, y = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise StructuralError("SSIM needs two 2-D images of equal shape")
    if min(x.shape) < window:
        raise StructuralError(f"image smaller than the {window}x{window} window")
    c1, c2 = (SSIM_K1 * SSIM_L) ** 2, (SSIM_K2 * SSIM_L) ** 2

    def local_mean(z: np.ndarray) -> np.ndarray:
        m = ndimage.uniform_filter(z, size=window, mode="constant", origin=(-(window // 2), -(window // 2)))
        return m[: x.shape[0] - window + 1, : x.shape[1] - window + 1]

    mx, my = local_mean(x), local_mean(y)
    vx = local_mean(x * x) - mx * mx
    vy = local_mean(y * y) - my * my
    cxy = local_mean(x * y) - mx * my
    s = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(s.mean())


@dataclass(frozen=True)
class ChiSquare:
    statistic: float
    p_value: float
    alpha: float

    @property
    def uniform(self) -> bool:
        return self.p_value >= self.alpha


def chi_square_uniformity(data, alpha: float = 0.01) -> ChiSquare:
    counts = histogram(data).astype(np.float64)
    n = counts.sum()
    if n == 0:
        raise StructuralError("chi-square of empty input")
    expected = n / 256.0
    stat = float(((counts - expected) ** 2 / expected).sum())
    return ChiSquare(stat, float(stats.chi2.sf(stat, 255)), alpha)


# -- reports -----------------------------------------------------------------------

@dataclass
class AnalysisConfig:
    n_pairs: int = DEFAULT_PAIRS
    seed: int = 0
    alpha: float = 0.01


@dataclass
class AnalysisReport:
    entropy: float
    rho_h: float
    rho_v: float
    rho_d: float
    rho: float
    rho2: float
    dif_percent: float
    nmi: float
    chi2: float
    chi2_p: float
    ks_percent: float | None = None
    psnr: float | None = None
    ssim: float | None = None
    pdf: list[float] = field(default_factory=list, repr=False)

    def metrics(self) -> dict[str, float]:
        out = {k: v for k, v in asdict(self).items() if k != "pdf" and v is not None}
        return out

    def to_text(self) -> str:
        lines = [f"{k:<12} {_fmt(v)}" for k, v in self.metrics().items()]
        if self.ssim is not None:
            lines.append(f"# ssim window {SSIM_WINDOW}x{SSIM_WINDOW} uniform, K1={SSIM_K1}, K2={SSIM_K2}, L={SSIM_L:g}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])
        for k, v in self.metrics().items():
            w.writerow([k, _fmt(v)])
        return buf.getvalue()


def _fmt(v: float) -> str:
    return "inf" if v == math.inf else f"{v:.6f}"


def _safe_corr(fn: Callable[[], float]) -> float:
    try:
        return fn()
    except UndefinedCorrelationError:
        return math.nan


def run_battery(original: np.ndarray, protected: np.ndarray, config: AnalysisConfig | None = None,
                is_image: bool = False, ks_reference: np.ndarray | None = None) -> AnalysisReport:
    """Compare an original 2-D byte matrix with the protected view of the same shape.

    ``ks_reference`` is the protected view under a key differing in one bit;
    when given, key sensitivity is reported. PSNR/SSIM are computed for images only.
    """
    cfg = config or AnalysisConfig()
    orig, prot = np.asarray(original, dtype=np.uint8), np.asarray(protected, dtype=np.uint8)
    if orig.shape != prot.shape:
        raise StructuralError(f"original {orig.shape} and protected {prot.shape} differ in shape")
    rho = _safe_corr(lambda: correlation(orig, prot))
    adj = {d: _safe_corr(lambda d=d: adjacent_correlation(prot, d, cfg.n_pairs, cfg.seed)) for d in DIRECTIONS}
    chi = chi_square_uniformity(prot, cfg.alpha)
    return AnalysisReport(
        entropy=entropy(prot), rho_h=adj["h"], rho_v=adj["v"], rho_d=adj["d"], rho=rho, rho2=rho * rho,
        dif_percent=bit_difference(orig, prot), nmi=nmi(orig, prot), chi2=chi.statistic, chi2_p=chi.p_value,
        ks_percent=None if ks_reference is None else bit_difference(prot, ks_reference),
        psnr=psnr(orig, prot) if is_image else None, ssim=ssim(orig, prot) if is_image else None,
        pdf=pdf(prot).tolist(),
    )


@dataclass(frozen=True)
class TrialStats:
    min: float
    mean: float
    max: float
    std: float
    n: int

    @classmethod
    def of(cls, values: Iterable[float]) -> "TrialStats":
        v = np.asarray(list(values), dtype=np.float64)
        if v.size == 0:
            raise StructuralError("no trials")
        return cls(float(v.min()), float(v.mean()), float(v.max()), float(v.std(ddof=1)) if v.size > 1 else 0.0,
                   int(v.size))


def summarize(reports: Sequence[AnalysisReport]) -> dict[str, TrialStats]:
    keys = reports[0].metrics().keys()
    return {k: TrialStats.of(r.metrics()[k] for r in reports) for k in keys}


def summary_csv(summary: dict[str, TrialStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "min", "mean", "max", "std", "trials"])
    for k, s in summary.items():
        w.writerow([k, _fmt(s.min), _fmt(s.mean), _fmt(s.max), _fmt(s.std), s.n])
    return buf.getvalue()
