"""Throughput benchmarks: end-to-end protection against plain AES-128 on the
same bytes, per-stage isolation, and compiled vs. fallback kernels."""
from __future__ import annotations

import csv
import hashlib
import io
import os
import platform
import statistics
import time
from dataclasses import asdict, dataclass
from types import ModuleType
from typing import Callable, Sequence

import numpy as np

from . import backend as backends
from .cipher import encrypt_stream
from .dct8 import split_dct_blocks
from .errors import StructuralError
from .model import BENCHMARK_SIDES, SchemeId, SecretKey
from .pipeline import STAGES, ProtectJob, StageTimings, protect_file

MB = 1e6
STAGE_NAMES = ("dwt", "dct", "pack", "sha256", "sha512", "aes")


def hardware() -> dict[str, str | int]:
    model = platform.processor() or platform.machine()
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("model name"):
                    model = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return {"cpu": model, "logical_cpus": os.cpu_count() or 1, "python": platform.python_version()}


@dataclass
class BenchResult:
    scheme: str
    input_bytes: int
    chunk_side: int
    workers: int
    backend: str
    transform_s: float
    pack_s: float
    mask_s: float
    cipher_s: float
    wall_s: float
    se_mb_s: float
    aes_mb_s: float
    repetitions: int
    cpu: str

    @property
    def stage_sum(self) -> float:
        return self.transform_s + self.pack_s + self.mask_s + self.cipher_s


def _data(nbytes: int, seed: int) -> bytes:
    return np.random.default_rng(seed).integers(0, 256, nbytes, dtype=np.uint8).tobytes()


def _median_time(fn: Callable[[], object], repetitions: int, warmup: int) -> float:
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repetitions):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def aes_baseline(data: bytes, key: SecretKey, repetitions: int = 3, warmup: int = 1) -> float:
    """AES-128-CTR over the whole input, in MB/s."""
    wall = _median_time(lambda: encrypt_stream(key, 0, data), repetitions, warmup)
    return len(data) / wall / MB


def bench_protect(schemes: Sequence[SchemeId] = (SchemeId.DWT2_L2,), sizes: Sequence[int] = (1024 * 1024,),
                  workers: Sequence[int] = (1,), repetitions: int = 3, warmup: int = 1,
                  chunk_side: int = 1024, kernels: ModuleType | None = None, seed: int = 0) -> list[BenchResult]:
    """Median end-to-end protect timings with their stage breakdown."""
    kern = kernels or backends.kernels
    key = SecretKey(hashlib.sha256(b"bench" + seed.to_bytes(8, "big")).digest()[:16])
    cpu = str(hardware()["cpu"])
    out = []
    for size in sizes:
        if size < 1:
            raise StructuralError("benchmark input must be at least one byte")
        data = _data(size, seed)
        aes = aes_baseline(data, key, repetitions, warmup)
        for scheme in schemes:
            for w in workers:
                job = ProtectJob(scheme, key, chunk_side=chunk_side, workers=w, kernels=kern)
                for _ in range(warmup):
                    protect_file(job, data)
                runs = []
                for _ in range(repetitions):
                    t = StageTimings()
                    protect_file(job, data, t)
                    runs.append(t)
                runs.sort(key=lambda t: t.wall)
                mid = runs[len(runs) // 2]
                st = mid.stage_seconds()
                out.append(BenchResult(
                    scheme.cli_name, size, chunk_side, w, kern.NAME, st["transform"], st["pack"], st["mask"],
                    st["cipher"], mid.wall, size / mid.wall / MB, aes, repetitions, cpu,
                ))
    return out


def bench_stage(stage: str, size: int, repetitions: int = 3, warmup: int = 1,
                kernels: ModuleType | None = None) -> float:
    """Throughput of one isolated stage in MB/s of input bytes."""
    if size <= 0:
        raise StructuralError("stage benchmark needs a positive input size")
    if stage not in STAGE_NAMES:
        raise StructuralError(f"unknown stage {stage!r}; choose from {', '.join(STAGE_NAMES)}")
    kern = kernels or backends.kernels
    nblocks = max(1, size // 64)
    size = nblocks * 64
    blocks = np.random.default_rng(1).integers(0, 256, (nblocks, 8, 8), dtype=np.uint8)
    key = SecretKey(bytes(range(16)))
    if stage == "dwt":
        fn = lambda: kern.forward_blocks(blocks)  # noqa: E731
    elif stage == "dct":
        fn = lambda: split_dct_blocks(blocks)  # noqa: E731
    elif stage == "pack":
        coeffs = kern.forward_blocks(blocks)
        fn = lambda: kern.pack_dwt(coeffs)  # noqa: E731
    elif stage == "aes":
        raw = blocks.tobytes()
        fn = lambda: encrypt_stream(key, 0, raw)  # noqa: E731
    else:
        # one framed digest per block: tag, key, 16-byte address, then the hashed fragment
        algo = hashlib.sha256 if stage == "sha256" else hashlib.sha512
        payload = 5 if stage == "sha256" else 16
        raw = blocks.reshape(nblocks, 64)[:, :payload].tobytes()
        head = algo(b"\x01" + key.bytes)

        def fn():
            for i in range(nblocks):
                h = head.copy()
                h.update(i.to_bytes(16, "big") + raw[i * payload:(i + 1) * payload])
                h.digest()
    return size / _median_time(fn, repetitions, warmup) / MB


def compare_backends(size: int = 4 * 1024 * 1024, scheme: SchemeId = SchemeId.DWT2_L2,
                     repetitions: int = 3) -> dict[str, float]:
    """End-to-end single-worker MB/s for every importable kernel backend."""
    return {
        name: bench_protect((scheme,), (size,), (1,), repetitions, 1, kernels=mod)[0].se_mb_s
        for name, mod in backends.available().items()
    }


def speedup(size: int = 64 * 1024 * 1024, workers: int = 4, repetitions: int = 3,
            scheme: SchemeId = SchemeId.DWT2_L2) -> tuple[float, float, float]:
    """Return (single-worker MB/s, n-worker MB/s, ratio)."""
    res = bench_protect((scheme,), (size,), (1, workers), repetitions, 1)
    return res[0].se_mb_s, res[1].se_mb_s, res[1].se_mb_s / res[0].se_mb_s


CSV_COLUMNS = ("scheme", "input_side", "input_bytes", "workers", "backend", "transform_s", "pack_s", "mask_s",
               "cipher_s", "wall_s", "se_mb_s", "aes_mb_s", "cpu")


def results_csv(results: Sequence[BenchResult]) -> str:
    """Stage-breakdown table, one row per (scheme, size, workers)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        side = int(round(r.input_bytes ** 0.5))
        side_label = f"{side}x{side}" if side * side == r.input_bytes else ""
        w.writerow([r.scheme, side_label, r.input_bytes, r.workers, r.backend, f"{r.transform_s:.4f}",
                    f"{r.pack_s:.4f}", f"{r.mask_s:.4f}", f"{r.cipher_s:.4f}", f"{r.wall_s:.4f}",
                    f"{r.se_mb_s:.2f}", f"{r.aes_mb_s:.2f}", r.cpu])
    return buf.getvalue()


def ladder_sizes(sides: Sequence[int] = BENCHMARK_SIDES) -> list[int]:
    return [s * s for s in sides]


def results_text(results: Sequence[BenchResult]) -> str:
    hw = hardware()
    lines = [f"# cpu: {hw['cpu']} ({hw['logical_cpus']} logical)", "# SE throughput is end-to-end wall time"]
    for r in results:
        d = asdict(r)
        lines.append(
            f"{d['scheme']:<5} {r.input_bytes:>11} B  w={r.workers} [{r.backend}]  "
            f"transform {r.transform_s:.3f}s  pack {r.pack_s:.3f}s  mask {r.mask_s:.3f}s  cipher {r.cipher_s:.3f}s  "
            f"wall {r.wall_s:.3f}s  SE {r.se_mb_s:.1f} MB/s  AES {r.aes_mb_s:.1f} MB/s"
        )
    return "\n".join(lines) + "\n"
