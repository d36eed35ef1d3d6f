"""Chunked protect/restore orchestration.

Inputs are cut into square chunks (raw bytes) or taken one plane per chunk
(bitmaps). Each chunk runs transform -> pack -> mask -> cipher on one worker;
results are merged strictly in chunk order, so the output never depends on
the worker count. At most ``workers + 1`` chunks are in flight.
"""
from __future__ import annotations

import io
import os
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import ModuleType
from typing import BinaryIO, Callable, Iterable, Iterator, Sequence

import numpy as np

from . import bitpack
from .backend import kernels as default_kernels
from .cipher import CipherSuiteId, NonceGuard, decrypt_stream, encrypt_stream
from .container import ChunkGeometry, ContainerHeader, PayloadKind, ProtectedContainer
from .dct8 import DEFAULT_SET, SelectedCoeffSet, rebuild_dct_blocks, split_dct_blocks
from .dwt53 import RANGE_TABLE
from .errors import AvailabilityError, StorageIOError, StructuralError
from .model import BLOCK, DEFAULT_CHUNK_SIDE, BlockAddress, SchemeId, SecretKey, blocks_of, stitch_blocks
from .protect_dct import pad_plane

STAGES = ("transform", "pack", "mask", "cipher")

Progress = Callable[[int, int], None]


@dataclass
class StageTimings:
    """Busy time per stage summed over workers, plus end-to-end wall time."""

    busy: dict[str, float] = field(default_factory=lambda: {s: 0.0 for s in STAGES})
    wall: float = 0.0
    workers: int = 1
    chunks: int = 0
    input_bytes: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, stage: str, seconds: float) -> None:
        with self._lock:
            self.busy[stage] += seconds

    def stage_seconds(self) -> dict[str, float]:
        """Busy time divided by the worker count: the share of wall time a stage occupies."""
        return {s: t / self.workers for s, t in self.busy.items()}

    def throughput(self) -> float:
        return self.input_bytes / self.wall / 1e6 if self.wall > 0 else float("nan")


class _Clock:
    def __init__(self, timings: StageTimings | None):
        self.timings = timings
        self.t = time.perf_counter()

    def lap(self, stage: str) -> None:
        now = time.perf_counter()
        if self.timings is not None:
            self.timings.add(stage, now - self.t)
        self.t = now


@dataclass
class ProtectJob:
    scheme: SchemeId
    key: SecretKey
    chunk_side: int = DEFAULT_CHUNK_SIDE
    workers: int = 1
    selection: SelectedCoeffSet = DEFAULT_SET
    cipher: int = CipherSuiteId.AES128_CTR
    kernels: ModuleType | None = None
    progress: Progress | None = None

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise StructuralError("worker count must be at least 1")
        if self.chunk_side <= 0 or self.chunk_side % BLOCK:
            raise StructuralError(f"chunk side {self.chunk_side} is not a positive multiple of 8")
        if not isinstance(self.key, SecretKey):
            raise StructuralError("job key must be a SecretKey")

    @property
    def kern(self) -> ModuleType:
        return self.kernels or default_kernels


@dataclass
class RestoreResult:
    data: bytes
    corrupt_blocks: list[BlockAddress]
    header: ContainerHeader
    planes: list[np.ndarray] | None = None

    @property
    def clean(self) -> bool:
        return not self.corrupt_blocks


# -- ordered parallel map ------------------------------------------------------

def _ordered_map(fn: Callable, items: Iterable, workers: int, total: int, progress: Progress | None) -> Iterator:
    done = 0
    if workers == 1:
        for item in items:
            yield fn(item)
            done += 1
            if progress:
                progress(done, total)
        return
    window: deque = deque()
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="sefrag") as pool:
        for item in items:
            window.append(pool.submit(fn, item))
            if len(window) > workers:
                yield window.popleft().result()
                done += 1
                if progress:
                    progress(done, total)
        while window:
            yield window.popleft().result()
            done += 1
            if progress:
                progress(done, total)


# -- per-chunk kernels ---------------------------------------------------------

def _protect_chunk(job: ProtectJob, header: ContainerHeader, guard: NonceGuard, timings: StageTimings | None,
                   index: int, matrix: np.ndarray) -> dict[str, bytes]:
    kern, key = job.kern, job.key
    bpr = matrix.shape[1] // BLOCK
    clock = _Clock(timings)
    blocks = blocks_of(matrix)
    if header.scheme.is_dct:
        sel = header.selection
        values, public = split_dct_blocks(blocks, sel)
        clock.lap("transform")
        priv = bitpack.pack_dct_rows(values, sel.dc_index)
        pub = np.ascontiguousarray(public.reshape(-1, 64))
        clock.lap("pack")
        chk = kern.mask_dct(key.bytes, index, bpr, priv, pub, header.scheme is SchemeId.DCT_L2)
        priv_stream = bitpack.join_bits(priv, len(sel) * bitpack.DCT_FIELD_BITS)
        clock.lap("mask")
        a = encrypt_stream(key, index, priv_stream, guard, header.cipher)
        clock.lap("cipher")
        return {"A": a, "B": pub.tobytes(), "chk": chk.tobytes()}
    coeffs = kern.forward_blocks(blocks)
    clock.lap("transform")
    a, b, c = kern.pack_dwt(coeffs)
    clock.lap("pack")
    chk = kern.mask_dwt(key.bytes, index, bpr, a, b, c)
    b_stream = bitpack.join_bits(b, bitpack.B_BITS)
    clock.lap("mask")
    a_stream = encrypt_stream(key, index, a.tobytes(), guard, header.cipher)
    clock.lap("cipher")
    return {"A": a_stream, "B": b_stream, "C": c.tobytes(), "chk": chk.tobytes()}


def _restore_chunk(key: SecretKey, header: ContainerHeader, kern: ModuleType, index: int,
                   parts: dict[str, bytes | None]) -> tuple[np.ndarray, np.ndarray]:
    """Return the restored chunk matrix and a per-block corruption flag array."""
    geo = header.geometry()
    n, bpr = geo.blocks, geo.blocks_per_row
    chk_raw = parts.get("chk")
    have_chk = chk_raw is not None
    chk = np.frombuffer(chk_raw, dtype=np.uint8).reshape(n, 2) if have_chk else np.zeros((n, 2), dtype=np.uint8)
    if header.scheme.is_dct:
        sel = header.selection
        width = len(sel) * bitpack.DCT_FIELD_BITS
        plain = decrypt_stream(key, index, parts["A"], header.cipher)
        priv = bitpack.split_bits(plain, n, width)
        pub = np.frombuffer(parts["B"], dtype=np.uint8).reshape(n, 64).copy()
        bad = kern.unmask_dct(key.bytes, index, bpr, priv, pub, header.scheme is SchemeId.DCT_L2, chk)
        values = bitpack.unpack_dct_rows(priv, len(sel), sel.dc_index)
        pixels = rebuild_dct_blocks(values, pub.reshape(n, BLOCK, BLOCK), sel)
        flags = np.zeros(n, dtype=bool)
    else:
        a = np.frombuffer(decrypt_stream(key, index, parts["A"], header.cipher), dtype=np.uint8).reshape(n, 5).copy()
        b = bitpack.split_bits(parts["B"], n, bitpack.B_BITS)
        c = np.frombuffer(parts["C"], dtype=np.uint8).reshape(n, 60).copy()
        bad = kern.unmask_dwt(key.bytes, index, bpr, a, b, c, chk)
        pad_bad = (b[:, 15] & 0x0F) != 0
        b[:, 15] &= 0xF0
        coeffs = kern.unpack_dwt(a, b, c)
        pixels, flags = kern.inverse_blocks(coeffs)
        flags = flags | pad_bad | RANGE_TABLE.violations(coeffs)
    if not have_chk:
        bad = np.zeros(n, dtype=bool)
    return stitch_blocks(pixels, geo.height, geo.width), bad | flags


# -- chunk sources -------------------------------------------------------------

def _raw_chunks(data: bytes | memoryview, side: int) -> Iterator[tuple[int, np.ndarray]]:
    per = side * side
    view = memoryview(data)
    for index, start in enumerate(range(0, len(view), per)):
        piece = np.frombuffer(view[start:start + per], dtype=np.uint8)
        if piece.size < per:
            piece = np.concatenate([piece, np.zeros(per - piece.size, dtype=np.uint8)])
        yield index, piece.reshape(side, side)


def _reader_chunks(reader: BinaryIO, side: int, length: int) -> Iterator[tuple[int, np.ndarray]]:
    per = side * side
    offset = 0
    index = 0
    while offset < length:
        try:
            raw = reader.read(min(per, length - offset))
        except OSError as exc:
            raise StorageIOError(f"read failed at byte offset {offset}: {exc}", offset=offset) from exc
        if not raw:
            raise StorageIOError(f"input ended at byte offset {offset}, expected {length} bytes", offset=offset)
        offset += len(raw)
        piece = np.frombuffer(raw, dtype=np.uint8)
        if piece.size < per:
            piece = np.concatenate([piece, np.zeros(per - piece.size, dtype=np.uint8)])
        yield index, piece.reshape(side, side)
        index += 1


def raw_header(job: ProtectJob, length: int) -> ContainerHeader:
    return ContainerHeader(
        scheme=job.scheme, original_length=length, chunk_count=-(-length // (job.chunk_side ** 2)),
        chunk_side=job.chunk_side, cipher=job.cipher, selection=job.selection if job.scheme.is_dct else None,
    )


def image_header(job: ProtectJob, planes: Sequence[np.ndarray]) -> ContainerHeader:
    shapes = {p.shape for p in planes}
    if len(shapes) != 1 or len(next(iter(shapes))) != 2:
        raise StructuralError("image planes must be 2-D and share one shape")
    h, w = planes[0].shape
    if h == 0 or w == 0:
        raise StructuralError("image has no pixels")
    return ContainerHeader(
        scheme=job.scheme, original_length=h * w * len(planes), chunk_count=len(planes), chunk_side=0,
        cipher=job.cipher, payload=PayloadKind.IMAGE, planes=len(planes), image_height=h, image_width=w,
        selection=job.selection if job.scheme.is_dct else None,
    )


# -- protect -------------------------------------------------------------------

def _run_protect(job: ProtectJob, header: ContainerHeader, chunks: Iterable[tuple[int, np.ndarray]],
                 emit: Callable[[dict[str, bytes]], None], timings: StageTimings | None) -> None:
    guard = NonceGuard()

    def work(item: tuple[int, np.ndarray]) -> dict[str, bytes]:
        return _protect_chunk(job, header, guard, timings, *item)

    for out in _ordered_map(work, chunks, job.workers, header.chunk_count, job.progress):
        emit(out)


def protect_file(job: ProtectJob, data: bytes, timings: StageTimings | None = None) -> ProtectedContainer:
    """Protect an in-memory byte string."""
    header = raw_header(job, len(data))
    return _collect(job, header, _raw_chunks(data, job.chunk_side), timings, len(data))


def protect_image(job: ProtectJob, planes: Sequence[np.ndarray], timings: StageTimings | None = None) -> ProtectedContainer:
    """Protect bitmap planes, one chunk per plane (edge-padded to multiples of 8)."""
    planes = [np.asarray(p, dtype=np.uint8) for p in planes]
    header = image_header(job, planes)
    chunks = ((i, pad_plane(p)) for i, p in enumerate(planes))
    return _collect(job, header, chunks, timings, header.original_length)


def _collect(job, header, chunks, timings, nbytes) -> ProtectedContainer:
    parts: dict[str, list[bytes]] = {n: [] for n in header.stream_names}

    def emit(out: dict[str, bytes]) -> None:
        for name, raw in out.items():
            parts[name].append(raw)

    _timed(job, header, chunks, emit, timings, nbytes)
    return ProtectedContainer(header, {n: b"".join(v) for n, v in parts.items()})


def _timed(job, header, chunks, emit, timings, nbytes) -> None:
    start = time.perf_counter()
    _run_protect(job, header, chunks, emit, timings)
    if timings is not None:
        timings.wall += time.perf_counter() - start
        timings.workers = job.workers
        timings.chunks += header.chunk_count
        timings.input_bytes += nbytes


def protect_stream(job: ProtectJob, reader: BinaryIO, length: int, sinks: dict[str, BinaryIO],
                   timings: StageTimings | None = None) -> ContainerHeader:
    """Protect ``length`` bytes from ``reader``, appending each fragment stream to its sink."""
    header = raw_header(job, length)
    missing = [n for n in header.stream_names if n not in sinks]
    if missing:
        raise StructuralError(f"no sink for stream(s) {', '.join(missing)}")
    written = {n: 0 for n in header.stream_names}

    def emit(out: dict[str, bytes]) -> None:
        for name, raw in out.items():
            try:
                sinks[name].write(raw)
            except OSError as exc:
                raise StorageIOError(f"write to stream {name} failed at offset {written[name]}: {exc}",
                                     offset=written[name]) from exc
            written[name] += len(raw)

    _timed(job, header, _reader_chunks(reader, job.chunk_side, length), emit, timings, length)
    return header


def protect_path(job: ProtectJob, src: str | os.PathLike, dst: str | os.PathLike,
                 timings: StageTimings | None = None) -> ContainerHeader:
    """Stream a file into a single container file without holding it in memory."""
    length = os.path.getsize(src)
    header = raw_header(job, length)
    sizes = header.stream_sizes()
    head = header.encode()
    try:
        with open(src, "rb") as reader, open(dst, "wb") as out:
            out.write(head)
            out.truncate(len(head) + sum(sizes.values()))
            offsets, pos = {}, len(head)
            for name in header.stream_names:
                offsets[name] = pos
                pos += sizes[name]
            sinks = {name: _OffsetSink(out, offsets[name]) for name in header.stream_names}
            protect_stream(job, reader, length, sinks, timings)
    except OSError as exc:
        raise StorageIOError(f"protect {src} -> {dst}: {exc}") from exc
    return header


class _OffsetSink:
    """Sequential writer into one region of a shared file (single writer thread)."""

    def __init__(self, fh: BinaryIO, offset: int):
        self.fh, self.pos = fh, offset

    def write(self, raw: bytes) -> int:
        self.fh.seek(self.pos)
        n = self.fh.write(raw)
        self.pos += n
        return n


# -- restore -------------------------------------------------------------------

def _chunk_parts(container: ProtectedContainer) -> Iterator[tuple[int, dict[str, bytes | None]]]:
    sizes = container.header.chunk_stream_sizes()
    for index in range(container.header.chunk_count):
        parts = {}
        for name, size in sizes.items():
            raw = container.streams.get(name)
            parts[name] = None if raw is None else raw[index * size:(index + 1) * size]
        yield index, parts


def restore_file(key: SecretKey, container: ProtectedContainer, workers: int = 1,
                 kernels: ModuleType | None = None, progress: Progress | None = None) -> RestoreResult:
    """Rebuild the original bytes (or planes) and report any corrupted blocks."""
    header = container.header
    gone = tuple(n for n in container.missing() if n != "chk")
    if gone:
        raise AvailabilityError(f"cannot restore without fragment stream(s) {', '.join(gone)}", missing=gone)
    container.validate()
    kern = kernels or default_kernels
    geo: ChunkGeometry = header.geometry()
    bpr = geo.blocks_per_row

    def work(item):
        index, parts = item
        return _restore_chunk(key, header, kern, index, parts)

    corrupt: list[BlockAddress] = []
    pieces: list[np.ndarray] = []
    for index, (matrix, bad) in enumerate(
        _ordered_map(work, _chunk_parts(container), workers, header.chunk_count, progress)
    ):
        corrupt.extend(BlockAddress(index, int(i) // bpr, int(i) % bpr) for i in np.flatnonzero(bad))
        pieces.append(matrix)
    if header.payload == PayloadKind.IMAGE:
        planes = [p[: header.image_height, : header.image_width].copy() for p in pieces]
        data = b"".join(p.tobytes() for p in planes)
        return RestoreResult(data, corrupt, header, planes)
    buf = io.BytesIO()
    for p in pieces:
        buf.write(p.tobytes())
    return RestoreResult(buf.getvalue()[: header.original_length], corrupt, header)


# -- public view for analysis ----------------------------------------------------

def render_public(container: ProtectedContainer) -> np.ndarray:
    """Byte image of what an untrusted holder sees, shaped ``(chunks, h, w)``.

    DWT blocks show masked C (60 bytes) followed by the first 4 bytes of
    masked B; DCT blocks show their 64 stored public pixels.
    """
    header = container.header
    geo = header.geometry()
    n = geo.blocks
    out = np.empty((header.chunk_count, geo.height, geo.width), dtype=np.uint8)
    for index, parts in _chunk_parts(container):
        if header.scheme.is_dct:
            if parts["B"] is None:
                raise AvailabilityError("public stream B is missing", missing=("B",))
            blocks = np.frombuffer(parts["B"], dtype=np.uint8).reshape(n, BLOCK, BLOCK)
        else:
            if parts["B"] is None or parts["C"] is None:
                raise AvailabilityError("public streams are missing", missing=("B", "C"))
            b = bitpack.split_bits(parts["B"], n, bitpack.B_BITS)
            c = np.frombuffer(parts["C"], dtype=np.uint8).reshape(n, 60)
            blocks = np.concatenate([c, b[:, :4]], axis=1).reshape(n, BLOCK, BLOCK)
        out[index] = stitch_blocks(blocks, geo.height, geo.width)
    return out
