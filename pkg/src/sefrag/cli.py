"""Command-line front end: ``sefrag protect|restore|analyze|bench|keygen``.

Exit codes: 0 ok, 2 usage, 3 I/O or availability, 4 integrity, 5 policy.
The key is read from ``--key-file``, else ``SEFRAG_KEY`` (hex), else a prompt;
it is never accepted as a command-line value.
"""
from __future__ import annotations

import argparse
import getpass
import json
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import analysis, bench
from .backend import kernels
from .container import DCT_STREAMS, DWT_STREAMS, PayloadKind, ProtectedContainer
from .dct8 import DEFAULT_SET, SelectedCoeffSet
from .dispersion import (
    TOKEN_ENV,
    DispersalManifest,
    disperse,
    fetch_and_restore,
    fragment_ratios,
    local_storage_footprint,
    parse_target,
)
from .errors import IntegrityError, PolicyError, SefragError, StorageIOError, StructuralError
from .model import DEFAULT_CHUNK_SIDE, SchemeId, SecretKey
from .pipeline import ProtectJob, protect_file, protect_image, protect_path, render_public, restore_file
from .protect_dct import read_bitmap, write_bitmap

KEY_ENV = "SEFRAG_KEY"
EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INTEGRITY, EXIT_POLICY = 0, 2, 3, 4, 5
BITMAP_SUFFIXES = (".bmp", ".dib")


# -- helpers ---------------------------------------------------------------------

def load_key(key_file: str | None, prompt: bool = True) -> SecretKey:
    if key_file:
        try:
            raw = Path(key_file).read_bytes()
        except OSError as exc:
            raise StorageIOError(f"cannot read key file {key_file}: {exc}") from exc
        if len(raw) == 16:
            return SecretKey(raw)
        return SecretKey.from_hex(raw.decode("ascii", "replace"))
    env = os.environ.get(KEY_ENV)
    if env:
        return SecretKey.from_hex(env)
    if prompt and sys.stdin.isatty():
        return SecretKey.from_hex(getpass.getpass("key (32 hex digits): "))
    raise StructuralError(f"no key: pass --key-file or set {KEY_ENV}")


def _is_bitmap(path: str) -> bool:
    return path.lower().endswith(BITMAP_SUFFIXES)


def _placement(spec: str, stream_names: Sequence[str]) -> dict:
    token = os.environ.get(TOKEN_ENV)
    placement = {}
    for item in filter(None, spec.split(",")):
        name, sep, target = item.partition("=")
        if not sep or not target:
            raise StructuralError(f"bad placement item {item!r}; expected NAME=TARGET")
        placement[name.strip()] = parse_target(target.strip(), token=token)
    if "chk" not in placement and "chk" in stream_names:
        placement["chk"] = placement.get("C") or placement.get("B")
    return {k: v for k, v in placement.items() if v is not None}


def _ratio_line(header) -> str:
    ratios = fragment_ratios(header)
    return "  ".join(f"{n} {100 * r:.2f}%" for n, r in ratios.items())


def _write(path: str, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise StorageIOError(f"cannot write {path}: {exc}") from exc


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise StorageIOError(f"cannot read {path}: {exc}") from exc


# -- commands --------------------------------------------------------------------

def cmd_keygen(args) -> int:
    out = Path(args.out)
    if out.exists() and not args.force:
        raise StructuralError(f"{out} exists; pass --force to overwrite")
    fd = os.open(out, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "wb") as fh:
        fh.write(SecretKey.generate().bytes)
    print(f"wrote 128-bit key to {out}")
    return EXIT_OK


def _job(args, key: SecretKey) -> ProtectJob:
    sel = SelectedCoeffSet.parse(args.selection) if args.selection else DEFAULT_SET
    return ProtectJob(SchemeId.parse(args.scheme), key, chunk_side=args.chunk, workers=args.workers, selection=sel)


def cmd_protect(args) -> int:
    key = load_key(args.key_file)
    job = _job(args, key)
    image = job.scheme.is_dct and _is_bitmap(args.input)
    if job.scheme.is_dct and not image:
        print("note: DCT schemes are lossy on non-bitmap input", file=sys.stderr)
    placement = None
    if args.place is not None:
        placement = _placement(args.place, DCT_STREAMS if job.scheme.is_dct else DWT_STREAMS)
        if "A" in placement and not placement["A"].trusted and not args.allow_untrusted_private:
            raise PolicyError(f"private fragment A may not be placed on untrusted target {placement['A'].location}")
    if args.place is None and not image:
        out = args.out or args.input + ".sefr"
        header = protect_path(job, args.input, out)
        print(f"container {out}: {_ratio_line(header)}")
        return EXIT_OK
    if image:
        planes = read_bitmap(args.input)
        container = protect_image(job, planes)
    else:
        container = protect_file(job, _read(args.input))
    print(_ratio_line(container.header))
    if image:
        rebuilt = restore_file(key, container, workers=job.workers).planes
        quality = analysis.psnr(np.stack(planes), np.stack(rebuilt))
        print(f"round-trip PSNR {quality:.2f} dB")
    if args.place is None:
        out = args.out or args.input + ".sefr"
        _write(out, container.to_bytes())
        print(f"container {out}")
        return EXIT_OK
    out = args.out or args.input + ".manifest.json"
    manifest = disperse(container, placement, args.allow_untrusted_private, out)
    print(f"manifest {out}: local footprint {100 * local_storage_footprint(manifest):.2f}%")
    return EXIT_OK


def _load_source(path: str):
    raw = _read(path)
    if raw[:4] == b"SEFR":
        return ProtectedContainer.from_bytes(raw), None
    try:
        return None, DispersalManifest.from_json(raw.decode("utf-8"))
    except (UnicodeDecodeError, StructuralError) as exc:
        raise StructuralError(f"{path} is neither a container nor a manifest") from exc


def cmd_restore(args) -> int:
    key = load_key(args.key_file)
    container, manifest = _load_source(args.source)
    if container is not None:
        result = restore_file(key, container, workers=args.workers)
    else:
        creds = os.environ.get(TOKEN_ENV)
        result = fetch_and_restore(key, manifest, creds, allow_corrupt=args.allow_corrupt, workers=args.workers)
    out = args.out
    if result.header.payload == PayloadKind.IMAGE:
        write_bitmap(out, result.planes)
    else:
        _write(out, result.data)
    print(f"restored {len(result.data)} bytes to {out}")
    if result.corrupt_blocks:
        for addr in result.corrupt_blocks:
            print(f"corrupt block chunk={addr.chunk_index} row={addr.block_row} col={addr.block_col}")
        return EXIT_INTEGRITY
    return EXIT_OK


def _square(data: bytes) -> np.ndarray:
    side = math.isqrt(len(data))
    if side < 2:
        raise StructuralError("input too small to analyse")
    return np.frombuffer(data[: side * side], dtype=np.uint8).reshape(side, side)


def _matrix(path: str) -> tuple[np.ndarray, bool]:
    if _is_bitmap(path):
        planes = read_bitmap(path)
        return np.concatenate(planes, axis=0), True
    return _square(_read(path)), False


def cmd_analyze(args) -> int:
    cfg = analysis.AnalysisConfig(n_pairs=args.pairs, seed=args.seed)
    if args.protected:
        original, is_image = _matrix(args.original)
        raw = _read(args.protected)
        if raw[:4] == b"SEFR":
            container = ProtectedContainer.from_bytes(raw)
            view = render_public(container)
            protected = np.concatenate(list(view), axis=0)
            original = _pad_like(original, protected)
        else:
            protected, _ = _matrix(args.protected)
        if protected.shape != original.shape:
            raise StructuralError(f"shapes differ: {original.shape} vs {protected.shape}")
        reports = [analysis.run_battery(original, protected, cfg, is_image=is_image)]
    else:
        reports = _trials(args, cfg)
    text = reports[0].to_text() if len(reports) == 1 else analysis.summary_csv(analysis.summarize(reports))
    if args.out:
        _write(args.out + ".txt", text.encode())
        csv_text = reports[0].to_csv() if len(reports) == 1 else text
        _write(args.out + ".csv", csv_text.encode())
        if args.dump:
            _write(args.out + ".pdf.json", json.dumps(reports[0].pdf).encode())
    sys.stdout.write(text)
    return EXIT_OK


def _pad_like(original: np.ndarray, protected: np.ndarray) -> np.ndarray:
    flat = original.ravel()
    need = protected.size
    if flat.size > need:
        raise StructuralError("protected view smaller than the original")
    return np.concatenate([flat, np.zeros(need - flat.size, dtype=np.uint8)]).reshape(protected.shape)


def _trials(args, cfg) -> list:
    """Protect the original under ``--trials`` seeded random keys and analyse the public view.

    Bitmaps are decoded first: DCT schemes take the planes, DWT takes the
    plane pixels as raw bytes.
    """
    scheme = SchemeId.parse(args.scheme)
    rng = np.random.default_rng(args.seed)
    bitmap = _is_bitmap(args.original)
    planes = read_bitmap(args.original) if bitmap else None
    data = b"".join(p.tobytes() for p in planes) if bitmap else _read(args.original)
    use_planes = scheme.is_dct and bitmap
    reports = []
    for _ in range(args.trials):
        key = SecretKey(rng.bytes(16))
        flipped = key.flip_bit(int(rng.integers(128)))
        views = []
        for k in (key, flipped):
            job = ProtectJob(scheme, k, chunk_side=args.chunk, workers=args.workers)
            c = protect_image(job, planes) if use_planes else protect_file(job, data)
            views.append(np.concatenate(list(render_public(c)), axis=0))
        if use_planes:
            original = np.concatenate([np.pad(p, ((0, -p.shape[0] % 8), (0, -p.shape[1] % 8)), mode="edge")
                                       for p in planes], axis=0)
        else:
            original = _pad_like(np.frombuffer(data, dtype=np.uint8), views[0])
        reports.append(analysis.run_battery(original, views[0], cfg, is_image=bitmap, ks_reference=views[1]))
    return reports


def cmd_bench(args) -> int:
    if args.stage:
        for stage in args.stage:
            print(f"{stage:<8} {bench.bench_stage(stage, args.stage_bytes, args.repetitions):10.1f} MB/s")
        return EXIT_OK
    if args.compare_backends:
        for name, mbs in bench.compare_backends(args.stage_bytes, repetitions=args.repetitions).items():
            print(f"{name:<8} {mbs:10.1f} MB/s")
        return EXIT_OK
    results = bench.bench_protect(
        [SchemeId.parse(s) for s in args.schemes], bench.ladder_sizes(args.sizes), args.workers_list,
        args.repetitions, 1, args.chunk, seed=args.seed,
    )
    csv_text = bench.results_csv(results)
    if args.out:
        _write(args.out, csv_text.encode())
    sys.stdout.write(csv_text)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _side(text: str) -> int:
    value = _positive(text)
    if value % 8:
        raise argparse.ArgumentTypeError("must be a multiple of 8")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sefrag", allow_abbrev=False, description="Selective encryption with fragment dispersion.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({kernels.NAME} kernels)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, key=True):
        sp.add_argument("--workers", type=_positive, default=1, help="worker threads (default 1)")
        if key:
            sp.add_argument("--key-file", help=f"16 raw bytes or 32 hex digits; else ${KEY_ENV}, else a prompt")

    def scheme(sp):
        sp.add_argument("--scheme", choices=("dwt2", "dct1", "dct2"), default="dwt2", help="protection scheme")
        sp.add_argument("--chunk", type=_side, default=DEFAULT_CHUNK_SIDE, help="chunk side in bytes (default 1024)")
        sp.add_argument("--selection", help="DCT coefficient positions, e.g. '0,0;0,1;1,0;2,0;1,1;0,2'")

    sp = sub.add_parser("keygen", allow_abbrev=False, help="write a fresh random 128-bit key file (mode 600)")
    sp.add_argument("--out", required=True, help="key file path")
    sp.add_argument("--force", action="store_true", help="overwrite an existing file")
    sp.set_defaults(func=cmd_keygen)

    sp = sub.add_parser("protect", allow_abbrev=False, help="protect a file into a container or disperse its fragments")
    sp.add_argument("input")
    scheme(sp)
    common(sp)
    sp.add_argument("--place", help="disperse: NAME=TARGET,... with TARGET local:DIR or http(s)://URL")
    sp.add_argument("--allow-untrusted-private", action="store_true", help="permit fragment A on a public target")
    sp.add_argument("--seed", type=int, default=0, help="unused by protect; accepted for uniform scripting")
    sp.add_argument("--out", help="container path (default INPUT.sefr) or manifest path with --place")
    sp.set_defaults(func=cmd_protect)

    sp = sub.add_parser("restore", allow_abbrev=False, help="restore from a container file or a dispersal manifest")
    sp.add_argument("source")
    common(sp)
    sp.add_argument("--out", required=True, help="restored output path")
    sp.add_argument("--allow-corrupt", action="store_true", help="restore despite digest mismatches and report blocks")
    sp.set_defaults(func=cmd_restore)

    sp = sub.add_parser("analyze", allow_abbrev=False, help="statistical battery: compare two files, or protect and analyse")
    sp.add_argument("original")
    sp.add_argument("protected", nargs="?", help="file or container to compare; omitted: run keyed trials")
    scheme(sp)
    common(sp, key=False)
    sp.add_argument("--trials", type=_positive, default=1, help="random-key trials (default 1)")
    sp.add_argument("--pairs", type=_positive, default=analysis.DEFAULT_PAIRS, help="adjacent pairs sampled")
    sp.add_argument("--seed", type=int, default=0, help="seed for pair sampling and trial keys")
    sp.add_argument("--out", help="write OUT.txt and OUT.csv")
    sp.add_argument("--dump", action="store_true", help="also write the byte histogram as OUT.pdf.json")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("bench", allow_abbrev=False, help="throughput against AES-128 on identical data")
    sp.add_argument("--schemes", nargs="+", choices=("dwt2", "dct1", "dct2"), default=["dwt2"])
    sp.add_argument("--sizes", nargs="+", type=_side, default=[512, 1024], help="input sides (bytes = side^2)")
    sp.add_argument("--workers", dest="workers_list", nargs="+", type=_positive, default=[1])
    sp.add_argument("--chunk", type=_side, default=DEFAULT_CHUNK_SIDE)
    sp.add_argument("--repetitions", type=_positive, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--stage", nargs="+", choices=bench.STAGE_NAMES, help="isolate stages instead")
    sp.add_argument("--stage-bytes", type=_positive, default=1 << 20)
    sp.add_argument("--compare-backends", action="store_true", help="compiled vs fallback kernels")
    sp.add_argument("--out", help="CSV output path")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IntegrityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except SefragError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code if exc.exit_code in (2, 3, 4, 5) else EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
