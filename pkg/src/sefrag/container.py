"""Container wire format.

Layout (little-endian, header padded to a multiple of 8 bytes)::

    0   magic "SEFR"
    4   version          u16
    6   scheme           u8    (1 DWT2-L2, 2 DCT-L1, 3 DCT-L2)
    7   cipher suite     u8
    8   chunk_side       u32   (raw payloads; 0 for images)
    12  payload kind     u8    (0 raw bytes, 1 image planes)
    13  planes           u8
    14  selection count  u8    (DCT only)
    15  reserved         u8
    16  original length  u64
    24  chunk count      u64
    32  image height     u32
    36  image width      u32
    40  reserved IV      16 bytes (zero)
    56  selection pairs  2 bytes each (row, col), zero-padded to 8

The streams follow in a fixed order: A, B, C, chk for DWT and A, B, chk for
DCT. Every stream is byte-padded per chunk, so all lengths follow from the
header alone.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from . import bitpack
from .cipher import CipherSuiteId
from .dct8 import DEFAULT_SET, SelectedCoeffSet
from .errors import StructuralError
from .model import BLOCK, SchemeId

MAGIC = b"SEFR"
VERSION = 1
FIXED_HEADER = struct.Struct("<4sHBBIBBBBQQII16s")
CHECK_BYTES = 2

DWT_STREAMS = ("A", "B", "C", "chk")
DCT_STREAMS = ("A", "B", "chk")


class PayloadKind(enum.IntEnum):
    RAW = 0
    IMAGE = 1


@dataclass(frozen=True)
class ChunkGeometry:
    height: int
    width: int

    @property
    def blocks(self) -> int:
        return (self.height // BLOCK) * (self.width // BLOCK)

    @property
    def blocks_per_row(self) -> int:
        return self.width // BLOCK


@dataclass(frozen=True)
class ContainerHeader:
    scheme: SchemeId
    original_length: int
    chunk_count: int
    chunk_side: int = 0
    cipher: int = CipherSuiteId.AES128_CTR
    payload: PayloadKind = PayloadKind.RAW
    planes: int = 0
    image_height: int = 0
    image_width: int = 0
    selection: SelectedCoeffSet | None = None
    iv: bytes = field(default=bytes(16))

    def __post_init__(self) -> None:
        if self.scheme.is_dct and self.selection is None:
            object.__setattr__(self, "selection", DEFAULT_SET)
        if not self.scheme.is_dct and self.selection is not None:
            object.__setattr__(self, "selection", None)
        if len(self.iv) != 16:
            raise StructuralError("reserved IV field must be 16 bytes")
        if self.payload == PayloadKind.RAW:
            if self.chunk_side <= 0 or self.chunk_side % BLOCK:
                raise StructuralError(f"chunk side {self.chunk_side} is not a positive multiple of 8")
        elif self.chunk_count != self.planes:
            raise StructuralError("image containers hold exactly one chunk per plane")

    # -- geometry ---------------------------------------------------------------

    def geometry(self) -> ChunkGeometry:
        if self.payload == PayloadKind.RAW:
            return ChunkGeometry(self.chunk_side, self.chunk_side)
        return ChunkGeometry(-(-self.image_height // BLOCK) * BLOCK, -(-self.image_width // BLOCK) * BLOCK)

    @property
    def stream_names(self) -> tuple[str, ...]:
        return DCT_STREAMS if self.scheme.is_dct else DWT_STREAMS

    def chunk_stream_sizes(self) -> dict[str, int]:
        n = self.geometry().blocks
        if self.scheme.is_dct:
            k = len(self.selection)
            return {"A": bitpack.stream_bytes(n, k * bitpack.DCT_FIELD_BITS), "B": n * 64, "chk": n * CHECK_BYTES}
        return {
            "A": bitpack.stream_bytes(n, bitpack.A_BITS),
            "B": bitpack.stream_bytes(n, bitpack.B_BITS),
            "C": bitpack.stream_bytes(n, bitpack.C_BITS),
            "chk": n * CHECK_BYTES,
        }

    def stream_sizes(self) -> dict[str, int]:
        return {k: v * self.chunk_count for k, v in self.chunk_stream_sizes().items()}

    # -- encoding ---------------------------------------------------------------

    def encode(self) -> bytes:
        sel = self.selection.positions if self.selection is not None else ()
        fixed = FIXED_HEADER.pack(
            MAGIC, VERSION, self.scheme.tag, int(self.cipher), self.chunk_side, int(self.payload), self.planes,
            len(sel), 0, self.original_length, self.chunk_count, self.image_height, self.image_width, self.iv,
        )
        tail = bytes(v for rc in sel for v in rc)
        tail += bytes(-len(tail) % 8)
        return fixed + tail

    @classmethod
    def decode(cls, data: bytes) -> tuple["ContainerHeader", int]:
        """Parse a header from the front of ``data``; return it with its byte size."""
        if len(data) < FIXED_HEADER.size:
            raise StructuralError("container shorter than its fixed header")
        (magic, version, scheme, cipher, side, kind, planes, nsel, _, length, chunks, height, width,
         iv) = FIXED_HEADER.unpack_from(data)
        if magic != MAGIC:
            raise StructuralError(f"bad container magic {magic!r}")
        if version != VERSION:
            raise StructuralError(f"unsupported container version {version}")
        size = FIXED_HEADER.size + -(-2 * nsel // 8) * 8
        if len(data) < size:
            raise StructuralError("container truncated inside the selection list")
        raw = data[FIXED_HEADER.size:FIXED_HEADER.size + 2 * nsel]
        sel = SelectedCoeffSet(tuple((raw[i], raw[i + 1]) for i in range(0, 2 * nsel, 2))) if nsel else None
        try:
            header = cls(
                scheme=SchemeId.from_tag(scheme), original_length=length, chunk_count=chunks, chunk_side=side,
                cipher=cipher, payload=PayloadKind(kind), planes=planes, image_height=height, image_width=width,
                selection=sel, iv=iv,
            )
        except ValueError as exc:
            raise StructuralError(str(exc)) from exc
        return header, size


@dataclass
class ProtectedContainer:
    header: ContainerHeader
    streams: dict[str, bytes | None]

    def validate(self) -> None:
        want = self.header.stream_sizes()
        for name in self.header.stream_names:
            raw = self.streams.get(name)
            if raw is not None and len(raw) != want[name]:
                raise StructuralError(f"stream {name} holds {len(raw)} bytes, header implies {want[name]}")

    def missing(self) -> tuple[str, ...]:
        return tuple(n for n in self.header.stream_names if self.streams.get(n) is None)

    def to_bytes(self) -> bytes:
        self.validate()
        gone = self.missing()
        if gone:
            raise StructuralError(f"cannot serialise a container without stream(s) {', '.join(gone)}")
        return self.header.encode() + b"".join(self.streams[n] for n in self.header.stream_names)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ProtectedContainer":
        header, offset = ContainerHeader.decode(data)
        streams: dict[str, bytes | None] = {}
        for name, size in header.stream_sizes().items():
            if offset + size > len(data):
                raise StructuralError(f"container truncated inside stream {name}")
            streams[name] = bytes(data[offset:offset + size])
            offset += size
        if offset != len(data):
            raise StructuralError(f"{len(data) - offset} trailing bytes after the last stream")
        return cls(header, streams)

    def fragment_bytes(self) -> dict[str, int]:
        return self.header.stream_sizes()
