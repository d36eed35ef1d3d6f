import pytest

from sefrag.container import ContainerHeader, PayloadKind, ProtectedContainer
from sefrag.dct8 import SelectedCoeffSet
from sefrag.errors import StructuralError
from sefrag.model import SchemeId


def _le(v: int, n: int) -> bytes:
    return v.to_bytes(n, "little")


def test_dwt_header_golden_bytes():
    h = ContainerHeader(SchemeId.DWT2_L2, original_length=1_000_000, chunk_count=1, chunk_side=1024)
    expected = (
        b"SEFR" + _le(1, 2) + bytes([1, 1]) + _le(1024, 4) + bytes([0, 0, 0, 0])
        + _le(1_000_000, 8) + _le(1, 8) + _le(0, 4) + _le(0, 4) + bytes(16)
    )
    assert h.encode() == expected
    assert len(expected) == 56


def test_dct_image_header_golden_bytes():
    h = ContainerHeader(SchemeId.DCT_L2, original_length=512 * 512, chunk_count=1, payload=PayloadKind.IMAGE,
                        planes=1, image_height=512, image_width=512)
    expected = (
        b"SEFR" + _le(1, 2) + bytes([3, 1]) + _le(0, 4) + bytes([1, 1, 6, 0])
        + _le(512 * 512, 8) + _le(1, 8) + _le(512, 4) + _le(512, 4) + bytes(16)
        + bytes([0, 0, 0, 1, 1, 0, 2, 0, 1, 1, 0, 2]) + bytes(4)
    )
    assert h.encode() == expected


@pytest.mark.parametrize("header", [
    ContainerHeader(SchemeId.DWT2_L2, 5, 1, chunk_side=8),
    ContainerHeader(SchemeId.DCT_L1, 100, 1, chunk_side=16, selection=SelectedCoeffSet(((0, 0), (7, 7)))),
    ContainerHeader(SchemeId.DCT_L2, 300, 3, payload=PayloadKind.IMAGE, planes=3, image_height=10, image_width=10),
])
def test_header_round_trip(header):
    raw = header.encode()
    assert len(raw) % 8 == 0
    decoded, size = ContainerHeader.decode(raw + b"tail")
    assert decoded == header and size == len(raw)


def test_header_carries_no_key_material(key):
    raw = ContainerHeader(SchemeId.DWT2_L2, 5, 1, chunk_side=8).encode()
    assert key.bytes not in raw


def test_stream_sizes_are_header_derived():
    h = ContainerHeader(SchemeId.DWT2_L2, 10, 2, chunk_side=16)
    assert h.chunk_stream_sizes() == {"A": 20, "B": 62, "C": 240, "chk": 8}
    assert h.stream_sizes()["B"] == 124
    d = ContainerHeader(SchemeId.DCT_L1, 10, 1, chunk_side=16)
    assert d.chunk_stream_sizes() == {"A": 33, "B": 256, "chk": 8}


@pytest.mark.parametrize("raw,msg", [
    (b"XXXX" + bytes(60), "magic"),
    (b"SEFR" + bytes(10), "shorter"),
    (b"SEFR" + (9).to_bytes(2, "little") + bytes(58), "version"),
])
def test_decode_rejects_garbage(raw, msg):
    with pytest.raises(StructuralError, match=msg):
        ContainerHeader.decode(raw)


def test_header_rejects_bad_chunk_side():
    with pytest.raises(StructuralError):
        ContainerHeader(SchemeId.DWT2_L2, 5, 1, chunk_side=12)


def test_container_round_trip_and_truncation():
    h = ContainerHeader(SchemeId.DWT2_L2, 10, 1, chunk_side=8)
    sizes = h.stream_sizes()
    c = ProtectedContainer(h, {n: bytes([i]) * sizes[n] for i, n in enumerate(h.stream_names)})
    raw = c.to_bytes()
    back = ProtectedContainer.from_bytes(raw)
    assert back.streams == c.streams
    with pytest.raises(StructuralError, match="truncated"):
        ProtectedContainer.from_bytes(raw[:-1])
    with pytest.raises(StructuralError, match="trailing"):
        ProtectedContainer.from_bytes(raw + b"\x00")


def test_container_missing_and_wrong_sizes():
    h = ContainerHeader(SchemeId.DWT2_L2, 10, 1, chunk_side=8)
    c = ProtectedContainer(h, {"A": bytes(5), "B": bytes(16), "C": None, "chk": bytes(2)})
    assert c.missing() == ("C",)
    with pytest.raises(StructuralError):
        c.to_bytes()
    with pytest.raises(StructuralError):
        ProtectedContainer(h, {"A": bytes(4)}).validate()
