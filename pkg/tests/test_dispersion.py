import json

import numpy as np
import pytest

from sefrag.dispersion import (
    PUBLIC,
    TRUSTED,
    BlobServer,
    DispersalManifest,
    LocalDirectory,
    RemoteBlob,
    blob_id,
    disperse,
    fetch,
    fetch_and_restore,
    fragment_ratios,
    local_storage_footprint,
    parse_target,
)
from sefrag.errors import AvailabilityError, IntegrityError, PolicyError, StructuralError
from sefrag.model import BlockAddress, SchemeId
from sefrag.pipeline import ProtectJob, protect_file, restore_file

TOKEN = "test-token"


@pytest.fixture
def server(tmp_path):
    with BlobServer(tmp_path / "remote", TOKEN) as srv:
        yield srv


@pytest.fixture(params=["local", "remote"])
def target(request, tmp_path):
    if request.param == "local":
        yield LocalDirectory(tmp_path / "store", role=PUBLIC)
    else:
        with BlobServer(tmp_path / "srv", TOKEN) as srv:
            yield RemoteBlob(srv.url, TOKEN)


# -- backend conformance ---------------------------------------------------------

def test_put_get_round_trip(target):
    data = b"hello blob"
    ident = blob_id(data)
    assert not target.exists(ident)
    target.put(ident, data)
    assert target.exists(ident)
    assert target.get(ident) == data


def test_put_is_idempotent(target):
    data = b"\x00" * 1000
    target.put(blob_id(data), data)
    target.put(blob_id(data), data)
    assert target.get(blob_id(data)) == data


def test_get_missing_is_availability_error(target):
    with pytest.raises(AvailabilityError):
        target.get("0" * 64)


def test_put_rejects_digest_mismatch(target):
    with pytest.raises(IntegrityError):
        target.put(blob_id(b"a"), b"b")


def test_malformed_identifier_rejected(target):
    with pytest.raises(StructuralError):
        target.put("../escape", b"x")


def test_empty_blob(target):
    target.put(blob_id(b""), b"")
    assert target.get(blob_id(b"")) == b""


# -- remote specifics -------------------------------------------------------------

def test_remote_rejects_bad_token(server):
    with pytest.raises(PolicyError):
        RemoteBlob(server.url, "wrong").put(blob_id(b"x"), b"x")
    with pytest.raises(PolicyError):
        RemoteBlob(server.url, None).get("0" * 64)


def test_remote_unreachable(tmp_path):
    dead = RemoteBlob("http://127.0.0.1:9", TOKEN, timeout=2)
    with pytest.raises((AvailabilityError, OSError)):
        dead.get("0" * 64)


def test_parse_target_roles(tmp_path):
    assert parse_target(str(tmp_path)).role == TRUSTED
    assert parse_target("http://127.0.0.1:1", token="t").role == PUBLIC
    assert parse_target(f"local:{tmp_path}").location == str(tmp_path)


# -- dispersal -----------------------------------------------------------------------

@pytest.fixture
def container(key, rng):
    return protect_file(ProtectJob(SchemeId.DWT2_L2, key, chunk_side=64), rng.bytes(3 * 4096 + 11))


def _placement(tmp_path, server):
    local = LocalDirectory(tmp_path / "local")
    cloud1 = RemoteBlob(server.url, TOKEN)
    cloud2 = LocalDirectory(tmp_path / "cloud2", role=PUBLIC)
    return {"A": local, "B": cloud1, "C": cloud2, "chk": cloud2}


def test_reliable_channel_layout_round_trip(key, container, tmp_path, server):
    man = disperse(container, _placement(tmp_path, server), manifest_path=tmp_path / "m.json")
    loaded = DispersalManifest.load(tmp_path / "m.json")
    assert loaded.container_id == man.container_id
    res = fetch_and_restore(key, loaded, credentials=TOKEN)
    assert res.data == restore_file(key, container).data and res.clean


def test_error_prone_layout(key, tmp_path, server):
    container = protect_file(ProtectJob(SchemeId.DWT2_L2, key, chunk_side=64), bytes(4 * 4096))
    local = LocalDirectory(tmp_path / "local")
    cloud = RemoteBlob(server.url, TOKEN)
    man = disperse(container, {"A": local, "B": local, "C": cloud, "chk": cloud})
    assert local_storage_footprint(man) == pytest.approx(164 / 512, abs=1e-9)
    assert fetch_and_restore(key, man, credentials=TOKEN).clean


def test_private_on_public_target_refused(container, tmp_path, server):
    cloud = RemoteBlob(server.url, TOKEN)
    with pytest.raises(PolicyError):
        disperse(container, {"A": cloud, "B": cloud, "C": cloud, "chk": cloud})
    assert not list((tmp_path / "remote").rglob("*")) or all(p.is_dir() for p in (tmp_path / "remote").rglob("*"))
    disperse(container, {"A": cloud, "B": cloud, "C": cloud, "chk": cloud}, allow_untrusted_private=True)


def test_at_rest_corruption_flags_blocks(key, container, tmp_path, server):
    placement = _placement(tmp_path, server)
    man = disperse(container, placement)
    rec = man.streams["C"]
    path = placement["C"]._path(rec.blob)
    raw = bytearray(path.read_bytes())
    raw[60 * 70 + 1] ^= 0x04  # chunk 1, block 6
    path.write_bytes(bytes(raw))
    with pytest.raises(IntegrityError):
        fetch(man, TOKEN)
    res = fetch_and_restore(key, man, credentials=TOKEN, allow_corrupt=True)
    assert res.corrupt_blocks == [BlockAddress(1, 0, 6)]


def test_missing_private_gives_no_plaintext(key, container, tmp_path, server):
    placement = _placement(tmp_path, server)
    man = disperse(container, placement)
    placement["A"]._path(man.streams["A"].blob).unlink()
    with pytest.raises(AvailabilityError) as err:
        fetch_and_restore(key, man, credentials=TOKEN)
    assert "A" in err.value.missing


def test_key_never_reaches_storage_or_manifest(key, container, tmp_path, server):
    man = disperse(container, _placement(tmp_path, server), manifest_path=tmp_path / "m.json")
    needles = (key.bytes, key.bytes.hex().encode(), key.bytes.hex().upper().encode())
    files = [p for p in tmp_path.rglob("*") if p.is_file()]
    assert files
    for p in files:
        blob = p.read_bytes()
        assert not any(n in blob for n in needles), p
    assert not any(n.decode("latin1") in man.to_json() for n in needles)
    assert TOKEN not in (tmp_path / "m.json").read_text()


def test_manifest_json_shape(container, tmp_path, server):
    man = disperse(container, _placement(tmp_path, server))
    body = json.loads(man.to_json())
    assert set(body["streams"]) == {"A", "B", "C", "chk"}
    assert body["streams"]["B"]["target"]["kind"] == "remote"
    with pytest.raises(StructuralError):
        DispersalManifest.from_json("{}")


def test_fragment_ratios_large_input(key):
    data = np.random.default_rng(3).integers(0, 256, 10 * 2**20, dtype=np.uint8).tobytes()
    c = protect_file(ProtectJob(SchemeId.DWT2_L2, key), data)
    r = fragment_ratios(c.header)
    assert r["A"] == pytest.approx(0.078125, abs=1e-6)
    assert r["B"] == pytest.approx(0.2421875, abs=1e-6)
    assert r["C"] == pytest.approx(0.9375, abs=1e-6)
