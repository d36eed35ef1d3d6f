"""Fragment placement on storage targets, manifests, and the blob protocol.

Remote targets speak a small HTTP protocol against ``{base}/blobs/{id}``,
where ``id`` is the SHA-256 hex digest of the blob:

* ``PUT`` stores a blob: 201 created, 409 already present, 400 digest mismatch
* ``GET`` returns it with a ``Digest: sha-256=<base64>`` header, or 404
* ``HEAD`` reports presence (200/404)

Every request carries ``Authorization: Bearer <token>``; a wrong token gets 401.
"""
from __future__ import annotations

import base64
import hashlib
import http.server
import json
import os
import re
import threading
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .container import ContainerHeader, ProtectedContainer
from .errors import AvailabilityError, IntegrityError, PolicyError, StorageIOError, StructuralError
from .model import SecretKey
from .pipeline import RestoreResult, restore_file

TRUSTED = "trusted"
PUBLIC = "public"
TOKEN_ENV = "SEFRAG_BLOB_TOKEN"
MANIFEST_VERSION = 1
_BLOB_ID = re.compile(r"^[0-9a-f]{64}$")


def blob_id(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _digest_header(data: bytes) -> str:
    return "sha-256=" + base64.b64encode(hashlib.sha256(data).digest()).decode()


class StorageTarget:
    kind = "abstract"

    def __init__(self, location: str, role: str):
        if role not in (TRUSTED, PUBLIC):
            raise StructuralError(f"unknown target role {role!r}")
        self.location = location
        self.role = role

    @property
    def trusted(self) -> bool:
        return self.role == TRUSTED

    def descriptor(self) -> dict[str, str]:
        return {"kind": self.kind, "location": self.location, "role": self.role}

    def put(self, ident: str, data: bytes) -> None:
        raise NotImplementedError

    def get(self, ident: str) -> bytes:
        raise NotImplementedError

    def exists(self, ident: str) -> bool:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.location!r}, role={self.role!r})"


class LocalDirectory(StorageTarget):
    kind = "local"

    def __init__(self, path: str | os.PathLike, role: str = TRUSTED):
        super().__init__(str(Path(path).resolve()), role)

    def _path(self, ident: str) -> Path:
        if not _BLOB_ID.match(ident):
            raise StructuralError(f"malformed blob id {ident!r}")
        return Path(self.location) / ident

    def put(self, ident: str, data: bytes) -> None:
        path = self._path(ident)
        if blob_id(data) != ident:
            raise IntegrityError(f"blob content does not match id {ident}")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            if path.exists():
                return
            tmp = path.with_suffix(f".{threading.get_ident()}.tmp")
            tmp.write_bytes(data)
            os.replace(tmp, path)
        except OSError as exc:
            raise AvailabilityError(f"cannot write {path}: {exc}", retryable=True) from exc

    def get(self, ident: str) -> bytes:
        path = self._path(ident)
        try:
            return path.read_bytes()
        except FileNotFoundError as exc:
            raise AvailabilityError(f"blob {ident} not found in {self.location}") from exc
        except OSError as exc:
            raise AvailabilityError(f"cannot read {path}: {exc}", retryable=True) from exc

    def exists(self, ident: str) -> bool:
        return self._path(ident).exists()


class RemoteBlob(StorageTarget):
    """HTTP blob-store client (stdlib ``urllib``)."""

    kind = "remote"

    def __init__(self, base_url: str, token: str | None = None, role: str = PUBLIC, timeout: float = 30.0):
        super().__init__(base_url.rstrip("/"), role)
        self._token = token if token is not None else os.environ.get(TOKEN_ENV)
        self.timeout = timeout

    def _request(self, method: str, ident: str, data: bytes | None = None):
        if not _BLOB_ID.match(ident):
            raise StructuralError(f"malformed blob id {ident!r}")
        req = urllib.request.Request(f"{self.location}/blobs/{ident}", data=data, method=method)
        if self._token:
            req.add_header("Authorization", f"Bearer {self._token}")
        if data is not None:
            req.add_header("Content-Type", "application/octet-stream")
            req.add_header("Digest", _digest_header(data))
        return urllib.request.urlopen(req, timeout=self.timeout)

    def _fail(self, exc: Exception, what: str):
        if isinstance(exc, urllib.error.HTTPError):
            if exc.code == 401:
                return PolicyError(f"{what}: {self.location} rejected the bearer token")
            if exc.code == 404:
                return AvailabilityError(f"{what}: not found on {self.location}")
            if exc.code == 400:
                return IntegrityError(f"{what}: {self.location} rejected the blob digest")
            return AvailabilityError(f"{what}: HTTP {exc.code} from {self.location}", retryable=exc.code >= 500)
        return AvailabilityError(f"{what}: {self.location} unreachable ({exc})", retryable=True)

    def put(self, ident: str, data: bytes) -> None:
        try:
            with self._request("PUT", ident, data):
                pass
        except urllib.error.HTTPError as exc:
            if exc.code == 409:
                return
            raise self._fail(exc, f"PUT {ident}") from exc
        except OSError as exc:
            raise self._fail(exc, f"PUT {ident}") from exc

    def get(self, ident: str) -> bytes:
        try:
            with self._request("GET", ident) as resp:
                body = resp.read()
                digest = resp.headers.get("Digest")
        except (urllib.error.HTTPError, OSError) as exc:
            raise self._fail(exc, f"GET {ident}") from exc
        if digest is not None and digest != _digest_header(body):
            raise IntegrityError(f"GET {ident}: response body does not match its Digest header")
        return body

    def exists(self, ident: str) -> bool:
        try:
            with self._request("HEAD", ident):
                return True
        except urllib.error.HTTPError as exc:
            if exc.code == 404:
                return False
            raise self._fail(exc, f"HEAD {ident}") from exc
        except OSError as exc:
            raise self._fail(exc, f"HEAD {ident}") from exc


def target_from_descriptor(desc: Mapping[str, str], credentials: Mapping[str, str] | str | None = None) -> StorageTarget:
    kind, location, role = desc["kind"], desc["location"], desc.get("role", PUBLIC)
    if kind == "local":
        return LocalDirectory(location, role)
    if kind == "remote":
        token = credentials.get(location) if isinstance(credentials, Mapping) else credentials
        return RemoteBlob(location, token, role)
    raise StructuralError(f"unknown storage target kind {kind!r}")


def parse_target(spec: str, role: str | None = None, token: str | None = None) -> StorageTarget:
    """``http(s)://...`` -> remote (public); ``local``/``local:PATH``/PATH -> local directory (trusted)."""
    if spec.startswith(("http://", "https://")):
        return RemoteBlob(spec, token, role or PUBLIC)
    path = spec[len("local:"):] if spec.startswith("local:") else spec
    return LocalDirectory(path or ".", role or TRUSTED)


# -- manifest --------------------------------------------------------------------

@dataclass
class StreamRecord:
    target: dict[str, str]
    blob: str
    sha256: str
    length: int


@dataclass
class DispersalManifest:
    header_hex: str
    streams: dict[str, StreamRecord]
    version: int = MANIFEST_VERSION
    container_id: str = field(default="")

    def __post_init__(self) -> None:
        if not self.container_id:
            h = hashlib.sha256(bytes.fromhex(self.header_hex))
            for name in sorted(self.streams):
                h.update(name.encode() + bytes.fromhex(self.streams[name].sha256))
            self.container_id = h.hexdigest()

    @property
    def header(self) -> ContainerHeader:
        return ContainerHeader.decode(bytes.fromhex(self.header_hex))[0]

    def to_json(self) -> str:
        body = {
            "version": self.version,
            "container_id": self.container_id,
            "header": self.header_hex,
            "streams": {n: vars(r) for n, r in self.streams.items()},
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DispersalManifest":
        try:
            body = json.loads(text)
            if body["version"] != MANIFEST_VERSION:
                raise StructuralError(f"unsupported manifest version {body['version']}")
            streams = {n: StreamRecord(**r) for n, r in body["streams"].items()}
            return cls(body["header"], streams, body["version"], body["container_id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise StructuralError(f"malformed manifest: {exc}") from exc

    def save(self, path: str | os.PathLike) -> None:
        try:
            Path(path).write_text(self.to_json())
        except OSError as exc:
            raise StorageIOError(f"cannot write manifest {path}: {exc}") from exc

    @classmethod
    def load(cls, path: str | os.PathLike) -> "DispersalManifest":
        try:
            return cls.from_json(Path(path).read_text())
        except OSError as exc:
            raise StorageIOError(f"cannot read manifest {path}: {exc}") from exc


# -- operations ------------------------------------------------------------------

def check_placement(container: ProtectedContainer, placement: Mapping[str, StorageTarget],
                    allow_untrusted_private: bool = False) -> None:
    names = container.header.stream_names
    missing = [n for n in names if n not in placement]
    if missing:
        raise StructuralError(f"placement does not cover stream(s) {', '.join(missing)}")
    extra = [n for n in placement if n not in names]
    if extra:
        raise StructuralError(f"placement names unknown stream(s) {', '.join(extra)}")
    if not placement["A"].trusted and not allow_untrusted_private:
        raise PolicyError(f"private fragment A may not be placed on untrusted target {placement['A'].location}")


def disperse(container: ProtectedContainer, placement: Mapping[str, StorageTarget],
             allow_untrusted_private: bool = False, manifest_path: str | os.PathLike | None = None) -> DispersalManifest:
    """Upload every stream to its target concurrently; return (and optionally save) the manifest."""
    check_placement(container, placement, allow_untrusted_private)
    container.validate()
    if container.missing():
        raise AvailabilityError("container is missing streams", missing=container.missing())
    names = container.header.stream_names

    def upload(name: str) -> StreamRecord:
        data = container.streams[name]
        ident = blob_id(data)
        placement[name].put(ident, data)
        return StreamRecord(placement[name].descriptor(), ident, ident, len(data))

    with ThreadPoolExecutor(max_workers=len(names)) as pool:
        records = dict(zip(names, pool.map(upload, names)))
    manifest = DispersalManifest(container.header.encode().hex(), records)
    if manifest_path is not None:
        manifest.save(manifest_path)
    return manifest


def fetch(manifest: DispersalManifest, credentials: Mapping[str, str] | str | None = None,
          allow_corrupt: bool = False) -> ProtectedContainer:
    """Download every reachable stream. Missing streams come back as ``None``.

    Digest mismatches raise unless ``allow_corrupt``; then the bytes are kept
    so restore can report which blocks are damaged.
    """
    header = manifest.header

    def download(name: str) -> bytes | None:
        rec = manifest.streams.get(name)
        if rec is None:
            return None
        try:
            data = target_from_descriptor(rec.target, credentials).get(rec.blob)
        except AvailabilityError:
            return None
        if len(data) != rec.length:
            raise IntegrityError(f"stream {name} has {len(data)} bytes, manifest says {rec.length}", stream=name)
        if hashlib.sha256(data).hexdigest() != rec.sha256 and not allow_corrupt:
            raise IntegrityError(f"stream {name} does not match its manifest digest", stream=name)
        return data

    names = header.stream_names
    with ThreadPoolExecutor(max_workers=len(names)) as pool:
        streams = dict(zip(names, pool.map(download, names)))
    return ProtectedContainer(header, streams)


def fetch_and_restore(key: SecretKey, manifest: DispersalManifest, credentials: Mapping[str, str] | str | None = None,
                      allow_corrupt: bool = False, workers: int = 1) -> RestoreResult:
    container = fetch(manifest, credentials, allow_corrupt)
    gone = tuple(n for n in container.missing() if n != "chk")
    if gone:
        raise AvailabilityError(f"fragment stream(s) {', '.join(gone)} unavailable", missing=gone)
    return restore_file(key, container, workers=workers)


def fragment_ratios(header: ContainerHeader) -> dict[str, float]:
    """Stored bytes per stream as a fraction of the original length."""
    if header.original_length == 0:
        return {n: 0.0 for n in header.stream_names}
    return {n: s / header.original_length for n, s in header.stream_sizes().items()}


def local_storage_footprint(manifest: DispersalManifest) -> float:
    """Bytes held on trusted targets divided by the original length."""
    total = manifest.header.original_length
    if total == 0:
        return 0.0
    local = sum(r.length for r in manifest.streams.values() if r.target.get("role") == TRUSTED)
    return local / total


# -- loopback blob server ----------------------------------------------------------

class _BlobHandler(http.server.BaseHTTPRequestHandler):
    server: "_BlobHTTPServer"
    protocol_version = "HTTP/1.1"

    def log_message(self, *args) -> None:  # keep test output quiet
        pass

    def _ident(self) -> str | None:
        m = re.fullmatch(r"/blobs/([0-9a-f]{64})", self.path)
        return m.group(1) if m else None

    def _authorised(self) -> bool:
        want = self.server.token
        return want is None or self.headers.get("Authorization") == f"Bearer {want}"

    def _reply(self, code: int, body: bytes = b"", headers: Mapping[str, str] | None = None) -> None:
        self.send_response(code)
        for k, v in (headers or {}).items():
            self.send_header(k, v)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if body and self.command != "HEAD":
            self.wfile.write(body)

    def _guard(self) -> str | None:
        if not self._authorised():
            self._reply(401)
            return None
        ident = self._ident()
        if ident is None:
            self._reply(404)
        return ident

    def do_PUT(self) -> None:
        length = int(self.headers.get("Content-Length", "0"))
        body = self.rfile.read(length)
        ident = self._guard()
        if ident is None:
            return
        if blob_id(body) != ident:
            self._reply(400)
            return
        path = self.server.root / ident
        if path.exists():
            self._reply(409)
            return
        path.write_bytes(body)
        self._reply(201)

    def do_GET(self) -> None:
        ident = self._guard()
        if ident is None:
            return
        path = self.server.root / ident
        if not path.exists():
            self._reply(404)
            return
        body = path.read_bytes()
        self._reply(200, body, {"Digest": _digest_header(body), "Content-Type": "application/octet-stream"})

    def do_HEAD(self) -> None:
        ident = self._guard()
        if ident is None:
            return
        self._reply(200 if (self.server.root / ident).exists() else 404)


class _BlobHTTPServer(http.server.ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr, root: Path, token: str | None):
        super().__init__(addr, _BlobHandler)
        self.root = root
        self.token = token


class BlobServer:
    """Directory-backed blob server on 127.0.0.1, run in a background thread."""

    def __init__(self, root: str | os.PathLike, token: str | None = None, port: int = 0):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._httpd = _BlobHTTPServer(("127.0.0.1", port), self.root, token)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "BlobServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self) -> "BlobServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
