"""Durable storage: content-addressed blobs and append-only event logs.

Artifacts (images, masks, job records) are written once under their SHA-256
digest, so identical content shares one file and references are verifiable.
Each session appends JSON events to its own log file; replaying a log
reconstructs the session exactly. No database -- everything is plain files,
diffable and greppable.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import os
import tempfile
import threading
from pathlib import Path
from typing import Iterator

from modiste.errors import NotFoundError, ParameterError


def canonical_json(obj) -> str:
    """Stable serialization: sorted keys, compact separators, no NaN."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


_HEX = set("0123456789abcdef")


def _check_ref(ref: str) -> str:
    if len(ref) != 64 or not set(ref) <= _HEX:
        raise ParameterError(f"not a content reference: {ref!r}")
    return ref


class BlobStore:
    """Write-once files named by their SHA-256 digest.

    Layout fans out on the first two digest bytes (objects/ab/cd/<digest>) to
    keep directories small. A sidecar `<digest>.type` records the media type.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "objects").mkdir(parents=True, exist_ok=True)

    def _path(self, ref: str) -> Path:
        return self.root / "objects" / ref[:2] / ref[2:4] / ref

    def put(self, data: bytes, media_type: str = "application/octet-stream") -> str:
        if not isinstance(data, (bytes, bytearray)):
            raise ParameterError("blob payload must be bytes")
        ref = content_hash(bytes(data))
        path = self._path(ref)
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".in-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                os.replace(tmp, path)
            except BaseException:
                with contextlib.suppress(OSError):
                    os.unlink(tmp)
                raise
            path.with_suffix(".type").write_text(media_type, encoding="utf-8")
        return ref

    def put_json(self, obj) -> str:
        return self.put(canonical_json(obj).encode("utf-8"), "application/json")

    def get(self, ref: str) -> bytes:
        path = self._path(_check_ref(ref))
        if not path.exists():
            raise NotFoundError(f"no artifact {ref}")
        return path.read_bytes()

    def get_json(self, ref: str):
        return json.loads(self.get(ref).decode("utf-8"))

    def media_type(self, ref: str) -> str:
        path = self._path(_check_ref(ref)).with_suffix(".type")
        if not path.exists():
            raise NotFoundError(f"no artifact {ref}")
        return path.read_text(encoding="utf-8")

    def has(self, ref: str) -> bool:
        return self._path(_check_ref(ref)).exists()


class EventLog:
    """Append-only JSON-lines file; each line is one event with a sequence number.

    Appends are serialized per instance; reads snapshot whatever has been
    written so far and never block writers.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._next_seq = self._scan_next_seq()

    def _scan_next_seq(self) -> int:
        if not self.path.exists():
            return 0
        last = None
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    last = json.loads(line)
        return (last["seq"] + 1) if last is not None else 0

    def append(self, event: dict) -> dict:
        if "seq" in event:
            raise ParameterError("sequence numbers are assigned by the log")
        with self._lock:
            record = {"seq": self._next_seq, **event}
            line = canonical_json(record)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._next_seq += 1
        return record

    def read_all(self) -> list[dict]:
        if not self.path.exists():
            return []
        events = []
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    events.append(json.loads(line))
        return events

    def __iter__(self) -> Iterator[dict]:
        return iter(self.read_all())

    def __len__(self) -> int:
        return len(self.read_all())


class SessionStore:
    """One blob store shared by all sessions plus a log file per session."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.blobs = BlobStore(self.root)
        self._logs_dir = self.root / "sessions"
        self._logs_dir.mkdir(parents=True, exist_ok=True)

    def log_for(self, session_id: str) -> EventLog:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise ParameterError(f"bad session id {session_id!r}")
        return EventLog(self._logs_dir / f"{session_id}.jsonl")

    def log_path(self, session_id: str) -> Path:
        return self._logs_dir / f"{session_id}.jsonl"

    def session_ids(self) -> list[str]:
        return sorted(p.stem for p in self._logs_dir.glob("*.jsonl"))
