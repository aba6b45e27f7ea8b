"""Append-only, checksummed event log.

Each record is [length u32][crc32 u32][payload JSON]. Appends flush and
fsync before returning, so an acknowledged event survives a crash.
Recovery scans from the start; the first short or corrupt record ends the
readable prefix and the file is truncated there (a torn tail can only be
an event that was never acknowledged).
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from pathlib import Path

_HEADER = struct.Struct("<II")


class EventLog:
    """Single-appender durable log of JSON events."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "ab")

    def append(self, event: dict) -> None:
        payload = json.dumps(event, separators=(",", ":"), sort_keys=True).encode("utf-8")
        self._fh.write(_HEADER.pack(len(payload), zlib.crc32(payload)))
        self._fh.write(payload)
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_events(path: str | Path) -> tuple[list[dict], bytes | None]:
    """All intact events plus the torn tail payload bytes, if any.

    A missing file reads as an empty log.
    """
    path = Path(path)
    if not path.exists():
        return [], None
    data = path.read_bytes()
    events: list[dict] = []
    offset = 0
    while offset < len(data):
        if offset + _HEADER.size > len(data):
            return events, data[offset:]
        length, crc = _HEADER.unpack_from(data, offset)
        start = offset + _HEADER.size
        end = start + length
        payload = data[start:end]
        if len(payload) < length or zlib.crc32(payload) != crc:
            return events, data[offset:]
        try:
            events.append(json.loads(payload))
        except ValueError:
            return events, data[offset:]
        offset = end
    return events, None


def recover(path: str | Path) -> tuple[list[dict], bytes | None]:
    """Read intact events and truncate any torn tail off the file."""
    path = Path(path)
    events, torn = read_events(path)
    if torn is not None:
        good_size = path.stat().st_size - len(torn)
        with open(path, "r+b") as fh:
            fh.truncate(good_size)
    return events, torn
