"""Movement trace files: JSON lines, one position sample per line.

The header line pins the trace to a room layout by hash, so replaying a
trace against the wrong floor plan fails loudly instead of quietly mapping
positions into the wrong geometry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, TextIO

from ..errors import TraceFormatError
from ..space import SharedSpace, rooms_config_hash

TRACE_FORMAT = "meetspace-trace"
TRACE_VERSION = 1


@dataclass(frozen=True)
class TraceRecord:
    t: float
    participant: str
    room: str
    x: float  # local room coordinates, meters
    y: float


def write_trace(fh: TextIO, space: SharedSpace, records: Iterable[TraceRecord]) -> None:
    header = {"format": TRACE_FORMAT, "version": TRACE_VERSION,
              "rooms_hash": rooms_config_hash(space)}
    fh.write(json.dumps(header, separators=(",", ":")) + "\n")
    for rec in records:
        line = {"t": round(rec.t, 3), "participant": rec.participant,
                "room": rec.room, "x": round(rec.x, 3), "y": round(rec.y, 3)}
        fh.write(json.dumps(line, separators=(",", ":")) + "\n")


def read_trace(fh: TextIO, space: SharedSpace) -> list[TraceRecord]:
    lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise TraceFormatError("empty trace file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"bad header line: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != TRACE_FORMAT:
        raise TraceFormatError("not a movement trace (missing format header)")
    if header.get("version") != TRACE_VERSION:
        raise TraceFormatError(f"unsupported trace version {header.get('version')!r}")
    expected_hash = rooms_config_hash(space)
    if header.get("rooms_hash") != expected_hash:
        raise TraceFormatError(
            f"trace was recorded for rooms {header.get('rooms_hash')!r}, "
            f"got {expected_hash!r}")

    records = []
    last_t: dict[str, float] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            row = json.loads(line)
            rec = TraceRecord(float(row["t"]), str(row["participant"]),
                              str(row["room"]), float(row["x"]), float(row["y"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from exc
        if rec.t < last_t.get(rec.participant, float("-inf")):
            raise TraceFormatError(
                f"line {lineno}: time goes backwards for {rec.participant!r}")
        last_t[rec.participant] = rec.t
        records.append(rec)
    return records
