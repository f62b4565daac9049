"""Shared metric floor plane built by merging physical rooms.

Every room is registered with its wall display lying on the y=0 wall.
Rooms are merged by pure translation: each room's display-segment midpoint
maps to virtual x=0 and its display wall to virtual y=0, so a one-meter
displacement in any room is a one-meter displacement in the shared plane
and the display sits at the same virtual spot for everyone.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import ConfigError, InvalidDimensions, InvalidDisplaySegment, OutOfRoomBounds, UnknownRoom

# Multi-camera tracking rigs cover at most this diameter.
MAX_ROOM_EXTENT_M = 6.4

ROOM_CONFIG_VERSION = 1


@dataclass(frozen=True)
class Vec2:
    """A point on the floor plane, in meters. y grows away from the display wall."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def dist(self, other: "Vec2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    def contains(self, p: Vec2) -> bool:
        return self.x0 <= p.x <= self.x1 and self.y0 <= p.y <= self.y1

    def clamp(self, p: Vec2) -> Vec2:
        return Vec2(min(max(p.x, self.x0), self.x1), min(max(p.y, self.y0), self.y1))

    def closest_boundary_point(self, p: Vec2) -> Vec2:
        """Nearest point of the rectangle's boundary to p.

        For points outside the rectangle this equals the plain clamp; for
        inside points the nearest edge is projected onto instead.
        """
        if not self.contains(p):
            return self.clamp(p)
        candidates = [
            Vec2(self.x0, p.y),
            Vec2(self.x1, p.y),
            Vec2(p.x, self.y0),
            Vec2(p.x, self.y1),
        ]
        return min(candidates, key=lambda c: (c.dist(p), c.x, c.y))


@dataclass(frozen=True)
class Room:
    """A physical room: width along the display wall, depth away from it.

    The wall display occupies [display_x0, display_x1] on the room's y=0 wall.
    """

    id: str
    width: float
    depth: float
    display_x0: float
    display_x1: float

    def __post_init__(self):
        for name, v in (("width", self.width), ("depth", self.depth)):
            if not math.isfinite(v) or v <= 0:
                raise InvalidDimensions(f"room {self.id!r}: {name} must be positive, got {v}")
            if v > MAX_ROOM_EXTENT_M:
                raise InvalidDimensions(
                    f"room {self.id!r}: {name}={v} exceeds tracked-area bound {MAX_ROOM_EXTENT_M}"
                )
        if not (
            math.isfinite(self.display_x0)
            and math.isfinite(self.display_x1)
            and 0 <= self.display_x0 < self.display_x1 <= self.width
        ):
            raise InvalidDisplaySegment(
                f"room {self.id!r}: display [{self.display_x0}, {self.display_x1}] "
                f"must satisfy 0 <= x0 < x1 <= width={self.width}"
            )

    @property
    def display_mid(self) -> float:
        return (self.display_x0 + self.display_x1) / 2.0

    @property
    def anchor(self) -> Vec2:
        """Translation that maps local coordinates into the shared plane."""
        return Vec2(-self.display_mid, 0.0)

    @property
    def virtual_rect(self) -> Rect:
        return Rect(-self.display_mid, 0.0, self.width - self.display_mid, self.depth)

    def local_rect(self) -> Rect:
        return Rect(0.0, 0.0, self.width, self.depth)


class SharedSpace:
    """Registry of rooms merged into one shared floor plane."""

    def __init__(self, rooms: Iterable[Room] = ()):
        self.rooms: dict[str, Room] = {}
        for room in rooms:
            self.add_room(room)

    def register_room(self, room_id: str, width: float, depth: float,
                      display_segment: tuple[float, float]) -> str:
        self.add_room(Room(room_id, width, depth, display_segment[0], display_segment[1]))
        return room_id

    def add_room(self, room: Room) -> None:
        if room.id in self.rooms:
            raise ConfigError(f"duplicate room id {room.id!r}")
        self.rooms[room.id] = room

    def room(self, room_id: str) -> Room:
        try:
            return self.rooms[room_id]
        except KeyError:
            raise UnknownRoom(f"room {room_id!r} is not registered") from None

    def to_virtual(self, room_id: str, local: Vec2) -> Vec2:
        room = self.room(room_id)
        if not room.local_rect().contains(local):
            raise OutOfRoomBounds(
                f"({local.x}, {local.y}) outside room {room_id!r} "
                f"({room.width} x {room.depth})"
            )
        return local + room.anchor

    def to_local(self, room_id: str, virtual: Vec2) -> Vec2:
        room = self.room(room_id)
        return virtual - room.anchor

    def in_room_bounds(self, room_id: str, virtual: Vec2) -> bool:
        return self.room(room_id).virtual_rect.contains(virtual)

    def bounds(self) -> Rect:
        """Axis-aligned union of all mapped room rectangles."""
        if not self.rooms:
            raise ConfigError("no rooms registered")
        rects = [r.virtual_rect for r in self.rooms.values()]
        return Rect(
            min(r.x0 for r in rects),
            min(r.y0 for r in rects),
            max(r.x1 for r in rects),
            max(r.y1 for r in rects),
        )

    def display_interval(self) -> tuple[float, float]:
        """Lateral x-extent of the shared display: union of mapped segments.

        Segments are midpoint-aligned at x=0, so the union is one interval.
        """
        if not self.rooms:
            raise ConfigError("no rooms registered")
        lo = min(r.display_x0 - r.display_mid for r in self.rooms.values())
        hi = max(r.display_x1 - r.display_mid for r in self.rooms.values())
        return (lo, hi)


def rooms_to_config(space: SharedSpace) -> dict:
    return {
        "version": ROOM_CONFIG_VERSION,
        "rooms": [
            {
                "id": r.id,
                "width_m": r.width,
                "depth_m": r.depth,
                "display_x0_m": r.display_x0,
                "display_x1_m": r.display_x1,
            }
            for r in space.rooms.values()
        ],
    }


def rooms_from_config(doc: dict) -> SharedSpace:
    """Build a SharedSpace from the room configuration document."""
    if not isinstance(doc, dict) or "rooms" not in doc:
        raise ConfigError("room config must be an object with a 'rooms' list")
    version = doc.get("version", ROOM_CONFIG_VERSION)
    if version != ROOM_CONFIG_VERSION:
        raise ConfigError(f"unsupported room config version {version!r}")
    rooms_field = doc["rooms"]
    if not isinstance(rooms_field, list) or not rooms_field:
        raise ConfigError("'rooms' must be a non-empty list")
    space = SharedSpace()
    for entry in rooms_field:
        try:
            room = Room(
                id=str(entry["id"]),
                width=float(entry["width_m"]),
                depth=float(entry["depth_m"]),
                display_x0=float(entry["display_x0_m"]),
                display_x1=float(entry["display_x1_m"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad room entry {entry!r}: {exc}") from exc
        space.add_room(room)
    return space


def load_rooms_file(path: str) -> SharedSpace:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read room config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"room config {path!r} is not valid JSON: {exc}") from exc
    return rooms_from_config(doc)


def rooms_config_hash(space: SharedSpace) -> str:
    """Stable digest of the room layout, used to pin traces to a floor plan."""
    doc = rooms_to_config(space)
    doc["rooms"].sort(key=lambda r: r["id"])
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return "sha256:" + hashlib.sha256(blob).hexdigest()[:16]
