"""Participant roster: identity, color, device binding, and live position.

Positions arrive as unreliable datagrams, so updates are last-writer-wins on
a per-participant sequence number: an update is accepted only if its sequence
exceeds the last accepted one. Replaying any permutation of the same update
set therefore converges to the same state.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import (
    ColorCollision,
    ConfigError,
    DeviceAlreadyBound,
    DuplicateParticipant,
    OutOfRoomBounds,
    UnknownParticipant,
)
from .space import SharedSpace, Vec2

# Wire ids are fixed 8-byte fields.
MAX_ID_BYTES = 8

Color = tuple[int, int, int]


@dataclass(frozen=True)
class ProxemicProfile:
    """Distance thresholds that drive every proximity rule.

    Entry thresholds come from the interaction zones (intimate 0.3 m,
    personal 0.6 m, display control within 1.5 m of the wall); exit
    thresholds add a small hysteresis band so sensor jitter at a boundary
    cannot flicker state. The band is kept below the intimate radius so it
    never changes zone semantics.
    """

    intimate_radius: float = 0.3
    personal_radius: float = 0.6
    bubble_enter: float = 1.2
    bubble_exit: float = 1.3
    moderator_depth: float = 1.5
    moderator_exit: float = 1.6
    intimate_exit: float = 0.35
    alert_interval: float = 1.0

    def __post_init__(self):
        if not (0 < self.intimate_radius < self.personal_radius):
            raise ConfigError(
                f"need 0 < intimate_radius ({self.intimate_radius}) "
                f"< personal_radius ({self.personal_radius})"
            )
        if not math.isclose(self.bubble_enter, 2 * self.personal_radius):
            raise ConfigError(
                f"bubble_enter ({self.bubble_enter}) must equal twice the "
                f"personal radius ({2 * self.personal_radius})"
            )
        if self.bubble_exit < self.bubble_enter:
            raise ConfigError(
                f"bubble_exit ({self.bubble_exit}) must be >= bubble_enter ({self.bubble_enter})"
            )
        if self.moderator_exit < self.moderator_depth:
            raise ConfigError(
                f"moderator_exit ({self.moderator_exit}) must be >= "
                f"moderator_depth ({self.moderator_depth})"
            )
        if self.intimate_exit < self.intimate_radius:
            raise ConfigError(
                f"intimate_exit ({self.intimate_exit}) must be >= "
                f"intimate_radius ({self.intimate_radius})"
            )
        if self.alert_interval <= 0:
            raise ConfigError("alert_interval must be positive")

    @classmethod
    def from_overrides(cls, **overrides: float) -> "ProxemicProfile":
        """Build a profile from defaults plus explicit overrides.

        bubble_enter / bubble_exit / moderator_exit / intimate_exit are
        re-derived from overridden radii unless given explicitly, so that
        `personal_radius=0.7` alone still yields a valid profile.
        """
        vals = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(vals) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown profile fields: {sorted(unknown)}")
        personal = vals.get("personal_radius", cls.personal_radius)
        intimate = vals.get("intimate_radius", cls.intimate_radius)
        vals.setdefault("bubble_enter", 2 * personal)
        vals.setdefault("bubble_exit", vals["bubble_enter"] + 0.1)
        vals.setdefault("moderator_exit", vals.get("moderator_depth", cls.moderator_depth) + 0.1)
        vals.setdefault("intimate_exit", intimate + 0.05)
        return cls(**vals)


@dataclass
class Participant:
    id: str
    name: str
    color: Color
    home_room: str
    position: Optional[Vec2] = None
    last_seq: int = 0
    device: Optional[str] = None
    joined_at: float = 0.0
    last_update_at: float = 0.0

    @property
    def eligible(self) -> bool:
        """Interaction-eligible: device bound and at least one position seen."""
        return self.device is not None and self.position is not None


def check_wire_id(kind: str, value: str) -> str:
    raw = value.encode("utf-8", errors="strict")
    if not raw or len(raw) > MAX_ID_BYTES or b"\x00" in raw:
        raise ConfigError(f"{kind} id {value!r} must be 1..{MAX_ID_BYTES} bytes with no NULs")
    return value


class Roster:
    """Active participants, keyed by id. All mutations go through one loop."""

    def __init__(self, space: SharedSpace):
        self.space = space
        self.participants: dict[str, Participant] = {}

    def join(self, participant_id: str, name: str, home_room: str, color: Color,
             now: float = 0.0) -> Participant:
        check_wire_id("participant", participant_id)
        self.space.room(home_room)  # raises UnknownRoom
        existing = self.participants.get(participant_id)
        if existing is not None:
            # Datagram retransmits must be harmless: an identical re-join is
            # acknowledged, a conflicting one is rejected.
            if (existing.name, existing.home_room, existing.color) == (name, home_room, color):
                return existing
            raise DuplicateParticipant(f"participant {participant_id!r} already active")
        for other in self.participants.values():
            if other.color == tuple(color):
                raise ColorCollision(
                    f"color {tuple(color)} already used by {other.id!r}"
                )
        p = Participant(
            id=participant_id,
            name=name,
            color=(int(color[0]), int(color[1]), int(color[2])),
            home_room=home_room,
            joined_at=now,
            last_update_at=now,
        )
        self.participants[participant_id] = p
        return p

    def get(self, participant_id: str) -> Participant:
        try:
            return self.participants[participant_id]
        except KeyError:
            raise UnknownParticipant(f"no participant {participant_id!r}") from None

    def bind_device(self, participant_id: str, device: str) -> Participant:
        check_wire_id("device", device)
        p = self.get(participant_id)
        for other in self.participants.values():
            if other.device == device and other.id != participant_id:
                raise DeviceAlreadyBound(
                    f"device {device!r} already bound to {other.id!r}"
                )
        p.device = device
        return p

    def update_position(self, participant_id: str, local: Vec2, seq: int,
                        now: float = 0.0) -> bool:
        """Apply a position datagram; returns False for stale sequence numbers."""
        p = self.get(participant_id)
        if seq <= p.last_seq:
            return False
        virtual = self.space.to_virtual(p.home_room, local)  # raises OutOfRoomBounds
        p.position = virtual
        p.last_seq = seq
        p.last_update_at = now
        return True

    def remove(self, participant_id: str) -> Participant:
        return self.participants.pop(participant_id)

    def silent_since(self, cutoff: float) -> list[Participant]:
        """Participants whose last accepted update is older than cutoff."""
        return [
            p for p in sorted(self.participants.values(), key=lambda p: p.id)
            if p.last_update_at < cutoff
        ]

    def positioned(self) -> dict[str, Vec2]:
        return {
            pid: p.position
            for pid, p in sorted(self.participants.items())
            if p.position is not None
        }

    def eligible_positions(self) -> dict[str, Vec2]:
        return {
            pid: p.position
            for pid, p in sorted(self.participants.items())
            if p.eligible
        }

    def colors(self) -> dict[str, Color]:
        return {pid: p.color for pid, p in self.participants.items()}
