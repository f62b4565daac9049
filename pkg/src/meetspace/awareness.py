"""Everything rendered or felt: floor circles, boundary markers, glowing
paths, haptic alerts, and wall shadows, derived per room from one state
snapshot.

Each room gets its own frame. A participant whose shared-plane position
falls inside the viewing room appears as a full floor circle; anyone outside
is drawn as a semi-circle pinned to the nearest point of that room's
boundary, pointing at them. Wall shadows are cast by a 45-degree light, so
shadow height is simply person height minus distance to the wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .bubbles import SocialBubble
from .participants import Color, Participant, ProxemicProfile
from .space import Rect, SharedSpace, Vec2

DEFAULT_PERSON_HEIGHT_M = 1.8
SHADOW_WIDTH_M = 0.5
PATH_TTL_S = 10.0


@dataclass(frozen=True)
class FloorCircle:
    participant: str
    label: str
    center: Vec2
    intimate_radius: float
    personal_radius: float
    intimate_color: Color
    personal_color: Color
    bubble: Optional[str]


@dataclass(frozen=True)
class EdgeMarker:
    participant: str
    label: str
    anchor: Vec2
    direction: Vec2  # unit vector toward the true position
    color: Color
    blank_intimate: bool = True


@dataclass(frozen=True)
class GlowingPath:
    target_room: str
    start: Vec2  # the target's position
    end: Vec2    # the requester's position, clamped into the target's room
    requester: str
    target: str
    expires_at: float


@dataclass(frozen=True)
class HapticAlert:
    device: str
    victim: str
    intruder: str


@dataclass(frozen=True)
class WallShadow:
    participant: str
    label: str
    base_x: float
    height: float
    width: float
    color: Color
    is_moderator: bool
    aura_color: Optional[Color]


@dataclass
class AwarenessFrame:
    room: str
    circles: list[FloorCircle] = field(default_factory=list)
    markers: list[EdgeMarker] = field(default_factory=list)
    paths: list[GlowingPath] = field(default_factory=list)
    shadows: list[WallShadow] = field(default_factory=list)
    moderator: Optional[str] = None
    bubbles: list[SocialBubble] = field(default_factory=list)
    alerts: list[HapticAlert] = field(default_factory=list)


def wall_shadow(p: Participant, is_moderator: bool, aura: Optional[Color],
                height: float = DEFAULT_PERSON_HEIGHT_M) -> WallShadow:
    """Shadow cast on the display wall by a 45-degree light from behind."""
    assert p.position is not None
    return WallShadow(
        participant=p.id,
        label=p.name,
        base_x=p.position.x,
        height=max(0.0, height - p.position.y),
        width=SHADOW_WIDTH_M,
        color=p.color,
        is_moderator=is_moderator,
        aura_color=aura,
    )


def edge_marker(p: Participant, room_rect: Rect) -> EdgeMarker:
    assert p.position is not None
    anchor = room_rect.closest_boundary_point(p.position)
    dx, dy = p.position.x - anchor.x, p.position.y - anchor.y
    norm = math.hypot(dx, dy)
    direction = Vec2(dx / norm, dy / norm) if norm > 0 else Vec2(0.0, 1.0)
    return EdgeMarker(p.id, p.name, anchor, direction, p.color)


class IntimateAlertTracker:
    """Rate-limited intimate-space alerts with exit hysteresis.

    A (victim, intruder) pair becomes active when the intruder's center
    enters the victim's intimate circle and stays active until they separate
    past the exit distance. While active, at most one alert per pair per
    alert interval is emitted; the emission clock also spans brief exits so
    re-entry cannot beat the rate limit.
    """

    def __init__(self, profile: ProxemicProfile):
        self.profile = profile
        self.active: set[tuple[str, str]] = set()
        self.last_emit: dict[tuple[str, str], float] = {}

    def step(self, participants: dict[str, Participant], now: float) -> list[HapticAlert]:
        # Victims must hold a device to feel anything; intruders must be
        # interaction-eligible. Both reduce to device-bound with a position.
        bound = {
            pid: p for pid, p in participants.items()
            if p.device is not None and p.position is not None
        }
        alerts: list[HapticAlert] = []
        next_active: set[tuple[str, str]] = set()
        for victim_id in sorted(bound):
            victim = bound[victim_id]
            for intruder_id in sorted(bound):
                if intruder_id == victim_id:
                    continue
                pair = (victim_id, intruder_id)
                d = victim.position.dist(bound[intruder_id].position)
                inside = d <= self.profile.intimate_radius
                lingering = pair in self.active and d <= self.profile.intimate_exit
                if not (inside or lingering):
                    continue
                next_active.add(pair)
                last = self.last_emit.get(pair)
                if last is None or now - last >= self.profile.alert_interval:
                    self.last_emit[pair] = now
                    alerts.append(HapticAlert(victim.device, victim_id, intruder_id))
        self.active = next_active
        return alerts


def clamp_into_room(space: SharedSpace, room_id: str, point: Vec2) -> Vec2:
    return space.room(room_id).virtual_rect.clamp(point)


def derive_frames(
    space: SharedSpace,
    participants: dict[str, Participant],
    bubbles: dict[str, SocialBubble],
    moderator: Optional[str],
    paths: list[GlowingPath],
    alerts: list[HapticAlert],
    profile: ProxemicProfile,
    person_height: float = DEFAULT_PERSON_HEIGHT_M,
) -> dict[str, AwarenessFrame]:
    """Build one frame per room from a consistent snapshot."""
    bubble_of: dict[str, SocialBubble] = {}
    for bubble in bubbles.values():
        for member in bubble.members:
            bubble_of[member] = bubble

    placed = [p for _, p in sorted(participants.items()) if p.position is not None]
    shadows = [
        wall_shadow(
            p,
            is_moderator=(p.id == moderator),
            aura=bubble_of[p.id].color if p.id in bubble_of else None,
            height=person_height,
        )
        for p in placed
    ]

    frames: dict[str, AwarenessFrame] = {}
    for room_id in sorted(space.rooms):
        rect = space.rooms[room_id].virtual_rect
        frame = AwarenessFrame(room=room_id, moderator=moderator)
        for p in placed:
            if rect.contains(p.position):
                bubble = bubble_of.get(p.id)
                frame.circles.append(FloorCircle(
                    participant=p.id,
                    label=p.name,
                    center=p.position,
                    intimate_radius=profile.intimate_radius,
                    personal_radius=profile.personal_radius,
                    intimate_color=p.color,
                    personal_color=bubble.color if bubble else p.color,
                    bubble=bubble.id if bubble else None,
                ))
            else:
                frame.markers.append(edge_marker(p, rect))
        frame.shadows = shadows
        frame.paths = [path for path in paths if path.target_room == room_id]
        frame.bubbles = [bubbles[bid] for bid in sorted(bubbles)]
        frame.alerts = list(alerts)
        frames[room_id] = frame
    return frames


def frame_to_json(frame: AwarenessFrame, space: SharedSpace, now: float,
                  seqs: dict[str, int], rooms_of: dict[str, str]) -> dict:
    """Serializable form of a frame (documented schema, consumed by UIs)."""
    rect = space.rooms[frame.room].virtual_rect
    return {
        "room": frame.room,
        "t": round(now, 3),
        "bounds": [rect.x0, rect.y0, rect.x1, rect.y1],
        "display": list(space.display_interval()),
        "circles": [
            {
                "participant": c.participant,
                "label": c.label,
                "center": [round(c.center.x, 3), round(c.center.y, 3)],
                "intimate_radius": c.intimate_radius,
                "personal_radius": c.personal_radius,
                "intimate_color": list(c.intimate_color),
                "personal_color": list(c.personal_color),
                "bubble": c.bubble,
            }
            for c in frame.circles
        ],
        "markers": [
            {
                "participant": m.participant,
                "label": m.label,
                "anchor": [round(m.anchor.x, 3), round(m.anchor.y, 3)],
                "direction": [round(m.direction.x, 4), round(m.direction.y, 4)],
                "color": list(m.color),
                "blank_intimate": m.blank_intimate,
            }
            for m in frame.markers
        ],
        "paths": [
            {
                "requester": p.requester,
                "target": p.target,
                "from": [round(p.start.x, 3), round(p.start.y, 3)],
                "to": [round(p.end.x, 3), round(p.end.y, 3)],
                "expires_t": round(p.expires_at, 3),
            }
            for p in frame.paths
        ],
        "shadows": [
            {
                "participant": s.participant,
                "label": s.label,
                "base_x": round(s.base_x, 3),
                "height": round(s.height, 3),
                "width": s.width,
                "color": list(s.color),
                "is_moderator": s.is_moderator,
                "aura_color": list(s.aura_color) if s.aura_color else None,
            }
            for s in frame.shadows
        ],
        "moderator": frame.moderator,
        "bubbles": [
            {"id": b.id, "members": sorted(b.members), "color": list(b.color)}
            for b in frame.bubbles
        ],
        "alerts": [
            {"device": a.device, "victim": a.victim, "intruder": a.intruder}
            for a in frame.alerts
        ],
        "seqs": dict(sorted(seqs.items())),
        "rooms_of": dict(sorted(rooms_of.items())),
    }
