"""Who controls the shared wall display.

The strip within 1.5 m of the display wall, laterally bounded by the display
segment, is the control zone. Whoever stands there first holds the display;
the role changes hands only after the holder leaves the zone (with a small
exit hysteresis), and then passes to whoever else is already standing inside,
nearest the wall.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .participants import ProxemicProfile
from .space import Vec2


@dataclass(frozen=True)
class ModeratorState:
    holder: Optional[str] = None
    since: float = 0.0


@dataclass(frozen=True)
class ModeratorEvent:
    kind: str  # Acquired | Released | HandedOver
    from_id: Optional[str]
    to_id: Optional[str]


def in_moderator_space(p: Vec2, display_interval: tuple[float, float],
                       profile: ProxemicProfile, holder: bool = False) -> bool:
    depth = profile.moderator_exit if holder else profile.moderator_depth
    x0, x1 = display_interval
    return p.y <= depth and x0 <= p.x <= x1


def _nearest_inside(positions: dict[str, Vec2], display_interval: tuple[float, float],
                    profile: ProxemicProfile, exclude: Optional[str] = None) -> Optional[str]:
    candidates = [
        (pos.y, pid)
        for pid, pos in positions.items()
        if pid != exclude and in_moderator_space(pos, display_interval, profile)
    ]
    if not candidates:
        return None
    return min(candidates)[1]


def step(state: ModeratorState, positions: dict[str, Vec2],
         display_interval: tuple[float, float], profile: ProxemicProfile,
         now: float) -> tuple[ModeratorState, list[ModeratorEvent]]:
    """Advance the state machine for one snapshot of eligible positions.

    While the holder remains inside the exit-threshold region nothing
    changes, whatever the others do. Once the holder is gone, the role is
    handed to the nearest-to-display occupant if any, else released.
    """
    holder = state.holder
    if holder is not None:
        pos = positions.get(holder)
        if pos is not None and in_moderator_space(pos, display_interval, profile, holder=True):
            return state, []
        successor = _nearest_inside(positions, display_interval, profile, exclude=holder)
        if successor is not None:
            return (ModeratorState(successor, now),
                    [ModeratorEvent("HandedOver", holder, successor)])
        return ModeratorState(None, now), [ModeratorEvent("Released", holder, None)]

    entrant = _nearest_inside(positions, display_interval, profile)
    if entrant is not None:
        return ModeratorState(entrant, now), [ModeratorEvent("Acquired", None, entrant)]
    return state, []
