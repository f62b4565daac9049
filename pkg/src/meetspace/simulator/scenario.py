"""Scripted scenarios: a floor plan, a cast, timed waypoints and actions,
and the ordered event patterns the run is expected to produce.

The five built-in scenarios reconstruct the standard evaluation drills:
taking control of the wall display, forming a bubble with a co-located and
then with a remote peer, being pursued into one's intimate space by a bot,
and crossing a floor populated by remote bystanders without stepping on
anyone. Their exact choreography (distances, timings) is representative,
not prescribed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from ..errors import ScenarioError
from ..participants import ProxemicProfile
from ..space import SharedSpace, Vec2, rooms_from_config

SCENARIO_VERSION = 1

DEFAULT_TICK_HZ = 20
DEFAULT_UPDATE_HZ = 10
DEFAULT_WALK_SPEED = 1.0
DEFAULT_PURSUER_SPEED = 0.8

TWO_ROOMS = {
    "version": 1,
    "rooms": [
        {"id": "roomA", "width_m": 4.0, "depth_m": 4.0,
         "display_x0_m": 1.0, "display_x1_m": 3.0},
        {"id": "roomB", "width_m": 6.0, "depth_m": 3.6,
         "display_x0_m": 2.0, "display_x1_m": 4.0},
    ],
}


@dataclass(frozen=True)
class CastMember:
    id: str
    room: str
    color: tuple[int, int, int]
    name: str = ""
    device: Optional[str] = None
    start: Optional[tuple[float, float]] = None  # local coordinates
    speed: float = DEFAULT_WALK_SPEED
    pursue: Optional[str] = None  # bot: chase this participant
    pursue_speed: float = DEFAULT_PURSUER_SPEED


@dataclass(frozen=True)
class ScriptAction:
    t: float
    do: str  # move_to | teleport | bind | request | payload | leave
    args: dict[str, Any] = field(default_factory=dict)


@dataclass
class Scenario:
    name: str
    rooms: dict
    cast: list[CastMember]
    script: list[ScriptAction]
    expected_events: list[dict]
    duration: float
    tick_hz: int = DEFAULT_TICK_HZ
    update_hz: int = DEFAULT_UPDATE_HZ
    profile_overrides: dict[str, float] = field(default_factory=dict)
    path_check: Optional[dict] = None

    def space(self) -> SharedSpace:
        return rooms_from_config(self.rooms)

    def profile(self) -> ProxemicProfile:
        return ProxemicProfile.from_overrides(**self.profile_overrides)

    def validate(self) -> None:
        if self.tick_hz <= 0 or self.update_hz <= 0 or self.tick_hz % self.update_hz:
            raise ScenarioError(
                f"tick_hz ({self.tick_hz}) must be a positive multiple of "
                f"update_hz ({self.update_hz})")
        if self.duration <= 0:
            raise ScenarioError("duration must be positive")
        space = self.space()
        ids = {m.id for m in self.cast}
        if len(ids) != len(self.cast):
            raise ScenarioError("duplicate cast ids")
        for member in self.cast:
            if member.room not in space.rooms:
                raise ScenarioError(f"cast member {member.id!r} in unknown room {member.room!r}")
            if member.start is not None:
                local = Vec2(*member.start)
                if not space.rooms[member.room].local_rect().contains(local):
                    raise ScenarioError(f"{member.id!r} starts outside {member.room!r}")
            if member.pursue is not None and member.pursue not in ids:
                raise ScenarioError(f"{member.id!r} pursues unknown {member.pursue!r}")
        for action in self.script:
            if action.do not in ("move_to", "teleport", "bind", "request", "payload", "leave"):
                raise ScenarioError(f"unknown script action {action.do!r}")
            who = action.args.get("participant") or action.args.get("requester")
            if who is not None and who not in ids:
                raise ScenarioError(f"script references unknown participant {who!r}")
        for pattern in self.expected_events:
            for pid in pattern.get("participants", []):
                if pid not in ids:
                    raise ScenarioError(f"expected event references unknown {pid!r}")

    # -- JSON ------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": SCENARIO_VERSION,
            "name": self.name,
            "rooms": self.rooms,
            "tick_hz": self.tick_hz,
            "update_hz": self.update_hz,
            "duration_s": self.duration,
            "profile": self.profile_overrides,
            "cast": [
                {k: v for k, v in {
                    "id": m.id, "name": m.name or m.id, "room": m.room,
                    "color": list(m.color), "device": m.device,
                    "start": list(m.start) if m.start else None,
                    "speed": m.speed, "pursue": m.pursue,
                    "pursue_speed": m.pursue_speed if m.pursue else None,
                }.items() if v is not None}
                for m in self.cast
            ],
            "script": [{"t": a.t, "do": a.do, **a.args} for a in self.script],
            "expected_events": self.expected_events,
            **({"path_check": self.path_check} if self.path_check else {}),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        if not isinstance(doc, dict):
            raise ScenarioError("scenario must be a JSON object")
        if doc.get("version", SCENARIO_VERSION) != SCENARIO_VERSION:
            raise ScenarioError(f"unsupported scenario version {doc.get('version')!r}")
        try:
            cast = [
                CastMember(
                    id=str(m["id"]),
                    room=str(m["room"]),
                    color=tuple(int(c) for c in m["color"]),
                    name=str(m.get("name", m["id"])),
                    device=m.get("device"),
                    start=tuple(float(v) for v in m["start"]) if m.get("start") else None,
                    speed=float(m.get("speed", DEFAULT_WALK_SPEED)),
                    pursue=m.get("pursue"),
                    pursue_speed=float(m.get("pursue_speed", DEFAULT_PURSUER_SPEED)),
                )
                for m in doc.get("cast", [])
            ]
            script = [
                ScriptAction(
                    t=float(entry["t"]),
                    do=str(entry["do"]),
                    args={k: v for k, v in entry.items() if k not in ("t", "do")},
                )
                for entry in doc.get("script", [])
            ]
            scenario = cls(
                name=str(doc.get("name", "scenario")),
                rooms=doc["rooms"],
                cast=cast,
                script=sorted(script, key=lambda a: a.t),
                expected_events=list(doc.get("expected_events", [])),
                duration=float(doc["duration_s"]),
                tick_hz=int(doc.get("tick_hz", DEFAULT_TICK_HZ)),
                update_hz=int(doc.get("update_hz", DEFAULT_UPDATE_HZ)),
                profile_overrides=dict(doc.get("profile", {})),
                path_check=doc.get("path_check"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad scenario document: {exc}") from exc
        scenario.validate()
        return scenario

    @classmethod
    def load(cls, path: str) -> "Scenario":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {path!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario {path!r} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


# -- built-in scenarios --------------------------------------------------

RED = (230, 25, 75)
GREEN = (60, 180, 75)
BLUE = (0, 130, 200)
ORANGE = (245, 130, 48)
PURPLE = (145, 30, 180)
CYAN = (70, 240, 240)
MAGENTA = (240, 50, 230)
OLIVE = (128, 128, 0)


def _task1() -> Scenario:
    return Scenario(
        name="task1",
        rooms=TWO_ROOMS,
        cast=[CastMember("subject", "roomA", RED, "Subject", device="d1",
                         start=(2.0, 3.5))],
        script=[
            ScriptAction(0.5, "move_to", {"participant": "subject", "to": [2.0, 1.0]}),
            ScriptAction(4.5, "payload", {"participant": "subject", "hex": "73796e63"}),
        ],
        expected_events=[
            {"kind": "ModeratorAcquired", "participants": ["subject"]},
            {"kind": "SpeechChannelOpened", "participants": ["subject"]},
            {"kind": "ModeratorBroadcast", "participants": ["subject"]},
        ],
        duration=6.0,
    )


def _bubble_task(name: str, peer_room: str, peer_start: tuple[float, float]) -> Scenario:
    return Scenario(
        name=name,
        rooms=TWO_ROOMS,
        cast=[
            CastMember("subject", "roomA", RED, "Subject", device="d1",
                       start=(3.5, 2.0)),
            CastMember("peer", peer_room, GREEN, "Peer", device="d2",
                       start=peer_start),
        ],
        script=[
            ScriptAction(0.5, "move_to", {"participant": "subject", "to": [1.5, 2.0]}),
            ScriptAction(4.5, "move_to", {"participant": "subject", "to": [3.5, 2.0]}),
        ],
        expected_events=[
            {"kind": "BubbleCreated", "participants": ["subject", "peer"]},
            {"kind": "ChannelOpened", "participants": ["subject", "peer"]},
            {"kind": "BubbleDissolved", "participants": ["subject", "peer"]},
            {"kind": "ChannelClosed"},
        ],
        duration=8.0,
    )


def _task2() -> Scenario:
    # co-located: both in roomA, peer holds virtual (-1.5, 2.0)
    return _bubble_task("task2", "roomA", (0.5, 2.0))


def _task3() -> Scenario:
    # remote peer at the same virtual spot, reached from roomB
    return _bubble_task("task3", "roomB", (1.5, 2.0))


def _task4() -> Scenario:
    return Scenario(
        name="task4",
        rooms=TWO_ROOMS,
        cast=[
            CastMember("subject", "roomA", RED, "Subject", device="d1",
                       start=(2.0, 3.0), speed=0.6),
            CastMember("mod", "roomB", BLUE, "Moderator", device="d2",
                       start=(3.0, 1.0)),
            CastMember("pursuer", "roomB", ORANGE, "Pursuer", device="d3",
                       start=(0.5, 3.0), pursue="subject", pursue_speed=0.8),
        ],
        script=[
            ScriptAction(1.0, "move_to", {"participant": "subject", "to": [3.0, 3.0]}),
            ScriptAction(5.0, "move_to", {"participant": "subject", "to": [1.0, 2.5]}),
            ScriptAction(9.0, "move_to", {"participant": "subject", "to": [2.0, 3.0]}),
        ],
        expected_events=[
            {"kind": "ModeratorAcquired", "participants": ["mod"]},
            {"kind": "IntimateInvasion", "participants": ["subject", "pursuer"],
             "victim": "subject"},
        ],
        duration=15.0,
    )


def _task5() -> Scenario:
    bystanders = [
        CastMember(f"rem{i}", "roomB", color, f"Remote {i}",
                   start=(1.5 + i * 1.0, 2.0))
        for i, color in enumerate((PURPLE, CYAN, MAGENTA, OLIVE), start=1)
    ]
    return Scenario(
        name="task5",
        rooms=TWO_ROOMS,
        cast=[CastMember("subject", "roomA", RED, "Subject", device="d1",
                         start=(0.3, 2.7))] + bystanders,
        script=[
            ScriptAction(0.5, "move_to", {"participant": "subject", "to": [3.7, 2.7]}),
            ScriptAction(4.5, "move_to", {"participant": "subject", "to": [3.7, 2.4]}),
        ],
        expected_events=[],
        duration=6.0,
        path_check={"subject": "subject",
                    "remotes": ["rem1", "rem2", "rem3", "rem4"],
                    "max_violations": 0},
    )


BUILTIN_SCENARIOS = ("task1", "task2", "task3", "task4", "task5")

_BUILDERS = {
    "task1": _task1,
    "task2": _task2,
    "task3": _task3,
    "task4": _task4,
    "task5": _task5,
}


def builtin_scenario(name: str) -> Scenario:
    try:
        scenario = _BUILDERS[name]()
    except KeyError:
        raise ScenarioError(
            f"unknown scenario {name!r}; built-ins: {', '.join(BUILTIN_SCENARIOS)}"
        ) from None
    scenario.validate()
    return scenario
