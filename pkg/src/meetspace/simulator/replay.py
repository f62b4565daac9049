"""Replay scenarios and traces into the engine, either in-process or through
the full datagram stack over a lossless in-memory loopback.

Both paths quantize time to the server tick and positions to the millimeter
wire grid, feed inputs in the same order, and therefore produce identical
event logs; replaying twice with the same seed is byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

from ..engine import Engine, EngineConfig
from ..errors import MeetspaceError, ScenarioError
from ..protocol import codec
from ..protocol.server import ServerConfig, ServerLoop
from ..protocol.transport import MemoryNetwork
from ..space import Rect, SharedSpace, Vec2
from .scenario import CastMember, Scenario
from .trace import TraceRecord

TRANSPORTS = ("inproc", "loopback")


def pursuer_step(pos: Vec2, target: Vec2, speed: float, dt: float,
                 bounds: Optional[Rect] = None) -> Vec2:
    """One kinematic step straight toward the target, without overshoot,
    clamped into the pursuer's room."""
    assert dt > 0
    dist = pos.dist(target)
    if dist <= speed * dt:
        new = target
    else:
        f = speed * dt / dist
        new = Vec2(pos.x + (target.x - pos.x) * f, pos.y + (target.y - pos.y) * f)
    if bounds is not None:
        new = bounds.clamp(new)
    return new


def task5_pathcheck(samples: list[Vec2], remotes: list[Vec2],
                    radius: float = 0.3) -> int:
    """Count trajectory samples that land inside any bystander's intimate circle."""
    return sum(
        1 for p in samples
        if any(p.dist(r) <= radius for r in remotes)
    )


def match_expectations(log: list[dict], patterns: list[dict]) -> list[dict]:
    """Ordered subsequence match; returns the patterns that never matched."""

    def matches(record: dict, pattern: dict) -> bool:
        if record.get("kind") != pattern.get("kind"):
            return False
        mentioned = set()
        for key in ("participants", "members"):
            mentioned.update(record.get(key, ()))
        for key in ("participant", "from", "to", "victim", "intruder",
                    "requester", "target"):
            if record.get(key) is not None:
                mentioned.add(record[key])
        for pid in pattern.get("participants", ()):
            if pid not in mentioned:
                return False
        for key, want in pattern.items():
            if key in ("kind", "participants"):
                continue
            if record.get(key) != want:
                return False
        return True

    remaining = list(patterns)
    for record in log:
        if remaining and matches(record, remaining[0]):
            remaining.pop(0)
    return remaining


@dataclass
class ReplayResult:
    scenario: str
    log: list[dict]
    trace: list[TraceRecord]
    unmatched: list[dict]
    violations: Optional[int] = None
    max_violations: int = 0

    @property
    def ok(self) -> bool:
        if self.unmatched:
            return False
        if self.violations is not None and self.violations > self.max_violations:
            return False
        return True


@dataclass
class _Mover:
    member: CastMember
    local: Optional[Vec2]
    seq: int = 0
    target: Optional[Vec2] = None
    speed: float = 1.0
    gone: bool = False

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq


class _InprocPort:
    """Feeds the engine directly."""

    def __init__(self, engine: Engine):
        self.engine = engine

    def join(self, m: CastMember) -> None:
        self.engine.join(m.id, m.name or m.id, m.room, m.color)

    def act(self, kind: str, about: str, fn) -> None:
        try:
            fn()
        except MeetspaceError as exc:
            self.engine.emit_transient("Error", code=exc.code, detail=str(exc),
                                       about=about)

    def bind(self, pid: str, device: str) -> None:
        self.act("bind", "BindDevice", lambda: self.engine.bind_device(pid, device))

    def update(self, pid: str, local: Vec2, seq: int) -> None:
        self.act("update", "PositionUpdate",
                 lambda: self.engine.update_position(pid, local, seq))

    def request(self, requester: str, target: str) -> None:
        self.act("request", "InteractionRequest",
                 lambda: self.engine.request_interaction(requester, target))

    def payload(self, pid: str, data: bytes) -> None:
        self.act("payload", "ModeratorPayload",
                 lambda: self.engine.moderator_broadcast(pid, data))

    def leave(self, pid: str) -> None:
        self.act("leave", "Bye", lambda: self.engine.leave(pid, "bye"))

    def tick(self, tick_no: int, now: float) -> None:
        self.engine.set_clock(tick_no, now)
        self.engine.expire_silent()


class _LoopbackPort:
    """Feeds the engine through datagrams, codec and server loop included."""

    def __init__(self, server: ServerLoop, net: MemoryNetwork):
        self.server = server
        self.engine = server.engine
        self.net = net
        self.endpoints: dict[str, Any] = {}
        self.seqs: dict[str, int] = {}

    def _send(self, pid: str, msg: codec.Message) -> None:
        self.endpoints[pid].send("srv", codec.encode(msg))

    def _next_seq(self, pid: str) -> int:
        self.seqs[pid] = self.seqs.get(pid, 0) + 1
        return self.seqs[pid]

    def join(self, m: CastMember) -> None:
        self.endpoints[m.id] = self.net.endpoint(f"client-{m.id}")
        self._send(m.id, codec.Hello(m.id, self._next_seq(m.id), m.room,
                                     m.color, m.name or m.id))

    def bind(self, pid: str, device: str) -> None:
        self._send(pid, codec.BindDevice(pid, self._next_seq(pid), device))

    def update(self, pid: str, local: Vec2, seq: int) -> None:
        self._send(pid, codec.PositionUpdate(pid, seq, local.x, local.y))

    def request(self, requester: str, target: str) -> None:
        self._send(requester, codec.InteractionRequest(
            requester, self._next_seq(requester), target))

    def payload(self, pid: str, data: bytes) -> None:
        self._send(pid, codec.ModeratorPayload(pid, self._next_seq(pid), data))

    def leave(self, pid: str) -> None:
        self._send(pid, codec.Bye(pid, self._next_seq(pid)))

    def tick(self, tick_no: int, now: float) -> None:
        self.server.tick(now)
        # Clients do not need their inbound traffic here; drop it.
        for endpoint in self.endpoints.values():
            endpoint.receive()


def _due_tick(t: float, tick_dt: float) -> int:
    return max(1, math.ceil(t / tick_dt - 1e-9))


def replay(scenario: Scenario, transport: str = "inproc",
           seed: int = 0) -> ReplayResult:
    if transport not in TRANSPORTS:
        raise ScenarioError(f"unknown transport {transport!r}; use {TRANSPORTS}")
    scenario.validate()

    space = scenario.space()
    engine_config = EngineConfig(profile=scenario.profile())
    if transport == "inproc":
        engine = Engine(space, engine_config)
        port: Any = _InprocPort(engine)
    else:
        net = MemoryNetwork(seed=seed)
        server = ServerLoop(space, net.endpoint("srv"),
                            ServerConfig(snapshot_hz=scenario.tick_hz,
                                         engine=engine_config))
        port = _LoopbackPort(server, net)
        engine = server.engine

    tick_dt = 1.0 / scenario.tick_hz
    stride = scenario.tick_hz // scenario.update_hz
    update_dt = stride * tick_dt
    total_ticks = int(round(scenario.duration * scenario.tick_hz))

    movers = {
        m.id: _Mover(m, Vec2(*m.start) if m.start else None, speed=m.speed)
        for m in scenario.cast
    }
    action_queue = sorted(
        enumerate(scenario.script),
        key=lambda pair: (_due_tick(pair[1].t, tick_dt), pair[0]))
    trace: list[TraceRecord] = []

    def run_action(action) -> None:
        args = action.args
        mover = movers.get(args.get("participant") or args.get("requester"))
        if action.do == "move_to":
            room = space.rooms[mover.member.room]
            raw = Vec2(*args["to"])
            mover.target = room.local_rect().clamp(raw)
            mover.speed = float(args.get("speed", mover.member.speed))
        elif action.do == "teleport":
            room = space.rooms[mover.member.room]
            mover.local = room.local_rect().clamp(Vec2(*args["to"]))
            mover.target = None
        elif action.do == "bind":
            port.bind(args["participant"], args["device"])
        elif action.do == "request":
            port.request(args["requester"], args["target"])
        elif action.do == "payload":
            port.payload(args["participant"], bytes.fromhex(args["hex"]))
        elif action.do == "leave":
            movers[args["participant"]].gone = True
            port.leave(args["participant"])

    def advance_movement() -> None:
        for m in scenario.cast:
            mover = movers[m.id]
            if mover.gone or mover.local is None:
                continue
            room = space.rooms[m.room]
            if m.pursue is not None:
                prey = movers[m.pursue]
                if prey.local is not None and not prey.gone:
                    prey_virtual = prey.local + space.rooms[prey.member.room].anchor
                    virtual = mover.local + room.anchor
                    new_virtual = pursuer_step(virtual, prey_virtual,
                                               m.pursue_speed, update_dt,
                                               room.virtual_rect)
                    mover.local = new_virtual - room.anchor
            elif mover.target is not None:
                step = pursuer_step(mover.local, mover.target,
                                    mover.speed, update_dt, room.local_rect())
                mover.local = step
                if mover.local == mover.target:
                    mover.target = None
            mover.local = Vec2(codec.quantize_m(mover.local.x),
                               codec.quantize_m(mover.local.y))

    for tick_no in range(1, total_ticks + 1):
        now = round(tick_no * tick_dt, 6)
        if transport == "inproc":
            port.tick(tick_no, now)
        if tick_no == 1:
            for m in scenario.cast:
                port.join(m)
            for m in scenario.cast:
                if m.device:
                    port.bind(m.id, m.device)
        while action_queue and _due_tick(action_queue[0][1].t, tick_dt) <= tick_no:
            _, action = action_queue.pop(0)
            run_action(action)
        if (tick_no - 1) % stride == 0:
            advance_movement()
            for m in scenario.cast:
                mover = movers[m.id]
                if mover.gone or mover.local is None:
                    continue
                port.update(m.id, mover.local, mover.next_seq())
                trace.append(TraceRecord(now, m.id, m.room,
                                         mover.local.x, mover.local.y))
        if transport == "loopback":
            port.tick(tick_no, now)

    log = list(engine.log)
    unmatched = match_expectations(log, scenario.expected_events)
    result = ReplayResult(scenario.name, log, trace, unmatched)
    if scenario.path_check:
        check = scenario.path_check
        subject = check["subject"]
        samples = [Vec2(r["x"], r["y"]) for r in log
                   if r["kind"] == "PositionChanged" and r["participant"] == subject]
        remotes = []
        for rid in check["remotes"]:
            mover = movers[rid]
            if mover.local is not None:
                remotes.append(mover.local + space.rooms[mover.member.room].anchor)
        result.violations = task5_pathcheck(samples, remotes)
        result.max_violations = int(check.get("max_violations", 0))
    return result


def replay_trace(space: SharedSpace, records: list[TraceRecord],
                 tick_hz: int = 20, engine_config: Optional[EngineConfig] = None,
                 transport: str = "inproc", seed: int = 0) -> list[dict]:
    """Feed a recorded trace back through the engine.

    Trace participants are admitted on first sight with colors from a fixed
    palette and an auto-assigned device, so proxemics fire as they did live.
    """
    if transport not in TRANSPORTS:
        raise ScenarioError(f"unknown transport {transport!r}; use {TRANSPORTS}")
    engine_config = engine_config or EngineConfig()
    if transport == "inproc":
        engine = Engine(space, engine_config)
        port: Any = _InprocPort(engine)
    else:
        net = MemoryNetwork(seed=seed)
        server = ServerLoop(space, net.endpoint("srv"),
                            ServerConfig(snapshot_hz=tick_hz, engine=engine_config))
        port = _LoopbackPort(server, net)
        engine = server.engine

    palette = [(230, 25, 75), (60, 180, 75), (0, 130, 200), (245, 130, 48),
               (145, 30, 180), (70, 240, 240), (240, 50, 230), (128, 128, 0),
               (0, 128, 128), (220, 190, 255), (170, 110, 40), (128, 0, 0),
               (0, 0, 128), (255, 215, 180), (255, 250, 200), (128, 128, 128)]
    tick_dt = 1.0 / tick_hz
    seqs: dict[str, int] = {}
    known: dict[str, int] = {}
    if not records:
        return list(engine.log)
    total_ticks = _due_tick(max(r.t for r in records), tick_dt)
    queue = sorted(
        enumerate(records),
        key=lambda pair: (_due_tick(pair[1].t, tick_dt), pair[0]))

    for tick_no in range(1, total_ticks + 1):
        now = round(tick_no * tick_dt, 6)
        if transport == "inproc":
            port.tick(tick_no, now)
        while queue and _due_tick(queue[0][1].t, tick_dt) <= tick_no:
            _, rec = queue.pop(0)
            if rec.participant not in known:
                index = len(known)
                known[rec.participant] = index
                member = CastMember(rec.participant, rec.room,
                                    palette[index % len(palette)],
                                    name=rec.participant)
                port.join(member)
                port.bind(rec.participant, f"d{index}")
            seqs[rec.participant] = seqs.get(rec.participant, 0) + 1
            port.update(rec.participant,
                        Vec2(codec.quantize_m(rec.x), codec.quantize_m(rec.y)),
                        seqs[rec.participant])
        if transport == "loopback":
            port.tick(tick_no, now)
    return list(engine.log)
