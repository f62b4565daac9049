"""Root server: owns the engine, applies inbound datagrams, and fans out
event records plus a full snapshot every tick.

All state transitions happen on the single tick loop, in datagram arrival
order, so a given inbound sequence always produces the same event log.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from ..engine import Engine, EngineConfig
from ..errors import MeetspaceError
from ..space import SharedSpace, Vec2
from . import codec
from .transport import Address, DatagramEndpoint

SERVER_ID = "server"
DEFAULT_PORT = 47800
DEFAULT_SNAPSHOT_HZ = 20.0

# Hello flags
FLAG_OBSERVER = 1


@dataclass
class ServerConfig:
    snapshot_hz: float = DEFAULT_SNAPSHOT_HZ
    engine: EngineConfig = field(default_factory=EngineConfig)

    @property
    def tick_interval(self) -> float:
        return 1.0 / self.snapshot_hz


class ServerLoop:
    def __init__(self, space: SharedSpace, endpoint: DatagramEndpoint,
                 config: ServerConfig | None = None,
                 event_sink: Optional[Callable[[list[dict]], None]] = None,
                 frame_sink: Optional[Callable[[dict], None]] = None):
        self.config = config or ServerConfig()
        self.engine = Engine(space, self.config.engine)
        self.endpoint = endpoint
        self.event_sink = event_sink
        self.frame_sink = frame_sink
        self.clients: dict[Address, str] = {}  # addr -> sender id
        self.tick_no = 0
        self._out_seq = 0
        self._unicast: list[tuple[Address, codec.Message]] = []
        self._relays: list[codec.Message] = []

    # -- outbound helpers ----------------------------------------------------

    def _next_seq(self) -> int:
        self._out_seq += 1
        return self._out_seq

    def _send(self, dest: Address, msg: codec.Message) -> None:
        self.endpoint.send(dest, codec.encode(msg))

    def _broadcast(self, msg: codec.Message) -> None:
        for addr in sorted(self.clients):
            self._send(addr, msg)

    # -- one tick ------------------------------------------------------------

    def tick(self, now: float) -> None:
        self.tick_no += 1
        self.engine.set_clock(self.tick_no, now)
        self.engine.expire_silent()
        for src, data in self.endpoint.receive():
            try:
                msg = codec.decode(data)
            except MeetspaceError as exc:
                self.engine.emit_transient("Error", code=exc.code, detail=str(exc))
                continue
            try:
                self._handle(src, msg)
            except MeetspaceError as exc:
                record = self.engine.emit_transient(
                    "Error", code=exc.code, detail=str(exc),
                    about=codec.kind_name(msg))
                self._unicast.append(
                    (src, codec.Event(SERVER_ID, self._next_seq(), 0,
                                      self.tick_no, record)))
        self._flush(now)

    def _handle(self, src: Address, msg: codec.Message) -> None:
        if isinstance(msg, codec.Hello):
            status = codec.STATUS_OK
            if not msg.flags & FLAG_OBSERVER:
                try:
                    self.engine.join(msg.sender, msg.name or msg.sender, msg.room, msg.color)
                except MeetspaceError as exc:
                    status = {
                        "ColorCollision": codec.STATUS_COLOR_COLLISION,
                        "UnknownRoom": codec.STATUS_UNKNOWN_ROOM,
                        "DuplicateParticipant": codec.STATUS_DUPLICATE_ID,
                    }.get(exc.code, codec.STATUS_BAD_REQUEST)
            if status == codec.STATUS_OK:
                self.clients[src] = msg.sender
            self._unicast.append(
                (src, codec.HelloAck(SERVER_ID, self._next_seq(), status,
                                     self.tick_no, self.engine.eseq)))
        elif isinstance(msg, codec.PositionUpdate):
            self.engine.update_position(msg.sender, Vec2(msg.x, msg.y), msg.seq)
        elif isinstance(msg, codec.BindDevice):
            self.engine.bind_device(msg.sender, msg.device)
            record = next(
                (r for r in reversed(self.engine.log)
                 if r["kind"] == "DeviceBound" and r["participant"] == msg.sender),
                None)
            if record is not None and src not in self.clients:
                # Confirm to one-shot tools that never said Hello.
                self._unicast.append(
                    (src, codec.Event(SERVER_ID, self._next_seq(),
                                      record["eseq"], self.tick_no, record)))
        elif isinstance(msg, codec.InteractionRequest):
            self.engine.request_interaction(msg.sender, msg.target)
        elif isinstance(msg, codec.ModeratorPayload):
            self.engine.moderator_broadcast(msg.sender, msg.payload)
            self._relays.append(
                codec.ModeratorPayload(msg.sender, self._next_seq(), msg.payload))
        elif isinstance(msg, codec.Bye):
            self.clients = {a: s for a, s in self.clients.items() if a != src}
            if msg.sender in self.engine.roster.participants:
                self.engine.leave(msg.sender, "bye")
        # HelloAck / Snapshot / Event from peers are not server inputs.

    def _flush(self, now: float) -> None:
        for record in self.engine.drain_new():
            if self.event_sink:
                self.event_sink([record])
            if record["kind"] == "Error":
                continue  # already unicast to the offender
            msg = codec.Event(SERVER_ID, self._next_seq(), record["eseq"],
                              self.tick_no, record)
            self._broadcast(msg)
        for dest, msg in self._unicast:
            self._send(dest, msg)
        self._unicast.clear()
        for msg in self._relays:
            self._broadcast(msg)
        self._relays.clear()
        for part in codec.snapshot_messages(self.engine.snapshot_state(),
                                            SERVER_ID, self._next_seq()):
            self._broadcast(part)
        if self.frame_sink:
            self.frame_sink(self.engine.frames())
