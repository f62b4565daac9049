"""Client-side replica of the shared state.

Snapshots replace the whole view; event records apply incrementally only
when nothing was missed (their sequence continues the replica's), otherwise
they are parked until a snapshot catches the replica up. Either way, any
pattern of loss that ends with one delivered snapshot converges replicas to
the server state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..errors import MalformedMessage
from .codec import (
    Event,
    Message,
    SnapshotParticipant,
    SnapshotPart,
    SnapshotState,
    decode_snapshot_payload,
)

MAX_BUFFERED_EVENTS = 4096


@dataclass
class ReplicaParticipant:
    room: str
    x: float = 0.0
    y: float = 0.0
    seq: int = 0
    flags: int = 0
    name: str = ""
    color: tuple[int, int, int] = (0, 0, 0)


@dataclass
class Replica:
    tick: int = 0
    eseq: int = 0
    moderator: Optional[str] = None
    participants: dict[str, ReplicaParticipant] = field(default_factory=dict)
    bubbles: dict[str, tuple[tuple[str, ...], tuple[int, int, int]]] = field(default_factory=dict)
    _pending: dict[int, dict] = field(default_factory=dict)
    _fragments: dict[int, dict] = field(default_factory=dict)

    def apply(self, msg: Message) -> None:
        if isinstance(msg, Event):
            self._apply_event(msg)
        elif isinstance(msg, SnapshotPart):
            self._apply_snapshot_part(msg)
        # Other kinds carry no replicated state.

    # -- events --------------------------------------------------------------

    def _apply_event(self, msg: Event) -> None:
        if msg.eseq == 0:
            return  # transient notice, not part of the state chain
        if msg.eseq <= self.eseq:
            return  # stale or duplicate
        if msg.eseq == self.eseq + 1:
            self._apply_record(msg.record)
            self.eseq = msg.eseq
            self.tick = max(self.tick, msg.tick)
            self._drain_pending()
        else:
            if len(self._pending) < MAX_BUFFERED_EVENTS:
                self._pending[msg.eseq] = {"tick": msg.tick, "record": msg.record}

    def _drain_pending(self) -> None:
        while self.eseq + 1 in self._pending:
            entry = self._pending.pop(self.eseq + 1)
            self._apply_record(entry["record"])
            self.eseq += 1
            self.tick = max(self.tick, entry["tick"])

    def _apply_record(self, rec: dict) -> None:
        kind = rec.get("kind")
        if kind == "ParticipantJoined":
            self.participants[rec["participant"]] = ReplicaParticipant(
                room=rec["room"], name=rec.get("name", ""),
                color=tuple(rec.get("color", (0, 0, 0))))
        elif kind == "ParticipantLeft":
            self.participants.pop(rec["participant"], None)
        elif kind == "DeviceBound":
            p = self.participants.get(rec["participant"])
            if p:
                p.flags |= 1
        elif kind == "PositionChanged":
            p = self.participants.get(rec["participant"])
            if p:
                p.x, p.y, p.seq = rec["x"], rec["y"], rec["seq"]
                p.flags |= 2
        elif kind in ("BubbleCreated", "BubbleMemberJoined", "BubbleMemberLeft"):
            self.bubbles[rec["bubble"]] = (tuple(rec["members"]), tuple(rec["color"]))
        elif kind == "BubbleDissolved":
            self.bubbles.pop(rec["bubble"], None)
        elif kind == "ModeratorAcquired":
            self.moderator = rec["participant"]
        elif kind == "ModeratorHandedOver":
            self.moderator = rec["to"]
        elif kind == "ModeratorReleased":
            self.moderator = None
        # Channel / speech / invasion / path records carry no replica state.

    # -- snapshots -----------------------------------------------------------

    def _apply_snapshot_part(self, msg: SnapshotPart) -> None:
        if msg.parts == 1:
            self._apply_snapshot(decode_snapshot_payload(msg.tick, msg.chunk))
            return
        slot = self._fragments.setdefault(msg.tick, {"parts": msg.parts, "chunks": {}})
        if slot["parts"] != msg.parts:
            raise MalformedMessage("inconsistent fragment count for one tick")
        slot["chunks"][msg.part] = msg.chunk
        if len(slot["chunks"]) == slot["parts"]:
            payload = b"".join(slot["chunks"][i] for i in range(slot["parts"]))
            del self._fragments[msg.tick]
            self._apply_snapshot(decode_snapshot_payload(msg.tick, payload))
        # Forget stale partial snapshots once newer ones complete.
        for tick in [t for t in self._fragments if t < self.tick]:
            del self._fragments[tick]

    def _apply_snapshot(self, state: SnapshotState) -> None:
        if state.eseq < self.eseq or state.tick < self.tick:
            return  # an older view; keep what we have
        self.tick = state.tick
        self.eseq = state.eseq
        self.moderator = state.moderator
        kept_names = {pid: (p.name, p.color) for pid, p in self.participants.items()}
        self.participants = {
            p.id: ReplicaParticipant(
                room=p.room, x=p.x, y=p.y, seq=p.seq, flags=p.flags,
                name=kept_names.get(p.id, ("", (0, 0, 0)))[0],
                color=kept_names.get(p.id, ("", (0, 0, 0)))[1],
            )
            for p in state.participants
        }
        self.bubbles = {bid: (members, color) for bid, members, color in state.bubbles}
        self._pending = {e: v for e, v in self._pending.items() if e > self.eseq}
        self._drain_pending()

    # -- comparison ----------------------------------------------------------

    def snapshot_state(self) -> SnapshotState:
        participants = tuple(
            SnapshotParticipant(pid, p.room, p.x, p.y, p.seq, p.flags)
            for pid, p in sorted(self.participants.items())
        )
        bubbles = tuple(
            (bid, members, color)
            for bid, (members, color) in sorted(self.bubbles.items())
        )
        return SnapshotState(self.tick, self.eseq, self.moderator, participants, bubbles)
