"""Deterministic core tying the roster, bubbles, moderator, and awareness
together, and producing the ordered event log.

Proxemics are recomputed after every accepted state change (not on a timer),
so a given input sequence always yields the same event sequence. The clock
is injected: the datagram server advances it at its tick cadence, the
simulator at virtual time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from . import bubbles as bubbles_mod
from . import moderator as moderator_mod
from .awareness import (
    DEFAULT_PERSON_HEIGHT_M,
    PATH_TTL_S,
    GlowingPath,
    HapticAlert,
    IntimateAlertTracker,
    clamp_into_room,
    derive_frames,
    frame_to_json,
)
from .bubbles import SocialBubble
from .errors import NotModerator, PayloadTooLarge, UnknownParticipant
from .participants import Color, ProxemicProfile, Roster
from .protocol.codec import SnapshotParticipant, SnapshotState
from .space import SharedSpace, Vec2

MAX_PAYLOAD_BYTES = 512


@dataclass(frozen=True)
class EngineConfig:
    profile: ProxemicProfile = field(default_factory=ProxemicProfile)
    person_height: float = DEFAULT_PERSON_HEIGHT_M
    path_ttl: float = PATH_TTL_S
    # A tracked person that stops reporting is treated as gone after this
    # long; <= 0 disables expiry (useful when positions only come from drags).
    expire_after: float = 5.0


class Engine:
    def __init__(self, space: SharedSpace, config: EngineConfig | None = None):
        self.space = space
        self.config = config or EngineConfig()
        self.roster = Roster(space)
        self.bubbles: dict[str, SocialBubble] = {}
        self.moderator = moderator_mod.ModeratorState()
        self.alert_tracker = IntimateAlertTracker(self.config.profile)
        self.paths: list[GlowingPath] = []
        self._alerts_now: list[HapticAlert] = []
        self._edges: set[tuple[str, str]] = set()
        self._bubble_serial = 1
        self.tick = 0
        self.now = 0.0
        self._eseq = 0
        self.log: list[dict[str, Any]] = []
        self._cursor = 0

    # -- clock & log --------------------------------------------------------

    def set_clock(self, tick: int, now: float) -> None:
        self.tick = tick
        self.now = now
        self._expire_paths()

    def _emit(self, kind: str, **fields: Any) -> dict[str, Any]:
        self._eseq += 1
        record = {"eseq": self._eseq, "tick": self.tick, "t": round(self.now, 3),
                  "kind": kind, **fields}
        self.log.append(record)
        return record

    def emit_transient(self, kind: str, **fields: Any) -> dict[str, Any]:
        record = {"eseq": 0, "tick": self.tick, "t": round(self.now, 3),
                  "kind": kind, **fields}
        self.log.append(record)
        return record

    def drain_new(self) -> list[dict[str, Any]]:
        fresh = self.log[self._cursor:]
        self._cursor = len(self.log)
        return fresh

    @property
    def eseq(self) -> int:
        return self._eseq

    # -- operations ---------------------------------------------------------

    def join(self, participant_id: str, name: str, home_room: str, color: Color) -> None:
        known = participant_id in self.roster.participants
        self.roster.join(participant_id, name, home_room, color, now=self.now)
        if not known:
            self._emit("ParticipantJoined", participant=participant_id, name=name,
                       room=home_room, color=list(color))

    def bind_device(self, participant_id: str, device: str) -> None:
        p = self.roster.get(participant_id)
        already = p.device == device
        self.roster.bind_device(participant_id, device)
        if not already:
            self._emit("DeviceBound", participant=participant_id, device=device)
            self._recompute()

    def update_position(self, participant_id: str, local: Vec2, seq: int) -> bool:
        accepted = self.roster.update_position(participant_id, local, seq, now=self.now)
        if accepted:
            p = self.roster.get(participant_id)
            self._emit("PositionChanged", participant=participant_id,
                       x=round(p.position.x, 3), y=round(p.position.y, 3), seq=seq)
            self._recompute()
        return accepted

    def leave(self, participant_id: str, reason: str = "bye") -> None:
        if participant_id not in self.roster.participants:
            raise UnknownParticipant(f"no participant {participant_id!r}")
        self.roster.remove(participant_id)
        self._emit("ParticipantLeft", participant=participant_id, reason=reason)
        self._recompute()

    def expire_silent(self) -> list[str]:
        """Drop participants that have been silent past the configured window."""
        if self.config.expire_after <= 0:
            return []
        cutoff = self.now - self.config.expire_after
        stale = [p.id for p in self.roster.silent_since(cutoff)]
        for pid in stale:
            self.roster.remove(pid)
            self._emit("ParticipantLeft", participant=pid, reason="timeout")
        if stale:
            self._recompute()
        return stale

    def request_interaction(self, requester: str, target: str) -> Optional[GlowingPath]:
        req = self.roster.get(requester)
        tgt = self.roster.get(target)
        if req.position is None or tgt.position is None:
            return None
        if self.space.in_room_bounds(req.home_room, tgt.position):
            return None  # reachable: the requester can simply walk over
        end = clamp_into_room(self.space, tgt.home_room, req.position)
        path = GlowingPath(
            target_room=tgt.home_room,
            start=tgt.position,
            end=end,
            requester=requester,
            target=target,
            expires_at=self.now + self.config.path_ttl,
        )
        self.paths.append(path)
        self._emit("GlowingPath", room=tgt.home_room, requester=requester, target=target,
                   path_from=[round(path.start.x, 3), round(path.start.y, 3)],
                   path_to=[round(path.end.x, 3), round(path.end.y, 3)],
                   ttl=self.config.path_ttl)
        return path

    def moderator_broadcast(self, sender: str, payload: bytes) -> dict[str, Any]:
        if len(payload) > MAX_PAYLOAD_BYTES:
            raise PayloadTooLarge(f"{len(payload)} bytes > {MAX_PAYLOAD_BYTES}")
        if self.moderator.holder != sender:
            raise NotModerator(f"{sender!r} does not hold the display")
        return self.emit_transient("ModeratorBroadcast", participant=sender,
                                   size=len(payload))

    # -- derived state ------------------------------------------------------

    def _expire_paths(self) -> None:
        self.paths = [p for p in self.paths if p.expires_at > self.now]

    def _recompute(self) -> None:
        profile = self.config.profile
        eligible = self.roster.eligible_positions()

        self._edges = bubbles_mod.prune_edges(self._edges, set(eligible))
        self._edges = bubbles_mod.proximity_graph(
            eligible, profile.bubble_enter, profile.bubble_exit, self._edges)
        self.bubbles, bubble_events, self._bubble_serial = bubbles_mod.compute_bubbles(
            self._edges, self.bubbles, self.roster.colors(), self._bubble_serial, self.now)
        for ev in bubble_events:
            name = ev.kind if ev.kind.startswith("Channel") else f"Bubble{ev.kind}"
            fields: dict[str, Any] = {"bubble": ev.bubble,
                                      "participants": sorted(ev.participants)}
            if ev.kind in ("Created", "MemberJoined", "MemberLeft"):
                fields["members"] = sorted(ev.members)
                fields["color"] = list(ev.color)
            self._emit(name, **fields)

        display = self.space.display_interval()
        self.moderator, mod_events = moderator_mod.step(
            self.moderator, eligible, display, profile, self.now)
        for ev in mod_events:
            if ev.kind == "Acquired":
                self._emit("ModeratorAcquired", participant=ev.to_id)
                self._emit("SpeechChannelOpened", participant=ev.to_id)
            elif ev.kind == "HandedOver":
                self._emit("ModeratorHandedOver", **{"from": ev.from_id, "to": ev.to_id})
                self._emit("SpeechChannelClosed", participant=ev.from_id)
                self._emit("SpeechChannelOpened", participant=ev.to_id)
            else:
                self._emit("ModeratorReleased", participant=ev.from_id)
                self._emit("SpeechChannelClosed", participant=ev.from_id)

        self._alerts_now = self.alert_tracker.step(self.roster.participants, self.now)
        for alert in self._alerts_now:
            self._emit("IntimateInvasion", victim=alert.victim, intruder=alert.intruder,
                       device=alert.device)

    def frames(self) -> dict[str, Any]:
        """Per-room awareness frames in their serialized (JSON-ready) form."""
        self._expire_paths()
        frames = derive_frames(
            self.space,
            self.roster.participants,
            self.bubbles,
            self.moderator.holder,
            self.paths,
            self._alerts_now,
            self.config.profile,
            self.config.person_height,
        )
        seqs = {pid: p.last_seq for pid, p in self.roster.participants.items()}
        rooms_of = {pid: p.home_room for pid, p in self.roster.participants.items()}
        return {
            room: frame_to_json(frame, self.space, self.now, seqs, rooms_of)
            for room, frame in frames.items()
        }

    def snapshot_state(self) -> SnapshotState:
        participants = []
        for pid, p in sorted(self.roster.participants.items()):
            flags = (1 if p.device is not None else 0) | (2 if p.position is not None else 0)
            x, y = (p.position.x, p.position.y) if p.position else (0.0, 0.0)
            participants.append(SnapshotParticipant(pid, p.home_room, x, y, p.last_seq, flags))
        bubble_rows = [
            (bid, tuple(sorted(b.members)), b.color)
            for bid, b in sorted(self.bubbles.items())
        ]
        return SnapshotState(
            tick=self.tick,
            eseq=self._eseq,
            moderator=self.moderator.holder,
            participants=tuple(participants),
            bubbles=tuple(bubble_rows),
        )
