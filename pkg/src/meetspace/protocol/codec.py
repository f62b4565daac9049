"""Binary wire format for the datagram protocol.

All integers are little-endian and fixed-width. Ids travel as 8-byte
NUL-padded UTF-8. Meters travel as 32-bit floats of millimeter-quantized
values; both encoder and decoder re-quantize, so a value survives the wire
bit-for-bit as a float64. Every datagram fits in MAX_DATAGRAM bytes; only
snapshots may span several datagrams, carrying part indices.

Layout, after the common header (version u8, kind u8, sender 8s, seq u32):

  Hello              room 8s, color 3xu8, flags u8, name u8-len + utf8
  HelloAck           status u8, tick u64, eseq u32
  PositionUpdate     x f32, y f32            (local room coordinates)
  BindDevice         device 8s
  InteractionRequest target 8s
  ModeratorPayload   u16-len + bytes         (opaque, <= 512)
  Snapshot           tick u64, part u8, parts u8, u16-len + payload chunk
  Event              eseq u32, tick u64, u16-len + record JSON
  Bye                (empty)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Optional, Union

from ..errors import MalformedMessage, PayloadTooLarge

WIRE_VERSION = 1
MAX_DATAGRAM = 1200
MAX_NAME_BYTES = 64
MAX_PAYLOAD_BYTES = 512
ID_BYTES = 8

KIND_HELLO = 1
KIND_HELLO_ACK = 2
KIND_POSITION_UPDATE = 3
KIND_BIND_DEVICE = 4
KIND_INTERACTION_REQUEST = 5
KIND_MODERATOR_PAYLOAD = 6
KIND_SNAPSHOT = 7
KIND_EVENT = 8
KIND_BYE = 9

KIND_NAMES = {
    KIND_HELLO: "Hello",
    KIND_HELLO_ACK: "HelloAck",
    KIND_POSITION_UPDATE: "PositionUpdate",
    KIND_BIND_DEVICE: "BindDevice",
    KIND_INTERACTION_REQUEST: "InteractionRequest",
    KIND_MODERATOR_PAYLOAD: "ModeratorPayload",
    KIND_SNAPSHOT: "Snapshot",
    KIND_EVENT: "Event",
    KIND_BYE: "Bye",
}

STATUS_OK = 0
STATUS_COLOR_COLLISION = 1
STATUS_UNKNOWN_ROOM = 2
STATUS_DUPLICATE_ID = 3
STATUS_BAD_REQUEST = 4

_HEADER = struct.Struct("<BB8sI")


def quantize_m(value: float) -> float:
    """Millimeter grid; keeps positions identical across the f32 wire."""
    return round(value, 3)


@dataclass(frozen=True)
class Hello:
    sender: str
    seq: int
    room: str
    color: tuple[int, int, int]
    name: str
    flags: int = 0


@dataclass(frozen=True)
class HelloAck:
    sender: str
    seq: int
    status: int
    tick: int
    eseq: int


@dataclass(frozen=True)
class PositionUpdate:
    sender: str
    seq: int
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", quantize_m(self.x))
        object.__setattr__(self, "y", quantize_m(self.y))


@dataclass(frozen=True)
class BindDevice:
    sender: str
    seq: int
    device: str


@dataclass(frozen=True)
class InteractionRequest:
    sender: str
    seq: int
    target: str


@dataclass(frozen=True)
class ModeratorPayload:
    sender: str
    seq: int
    payload: bytes


@dataclass(frozen=True)
class SnapshotPart:
    sender: str
    seq: int
    tick: int
    part: int
    parts: int
    chunk: bytes


@dataclass(frozen=True)
class Event:
    sender: str
    seq: int
    eseq: int
    tick: int
    record: dict


@dataclass(frozen=True)
class Bye:
    sender: str
    seq: int


Message = Union[Hello, HelloAck, PositionUpdate, BindDevice, InteractionRequest,
                ModeratorPayload, SnapshotPart, Event, Bye]

_KIND_OF = {
    Hello: KIND_HELLO,
    HelloAck: KIND_HELLO_ACK,
    PositionUpdate: KIND_POSITION_UPDATE,
    BindDevice: KIND_BIND_DEVICE,
    InteractionRequest: KIND_INTERACTION_REQUEST,
    ModeratorPayload: KIND_MODERATOR_PAYLOAD,
    SnapshotPart: KIND_SNAPSHOT,
    Event: KIND_EVENT,
    Bye: KIND_BYE,
}


def kind_name(msg: "Message") -> str:
    return KIND_NAMES[_KIND_OF[type(msg)]]


def _pack_id(value: str) -> bytes:
    raw = value.encode("utf-8")
    if not raw or len(raw) > ID_BYTES or b"\x00" in raw:
        raise PayloadTooLarge(f"id {value!r} does not fit {ID_BYTES} wire bytes")
    return raw.ljust(ID_BYTES, b"\x00")


def _unpack_id(raw: bytes, what: str) -> str:
    body = raw.rstrip(b"\x00")
    if not body or b"\x00" in body:
        raise MalformedMessage(f"bad {what} id field")
    try:
        return body.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedMessage(f"{what} id is not UTF-8") from exc


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedMessage("truncated message")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f32(self) -> float:
        return quantize_m(struct.unpack("<f", self.take(4))[0])

    def done(self) -> None:
        if self.pos != len(self.data):
            raise MalformedMessage(f"{len(self.data) - self.pos} trailing bytes")


def encode(msg: Message) -> bytes:
    kind = _KIND_OF[type(msg)]
    head = _HEADER.pack(WIRE_VERSION, kind, _pack_id(msg.sender), msg.seq)
    if isinstance(msg, Hello):
        name = msg.name.encode("utf-8")
        if len(name) > MAX_NAME_BYTES:
            raise PayloadTooLarge(f"name {msg.name!r} over {MAX_NAME_BYTES} bytes")
        body = (_pack_id(msg.room) + bytes(msg.color) + bytes([msg.flags])
                + bytes([len(name)]) + name)
    elif isinstance(msg, HelloAck):
        body = struct.pack("<BQI", msg.status, msg.tick, msg.eseq)
    elif isinstance(msg, PositionUpdate):
        body = struct.pack("<ff", msg.x, msg.y)
    elif isinstance(msg, BindDevice):
        body = _pack_id(msg.device)
    elif isinstance(msg, InteractionRequest):
        body = _pack_id(msg.target)
    elif isinstance(msg, ModeratorPayload):
        if len(msg.payload) > MAX_PAYLOAD_BYTES:
            raise PayloadTooLarge(f"payload {len(msg.payload)} > {MAX_PAYLOAD_BYTES}")
        body = struct.pack("<H", len(msg.payload)) + msg.payload
    elif isinstance(msg, SnapshotPart):
        if not (0 < msg.parts <= 255 and 0 <= msg.part < msg.parts):
            raise PayloadTooLarge(f"bad fragment indices {msg.part}/{msg.parts}")
        body = (struct.pack("<QBB", msg.tick, msg.part, msg.parts)
                + struct.pack("<H", len(msg.chunk)) + msg.chunk)
    elif isinstance(msg, Event):
        blob = json.dumps(msg.record, separators=(",", ":"), ensure_ascii=False).encode()
        body = (struct.pack("<IQ", msg.eseq, msg.tick)
                + struct.pack("<H", len(blob)) + blob)
    elif isinstance(msg, Bye):
        body = b""
    else:  # pragma: no cover - exhaustive over Message
        raise TypeError(f"cannot encode {type(msg)!r}")
    data = head + body
    if len(data) > MAX_DATAGRAM:
        raise PayloadTooLarge(f"{len(data)} bytes exceeds {MAX_DATAGRAM}")
    return data


def decode(data: bytes) -> Message:
    if len(data) < _HEADER.size:
        raise MalformedMessage("shorter than header")
    version, kind, sender_raw, seq = _HEADER.unpack_from(data)
    if version != WIRE_VERSION:
        raise MalformedMessage(f"unsupported version {version}")
    if kind not in KIND_NAMES:
        raise MalformedMessage(f"unknown kind {kind}")
    if len(data) > MAX_DATAGRAM:
        raise MalformedMessage(f"{len(data)} bytes exceeds {MAX_DATAGRAM}")
    sender = _unpack_id(sender_raw, "sender")
    r = _Reader(data[_HEADER.size:])

    if kind == KIND_HELLO:
        room = _unpack_id(r.take(ID_BYTES), "room")
        color = tuple(r.take(3))
        flags = r.u8()
        name_len = r.u8()
        if name_len > MAX_NAME_BYTES:
            raise MalformedMessage(f"name length {name_len} over limit")
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedMessage("name is not UTF-8") from exc
        r.done()
        return Hello(sender, seq, room, color, name, flags)
    if kind == KIND_HELLO_ACK:
        status, tick, eseq = struct.unpack("<BQI", r.take(13))
        r.done()
        return HelloAck(sender, seq, status, tick, eseq)
    if kind == KIND_POSITION_UPDATE:
        x, y = r.f32(), r.f32()
        r.done()
        return PositionUpdate(sender, seq, x, y)
    if kind == KIND_BIND_DEVICE:
        device = _unpack_id(r.take(ID_BYTES), "device")
        r.done()
        return BindDevice(sender, seq, device)
    if kind == KIND_INTERACTION_REQUEST:
        target = _unpack_id(r.take(ID_BYTES), "target")
        r.done()
        return InteractionRequest(sender, seq, target)
    if kind == KIND_MODERATOR_PAYLOAD:
        length = r.u16()
        if length > MAX_PAYLOAD_BYTES:
            raise MalformedMessage(f"payload length {length} over limit")
        payload = r.take(length)
        r.done()
        return ModeratorPayload(sender, seq, payload)
    if kind == KIND_SNAPSHOT:
        tick = r.u64()
        part = r.u8()
        parts = r.u8()
        if parts == 0 or part >= parts:
            raise MalformedMessage(f"bad fragment indices {part}/{parts}")
        length = r.u16()
        chunk = r.take(length)
        r.done()
        return SnapshotPart(sender, seq, tick, part, parts, chunk)
    if kind == KIND_EVENT:
        eseq = r.u32()
        tick = r.u64()
        length = r.u16()
        blob = r.take(length)
        r.done()
        try:
            record = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedMessage("event record is not valid JSON") from exc
        if not isinstance(record, dict) or "kind" not in record:
            raise MalformedMessage("event record must be an object with a kind")
        return Event(sender, seq, eseq, tick, record)
    # KIND_BYE
    r.done()
    return Bye(sender, seq)


# -- snapshots ---------------------------------------------------------------

@dataclass(frozen=True)
class SnapshotParticipant:
    id: str
    room: str
    x: float
    y: float
    seq: int
    flags: int  # bit0: device bound, bit1: has a position


@dataclass(frozen=True)
class SnapshotState:
    """Self-contained replica state; applying one replaces the whole view."""

    tick: int
    eseq: int
    moderator: Optional[str]
    participants: tuple[SnapshotParticipant, ...]
    bubbles: tuple[tuple[str, tuple[str, ...], tuple[int, int, int]], ...]


def encode_snapshot_payload(state: SnapshotState) -> bytes:
    if len(state.participants) > 255 or len(state.bubbles) > 255:
        raise PayloadTooLarge("snapshot roster over 255 entries")
    out = bytearray()
    out += struct.pack("<I", state.eseq)
    out += struct.pack("<B", 1 if state.moderator else 0)
    out += _pack_id(state.moderator) if state.moderator else b"\x00" * ID_BYTES
    out += struct.pack("<B", len(state.participants))
    for p in sorted(state.participants, key=lambda p: p.id):
        out += _pack_id(p.id) + _pack_id(p.room)
        out += struct.pack("<ffIB", quantize_m(p.x), quantize_m(p.y), p.seq, p.flags)
    out += struct.pack("<B", len(state.bubbles))
    for bid, members, color in sorted(state.bubbles):
        if len(members) > 255:
            raise PayloadTooLarge("bubble over 255 members")
        out += _pack_id(bid) + bytes(color) + struct.pack("<B", len(members))
        for m in sorted(members):
            out += _pack_id(m)
    return bytes(out)


def decode_snapshot_payload(tick: int, payload: bytes) -> SnapshotState:
    r = _Reader(payload)
    eseq = r.u32()
    has_moderator = r.u8()
    moderator_raw = r.take(ID_BYTES)
    moderator = _unpack_id(moderator_raw, "moderator") if has_moderator else None
    participants = []
    for _ in range(r.u8()):
        pid = _unpack_id(r.take(ID_BYTES), "participant")
        room = _unpack_id(r.take(ID_BYTES), "room")
        x, y = r.f32(), r.f32()
        seq = r.u32()
        flags = r.u8()
        participants.append(SnapshotParticipant(pid, room, x, y, seq, flags))
    bubbles = []
    for _ in range(r.u8()):
        bid = _unpack_id(r.take(ID_BYTES), "bubble")
        color = tuple(r.take(3))
        members = tuple(_unpack_id(r.take(ID_BYTES), "member") for _ in range(r.u8()))
        bubbles.append((bid, members, color))
    r.done()
    return SnapshotState(tick, eseq, moderator, tuple(participants), tuple(bubbles))


_CHUNK_BYTES = MAX_DATAGRAM - _HEADER.size - 12 - 64  # headroom under the datagram cap


def snapshot_messages(state: SnapshotState, sender: str, seq: int) -> list[SnapshotPart]:
    """Fragment a snapshot payload into one or more datagrams."""
    payload = encode_snapshot_payload(state)
    chunks = [payload[i:i + _CHUNK_BYTES] for i in range(0, len(payload), _CHUNK_BYTES)] or [b""]
    parts = len(chunks)
    return [
        SnapshotPart(sender, seq, state.tick, idx, parts, chunk)
        for idx, chunk in enumerate(chunks)
    ]
