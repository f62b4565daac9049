"""The observable event stream, shared by the server log, the wire protocol,
and the CLI (one JSON object per line).

Records with eseq >= 1 form the replicated state chain: replaying them in
order from an empty replica reconstructs the live state. Records with
eseq == 0 are transient (errors, broadcast notices) and never change state.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Iterator

# State-chain record kinds, in the one place that defines the vocabulary.
STATE_KINDS = frozenset({
    "ParticipantJoined",
    "ParticipantLeft",
    "DeviceBound",
    "PositionChanged",
    "BubbleCreated",
    "BubbleDissolved",
    "BubbleMemberJoined",
    "BubbleMemberLeft",
    "ChannelOpened",
    "ChannelClosed",
    "ModeratorAcquired",
    "ModeratorReleased",
    "ModeratorHandedOver",
    "SpeechChannelOpened",
    "SpeechChannelClosed",
    "IntimateInvasion",
    "GlowingPath",
})

TRANSIENT_KINDS = frozenset({"ModeratorBroadcast", "Error"})


def encode_line(record: dict[str, Any]) -> str:
    """Canonical single-line encoding; key order is the construction order."""
    return json.dumps(record, separators=(",", ":"), ensure_ascii=False)


def decode_line(line: str) -> dict[str, Any]:
    return json.loads(line)


def read_log(lines: Iterable[str]) -> Iterator[dict[str, Any]]:
    for line in lines:
        line = line.strip()
        if line:
            yield decode_line(line)
