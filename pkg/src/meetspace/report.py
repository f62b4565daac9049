"""Render an event log into figures and delimited tables.

The event log is self-contained (replaying it reconstructs the final state),
so reports need nothing but the log and the room layout: a floor-plan figure
with trails and final circles, a timeline of notable events, and CSV tables
alongside.
"""

from __future__ import annotations

import csv
import os
from collections import defaultdict
from typing import Any, Iterable

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Circle, Rectangle

from .events import read_log
from .participants import ProxemicProfile
from .space import SharedSpace

# Kinds worth a timeline row; raw position samples would drown everything.
TIMELINE_KINDS = (
    "ParticipantJoined", "ParticipantLeft", "DeviceBound",
    "BubbleCreated", "BubbleMemberJoined", "BubbleMemberLeft", "BubbleDissolved",
    "ChannelOpened", "ChannelClosed",
    "ModeratorAcquired", "ModeratorHandedOver", "ModeratorReleased",
    "SpeechChannelOpened", "SpeechChannelClosed",
    "IntimateInvasion", "GlowingPath", "ModeratorBroadcast", "Error",
)


def load_log(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return list(read_log(fh))


def summarize_events(log: list[dict]) -> list[tuple]:
    stats: dict[str, list] = {}
    for rec in log:
        row = stats.setdefault(rec["kind"], [0, rec["t"], rec["t"]])
        row[0] += 1
        row[1] = min(row[1], rec["t"])
        row[2] = max(row[2], rec["t"])
    return [(kind, count, first, last)
            for kind, (count, first, last) in sorted(stats.items())]


def bubble_table(log: list[dict]) -> list[tuple]:
    bubbles: dict[str, dict] = {}
    for rec in log:
        kind = rec["kind"]
        if kind == "BubbleCreated":
            bubbles[rec["bubble"]] = {
                "created": rec["t"], "dissolved": None,
                "peak": len(rec["members"]),
            }
        elif kind in ("BubbleMemberJoined", "BubbleMemberLeft"):
            entry = bubbles.get(rec["bubble"])
            if entry:
                entry["peak"] = max(entry["peak"], len(rec["members"]))
        elif kind == "BubbleDissolved":
            entry = bubbles.get(rec["bubble"])
            if entry:
                entry["dissolved"] = rec["t"]
    return [
        (bid, e["created"], e["dissolved"] if e["dissolved"] is not None else "",
         e["peak"],
         round(e["dissolved"] - e["created"], 3) if e["dissolved"] is not None else "")
        for bid, e in sorted(bubbles.items())
    ]


def final_positions(log: list[dict]) -> dict[str, dict]:
    """Last known state per participant, derived purely from the log."""
    people: dict[str, dict] = {}
    live_bubbles: dict[str, tuple[set, tuple]] = {}
    for rec in log:
        kind = rec["kind"]
        if kind == "ParticipantJoined":
            people[rec["participant"]] = {
                "name": rec.get("name", rec["participant"]),
                "color": tuple(rec.get("color", (120, 120, 120))),
                "room": rec["room"], "pos": None, "ring": None,
            }
        elif kind == "ParticipantLeft":
            people.pop(rec["participant"], None)
        elif kind == "PositionChanged" and rec["participant"] in people:
            people[rec["participant"]]["pos"] = (rec["x"], rec["y"])
        elif kind in ("BubbleCreated", "BubbleMemberJoined", "BubbleMemberLeft"):
            live_bubbles[rec["bubble"]] = (set(rec["members"]), tuple(rec["color"]))
        elif kind == "BubbleDissolved":
            live_bubbles.pop(rec["bubble"], None)
    for members, color in live_bubbles.values():
        for member in members:
            if member in people:
                people[member]["ring"] = color
    return people


def trails(log: list[dict]) -> dict[str, list[tuple]]:
    paths: dict[str, list[tuple]] = defaultdict(list)
    for rec in log:
        if rec["kind"] == "PositionChanged":
            paths[rec["participant"]].append((rec["x"], rec["y"]))
    return paths


def _rgb(color: Iterable[int]) -> tuple:
    r, g, b = color
    return (r / 255, g / 255, b / 255)


def render_floorplan(space: SharedSpace, log: list[dict], out_path: str,
                     profile: ProxemicProfile | None = None) -> None:
    profile = profile or ProxemicProfile()
    fig, (wall_ax, floor_ax) = plt.subplots(
        2, 1, figsize=(9, 10), height_ratios=[1, 4],
        gridspec_kw={"hspace": 0.25})

    bounds = space.bounds()
    for room in space.rooms.values():
        rect = room.virtual_rect
        floor_ax.add_patch(Rectangle((rect.x0, rect.y0), rect.x1 - rect.x0,
                                     rect.y1 - rect.y0, fill=False,
                                     linewidth=1.2, edgecolor="0.4"))
        floor_ax.annotate(room.id, (rect.x0 + 0.08, rect.y1 - 0.22),
                          fontsize=9, color="0.4")
    dx0, dx1 = space.display_interval()
    floor_ax.plot([dx0, dx1], [0, 0], linewidth=5, color="0.15",
                  solid_capstyle="butt")
    floor_ax.add_patch(Rectangle((dx0, 0), dx1 - dx0, profile.moderator_depth,
                                 facecolor="0.92", edgecolor="none", zorder=0))

    people = final_positions(log)
    for pid, track in sorted(trails(log).items()):
        if pid not in people or len(track) < 2:
            continue
        xs, ys = zip(*track)
        floor_ax.plot(xs, ys, linewidth=0.8, alpha=0.45,
                      color=_rgb(people[pid]["color"]))
    for pid, info in sorted(people.items()):
        if info["pos"] is None:
            continue
        x, y = info["pos"]
        color = _rgb(info["color"])
        ring = _rgb(info["ring"]) if info["ring"] else color
        floor_ax.add_patch(Circle((x, y), profile.personal_radius, fill=False,
                                  linewidth=2.0, edgecolor=ring))
        floor_ax.add_patch(Circle((x, y), profile.intimate_radius,
                                  facecolor=color, alpha=0.55, edgecolor=color))
        floor_ax.annotate(info["name"], (x, y + profile.personal_radius + 0.07),
                          ha="center", fontsize=8)

    floor_ax.set_xlim(bounds.x0 - 0.5, bounds.x1 + 0.5)
    floor_ax.set_ylim(bounds.y1 + 0.5, bounds.y0 - 0.5)  # display wall on top
    floor_ax.set_aspect("equal")
    floor_ax.set_xlabel("x (m)")
    floor_ax.set_ylabel("distance from display wall (m)")
    floor_ax.set_title("floor plan, final state with trails")

    # Wall strip: shadow silhouettes, taller when closer to the wall.
    height = 1.8
    moderator = None
    for rec in log:
        if rec["kind"] == "ModeratorAcquired":
            moderator = rec["participant"]
        elif rec["kind"] == "ModeratorHandedOver":
            moderator = rec["to"]
        elif rec["kind"] == "ModeratorReleased":
            moderator = None
    for pid, info in sorted(people.items()):
        if info["pos"] is None:
            continue
        x, y = info["pos"]
        h = max(0.0, height - y)
        if h <= 0:
            continue
        color = _rgb(info["color"])
        wall_ax.add_patch(Rectangle((x - 0.25, 0), 0.5, h, facecolor=color,
                                    alpha=0.8 if pid == moderator else 0.45,
                                    edgecolor=color))
        if pid == moderator:
            wall_ax.annotate("moderator", (x, h + 0.05), ha="center", fontsize=7)
    wall_ax.set_xlim(bounds.x0 - 0.5, bounds.x1 + 0.5)
    wall_ax.set_ylim(0, height + 0.3)
    wall_ax.set_ylabel("shadow (m)")
    wall_ax.set_title("wall display strip")

    fig.savefig(out_path, dpi=110)
    plt.close(fig)


def render_timeline(log: list[dict], out_path: str) -> None:
    rows = [rec for rec in log if rec["kind"] in TIMELINE_KINDS]
    fig, ax = plt.subplots(figsize=(10, 5))
    if rows:
        order = [k for k in TIMELINE_KINDS
                 if any(r["kind"] == k for r in rows)]
        slots = {kind: i for i, kind in enumerate(order)}
        xs = [r["t"] for r in rows]
        ys = [slots[r["kind"]] for r in rows]
        ax.scatter(xs, ys, s=28, zorder=3)
        ax.set_yticks(range(len(order)), order, fontsize=8)
        ax.grid(axis="x", linewidth=0.3, alpha=0.6)
        ax.set_ylim(-0.7, len(order) - 0.3)
    else:
        ax.text(0.5, 0.5, "no events", ha="center", va="center",
                transform=ax.transAxes)
    ax.set_xlabel("t (s)")
    ax.set_title("event timeline")
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)


def _write_csv(path: str, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_report(space: SharedSpace, log: list[dict], out_dir: str,
                 profile: ProxemicProfile | None = None) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, "events.csv")
    rows = [
        (rec.get("eseq", 0), rec.get("tick", 0), rec["t"], rec["kind"],
         ";".join(sorted(
             {str(rec[k]) for k in ("participant", "victim", "intruder",
                                    "from", "to", "requester", "target")
              if rec.get(k)}
             | set(map(str, rec.get("participants", ()))))))
        for rec in log
    ]
    _write_csv(path, ["eseq", "tick", "t", "kind", "participants"], rows)
    written.append(path)

    path = os.path.join(out_dir, "summary.csv")
    _write_csv(path, ["kind", "count", "first_t", "last_t"], summarize_events(log))
    written.append(path)

    path = os.path.join(out_dir, "bubbles.csv")
    _write_csv(path, ["bubble", "created_t", "dissolved_t", "peak_members",
                      "duration_s"], bubble_table(log))
    written.append(path)

    path = os.path.join(out_dir, "floorplan.png")
    render_floorplan(space, log, path, profile)
    written.append(path)

    path = os.path.join(out_dir, "timeline.png")
    render_timeline(log, path)
    written.append(path)
    return written
