"""Conversation bubbles: groups formed by intersecting personal spaces.

Two participants are linked when they come within twice the personal radius
(their personal circles touch); a link survives until they separate past the
exit threshold. Bubbles are the connected components of that link graph with
at least two members. Each bubble keeps its identity across membership
changes by inheriting the id of the previous bubble it shares the most
members with, so the communication channel opened for a group survives one
member stepping out.
"""

from __future__ import annotations

from dataclasses import dataclass

from .space import Vec2

Color = tuple[int, int, int]
Edge = tuple[str, str]


@dataclass(frozen=True)
class SocialBubble:
    id: str
    members: frozenset[str]
    color: Color
    created_at: float


@dataclass(frozen=True)
class BubbleEvent:
    kind: str  # Created | Dissolved | MemberJoined | MemberLeft | ChannelOpened | ChannelClosed
    bubble: str
    participants: frozenset[str]
    members: frozenset[str]
    color: Color | None


def proximity_graph(positions: dict[str, Vec2], enter: float, exit: float,
                    previous_edges: set[Edge]) -> set[Edge]:
    """Pairwise links with hysteresis.

    An edge appears at dist <= enter and, once present, persists up to
    dist <= exit. Edges are canonical (a, b) with a < b.
    """
    edges: set[Edge] = set()
    ids = sorted(positions)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            d = positions[a].dist(positions[b])
            if d <= enter or ((a, b) in previous_edges and d <= exit):
                edges.add((a, b))
    return edges


def connected_components(nodes: set[str], edges: set[Edge]) -> list[frozenset[str]]:
    """Plain BFS components over the given nodes."""
    adjacency: dict[str, set[str]] = {n: set() for n in nodes}
    for a, b in edges:
        adjacency.setdefault(a, set()).add(b)
        adjacency.setdefault(b, set()).add(a)
    seen: set[str] = set()
    components = []
    for start in sorted(adjacency):
        if start in seen:
            continue
        group = set()
        queue = [start]
        seen.add(start)
        while queue:
            current = queue.pop()
            group.add(current)
            for nb in adjacency[current]:
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        components.append(frozenset(group))
    return components


def bubble_color(colors: list[Color]) -> Color:
    """Per-channel mean of member colors, rounded half away from zero."""
    n = len(colors)
    return tuple(int(sum(c[i] for c in colors) / n + 0.5) for i in range(3))  # type: ignore[return-value]


def compute_bubbles(
    edges: set[Edge],
    previous: dict[str, SocialBubble],
    colors: dict[str, Color],
    next_serial: int,
    now: float,
) -> tuple[dict[str, SocialBubble], list[BubbleEvent], int]:
    """Derive the live bubble set and the event delta from the previous one.

    Identity continuity: each new component inherits the id of the previous
    bubble sharing the most members; ties prefer the lexicographically
    smallest prior id, then the component with the smallest member tuple.
    Components that inherit nothing get fresh ids ("b<serial>").
    """
    nodes = {n for e in edges for n in e}
    components = [c for c in connected_components(nodes, edges) if len(c) >= 2]

    # Greedy matching of components to prior bubble ids by member overlap.
    claims = []
    for comp in components:
        key = tuple(sorted(comp))
        for bid, bubble in previous.items():
            overlap = len(comp & bubble.members)
            if overlap:
                claims.append((-overlap, bid, key, comp))
    claims.sort(key=lambda c: c[:3])

    assigned: dict[frozenset[str], str] = {}
    used_ids: set[str] = set()
    for _neg, bid, _key, comp in claims:
        if bid in used_ids or comp in assigned:
            continue
        assigned[comp] = bid
        used_ids.add(bid)

    bubbles: dict[str, SocialBubble] = {}
    events: list[BubbleEvent] = []

    dissolved = sorted(set(previous) - used_ids)
    for bid in dissolved:
        old = previous[bid]
        events.append(BubbleEvent("Dissolved", bid, old.members, old.members, old.color))
        events.append(BubbleEvent("ChannelClosed", bid, old.members, frozenset(), None))

    kept = sorted((bid, comp) for comp, bid in assigned.items())
    for bid, comp in kept:
        old = previous[bid]
        color = bubble_color([colors[m] for m in sorted(comp)])
        bubbles[bid] = SocialBubble(bid, comp, color, old.created_at)
        left = old.members - comp
        joined = comp - old.members
        if left:
            events.append(BubbleEvent("MemberLeft", bid, frozenset(left), comp, color))
        if joined:
            events.append(BubbleEvent("MemberJoined", bid, frozenset(joined), comp, color))

    fresh = sorted((tuple(sorted(c)), c) for c in components if c not in assigned)
    for _key, comp in fresh:
        bid = f"b{next_serial}"
        next_serial += 1
        color = bubble_color([colors[m] for m in sorted(comp)])
        bubbles[bid] = SocialBubble(bid, comp, color, now)
        events.append(BubbleEvent("Created", bid, comp, comp, color))
        events.append(BubbleEvent("ChannelOpened", bid, comp, comp, color))

    return bubbles, events, next_serial


def prune_edges(edges: set[Edge], alive: set[str]) -> set[Edge]:
    """Drop hysteresis history for participants that left the eligible set."""
    return {(a, b) for a, b in edges if a in alive and b in alive}
