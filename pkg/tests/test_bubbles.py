"""Bubble formation against a brute-force clustering oracle."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from meetspace.bubbles import (
    SocialBubble,
    bubble_color,
    compute_bubbles,
    proximity_graph,
)
from meetspace.space import Vec2

ENTER = 1.2
EXIT = 1.3


def oracle_components(positions: dict[str, Vec2], threshold: float) -> set[frozenset]:
    """Independent clustering: exhaustive pairwise distances + union-find."""
    parent = {pid: pid for pid in positions}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    ids = list(positions)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if positions[a].dist(positions[b]) <= threshold:
                parent[find(a)] = find(b)
    groups: dict[str, set] = {}
    for pid in ids:
        groups.setdefault(find(pid), set()).add(pid)
    return {frozenset(g) for g in groups.values() if len(g) >= 2}


def palette(ids):
    return {pid: ((i * 37) % 256, (i * 91) % 256, (i * 53) % 256)
            for i, pid in enumerate(sorted(ids))}


def run_fresh(positions: dict[str, Vec2]):
    edges = proximity_graph(positions, ENTER, EXIT, set())
    bubbles, events, _ = compute_bubbles(edges, {}, palette(positions), 1, 0.0)
    return bubbles, events


class TestProximityGraph:
    def test_edge_at_enter_distance(self):
        pos = {"a": Vec2(0, 1), "b": Vec2(1.1, 1)}
        assert proximity_graph(pos, ENTER, EXIT, set()) == {("a", "b")}

    def test_hysteresis_keeps_edge(self):
        pos = {"a": Vec2(0, 1), "b": Vec2(1.25, 1)}
        assert proximity_graph(pos, ENTER, EXIT, {("a", "b")}) == {("a", "b")}

    def test_no_history_no_edge_in_band(self):
        pos = {"a": Vec2(0, 1), "b": Vec2(1.25, 1)}
        assert proximity_graph(pos, ENTER, EXIT, set()) == set()

    def test_exact_thresholds(self):
        near = {"a": Vec2(0, 0), "b": Vec2(1.19, 0)}
        far = {"a": Vec2(0, 0), "b": Vec2(1.21, 0)}
        keep = {"a": Vec2(0, 0), "b": Vec2(1.29, 0)}
        gone = {"a": Vec2(0, 0), "b": Vec2(1.31, 0)}
        assert proximity_graph(near, ENTER, EXIT, set())
        assert not proximity_graph(far, ENTER, EXIT, set())
        assert proximity_graph(keep, ENTER, EXIT, {("a", "b")})
        assert not proximity_graph(gone, ENTER, EXIT, {("a", "b")})


class TestColors:
    def test_mean_rounds_half_away_from_zero(self):
        assert bubble_color([(255, 0, 0), (0, 0, 255)]) == (128, 0, 128)

    def test_mean_is_idempotent_on_equal_colors(self):
        assert bubble_color([(10, 10, 10), (10, 10, 10)]) == (10, 10, 10)

    def test_three_way_mean(self):
        assert bubble_color([(0, 0, 0), (0, 0, 0), (255, 255, 255)]) == (85, 85, 85)


class TestComputeBubbles:
    def test_chain_is_one_bubble(self):
        pos = {"a": Vec2(0, 0), "b": Vec2(1.1, 0), "c": Vec2(2.2, 0)}
        bubbles, _ = run_fresh(pos)
        assert len(bubbles) == 1
        (bubble,) = bubbles.values()
        assert bubble.members == frozenset({"a", "b", "c"})
        # independent confirmation on the same configuration
        assert oracle_components(pos, ENTER) == {frozenset({"a", "b", "c"})}

    def test_singletons_are_not_bubbles(self):
        pos = {"a": Vec2(0, 0), "b": Vec2(3, 0)}
        bubbles, events = run_fresh(pos)
        assert bubbles == {}
        assert events == []

    def test_created_then_channel_opened(self):
        pos = {"a": Vec2(0, 0), "b": Vec2(1.0, 0)}
        _, events = run_fresh(pos)
        assert [e.kind for e in events] == ["Created", "ChannelOpened"]

    def test_departure_dissolves_and_closes_channel(self):
        pos = {"a": Vec2(0, 0), "b": Vec2(1.0, 0)}
        edges = proximity_graph(pos, ENTER, EXIT, set())
        bubbles, _, serial = compute_bubbles(edges, {}, palette(pos), 1, 0.0)
        moved = {"a": Vec2(0, 0), "b": Vec2(1.4, 0)}
        edges = proximity_graph(moved, ENTER, EXIT, edges)
        _, events, _ = compute_bubbles(edges, bubbles, palette(pos), serial, 1.0)
        assert [e.kind for e in events] == ["Dissolved", "ChannelClosed"]

    def test_split_keeps_identity_with_majority(self):
        pos = {"a": Vec2(0, 0), "b": Vec2(1.0, 0), "c": Vec2(2.0, 0)}
        edges = proximity_graph(pos, ENTER, EXIT, set())
        bubbles, _, serial = compute_bubbles(edges, {}, palette(pos), 1, 0.0)
        (bid,) = bubbles
        moved = {"a": Vec2(0, 0), "b": Vec2(1.0, 0), "c": Vec2(4.0, 0)}
        edges = proximity_graph(moved, ENTER, EXIT, edges)
        after, events, _ = compute_bubbles(edges, bubbles, palette(pos), serial, 1.0)
        assert set(after) == {bid}
        assert after[bid].members == frozenset({"a", "b"})
        assert [(e.kind, set(e.participants)) for e in events] == [("MemberLeft", {"c"})]
        # oracle view of the final grouping
        assert oracle_components(moved, ENTER) == {frozenset({"a", "b"})}

    def test_identity_tie_prefers_smallest_prior_id(self):
        prior = {
            "b2": SocialBubble("b2", frozenset({"a", "b"}), (0, 0, 0), 0.0),
            "b1": SocialBubble("b1", frozenset({"c", "d"}), (0, 0, 0), 0.0),
        }
        # one merged component overlapping both priors equally
        pos = {p: Vec2(i * 1.0, 0) for i, p in enumerate("abcd")}
        edges = proximity_graph(pos, ENTER, EXIT, set())
        after, _, _ = compute_bubbles(edges, prior, palette(pos), 3, 1.0)
        assert set(after) == {"b1"}

    def test_member_join_updates_color(self):
        colors = {"a": (255, 0, 0), "b": (0, 0, 255), "c": (0, 255, 0)}
        pos = {"a": Vec2(0, 0), "b": Vec2(1.0, 0)}
        edges = proximity_graph(pos, ENTER, EXIT, set())
        bubbles, _, serial = compute_bubbles(edges, {}, colors, 1, 0.0)
        pos["c"] = Vec2(2.0, 0)
        edges = proximity_graph(pos, ENTER, EXIT, edges)
        after, events, _ = compute_bubbles(edges, bubbles, colors, serial, 1.0)
        (bubble,) = after.values()
        assert bubble.members == frozenset({"a", "b", "c"})
        assert bubble.color == bubble_color([colors["a"], colors["b"], colors["c"]])
        assert [e.kind for e in events] == ["MemberJoined"]


class TestOracleEquivalence:
    @settings(max_examples=200, deadline=None)
    @given(st.lists(
        st.tuples(st.floats(0, 6, width=32), st.floats(0, 6, width=32)),
        min_size=0, max_size=10))
    def test_matches_brute_force_without_history(self, points):
        positions = {f"p{i}": Vec2(x, y) for i, (x, y) in enumerate(points)}
        bubbles, _ = run_fresh(positions)
        assert {b.members for b in bubbles.values()} == oracle_components(positions, ENTER)

    def test_seeded_batch_matches_oracle(self):
        rng = random.Random(7)
        for _ in range(300):
            n = rng.randint(0, 10)
            positions = {
                f"p{i}": Vec2(rng.uniform(0, 6), rng.uniform(0, 6)) for i in range(n)
            }
            bubbles, _ = run_fresh(positions)
            got = {b.members for b in bubbles.values()}
            assert got == oracle_components(positions, ENTER)


class TestProperties:
    @settings(max_examples=100, deadline=None)
    @given(st.lists(
        st.tuples(st.floats(0, 6, width=32), st.floats(0, 6, width=32)),
        min_size=0, max_size=8))
    def test_partition(self, points):
        positions = {f"p{i}": Vec2(x, y) for i, (x, y) in enumerate(points)}
        bubbles, _ = run_fresh(positions)
        seen = set()
        for bubble in bubbles.values():
            assert len(bubble.members) >= 2
            assert not bubble.members & seen
            seen |= bubble.members

    def test_symmetry_under_relabeling(self):
        rng = random.Random(3)
        points = [(rng.uniform(0, 5), rng.uniform(0, 5)) for _ in range(8)]
        base = {f"p{i}": Vec2(x, y) for i, (x, y) in enumerate(points)}
        renamed = {f"q{7 - i}": Vec2(x, y) for i, (x, y) in enumerate(points)}
        mapping = {f"p{i}": f"q{7 - i}" for i in range(8)}
        bubbles_a, events_a = run_fresh(base)
        bubbles_b, events_b = run_fresh(renamed)
        relabeled = {frozenset(mapping[m] for m in b.members) for b in bubbles_a.values()}
        assert relabeled == {b.members for b in bubbles_b.values()}
        kinds_a = sorted(e.kind for e in events_a)
        kinds_b = sorted(e.kind for e in events_b)
        assert kinds_a == kinds_b
