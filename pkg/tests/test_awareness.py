"""Derived render state: circles, markers, shadows, paths, haptic alerts."""

import math

import pytest

from meetspace.awareness import (
    IntimateAlertTracker,
    derive_frames,
    edge_marker,
    wall_shadow,
)
from meetspace.bubbles import SocialBubble
from meetspace.engine import Engine, EngineConfig
from meetspace.participants import Participant, ProxemicProfile
from meetspace.space import Rect, SharedSpace, Vec2

PROFILE = ProxemicProfile()


def make_space():
    space = SharedSpace()
    space.register_room("A", 6.0, 3.0, (2.0, 4.0))   # virtual [-3,3] x [0,3]
    space.register_room("B", 4.0, 4.0, (1.0, 3.0))   # virtual [-2,2] x [0,4]
    return space


def participant(pid, room, pos, color=(10, 20, 30), device="dev"):
    return Participant(id=pid, name=pid, color=color, home_room=room,
                       position=pos, device=f"{device}-{pid}"[:8])


class TestWallShadow:
    def test_height_follows_distance(self):
        p = participant("a", "A", Vec2(0.0, 0.5))
        assert wall_shadow(p, False, None).height == pytest.approx(1.3)

    def test_shadow_vanishes_at_person_height(self):
        p = participant("a", "A", Vec2(0.0, 1.8))
        assert wall_shadow(p, False, None).height == 0.0

    def test_nearer_person_casts_taller_shadow(self):
        near = participant("a", "A", Vec2(0.0, 0.5))
        far = participant("b", "A", Vec2(0.0, 1.0), color=(1, 2, 3))
        assert wall_shadow(near, False, None).height > wall_shadow(far, False, None).height

    def test_exact_grid(self):
        for i in range(7):
            d = i * 0.3
            p = participant("a", "A", Vec2(0.0, d))
            assert wall_shadow(p, False, None).height == max(0.0, 1.8 - d)


class TestEdgeMarker:
    def test_anchor_is_closest_boundary_point(self):
        rect = Rect(-3.0, 0.0, 3.0, 3.0)
        p = participant("a", "B", Vec2(0.0, 3.5))
        marker = edge_marker(p, rect)
        assert marker.anchor == Vec2(0.0, 3.0)
        assert marker.direction == Vec2(0.0, 1.0)
        assert marker.blank_intimate

    def test_anchor_minimizes_distance_brute_force(self):
        rect = Rect(-2.0, 0.0, 2.0, 4.0)
        for pos in (Vec2(2.7, 1.3), Vec2(-3.1, 4.4), Vec2(0.4, -1.0), Vec2(2.5, 4.5)):
            marker = edge_marker(participant("a", "A", pos), rect)
            got = marker.anchor.dist(pos)
            best = math.inf
            steps = 800
            for i in range(steps + 1):
                fx = rect.x0 + (rect.x1 - rect.x0) * i / steps
                fy = rect.y0 + (rect.y1 - rect.y0) * i / steps
                for cand in (Vec2(fx, rect.y0), Vec2(fx, rect.y1),
                             Vec2(rect.x0, fy), Vec2(rect.x1, fy)):
                    best = min(best, cand.dist(pos))
            assert got <= best + 1e-6


class TestFrames:
    def test_single_room_single_circle(self):
        space = SharedSpace()
        space.register_room("A", 4.0, 4.0, (1.0, 3.0))
        people = {"a": participant("a", "A", Vec2(0.0, 1.0))}
        frames = derive_frames(space, people, {}, None, [], [], PROFILE)
        frame = frames["A"]
        assert len(frame.circles) == 1 and not frame.markers

    def test_out_of_reach_participant_becomes_marker(self):
        space = make_space()
        people = {"a": participant("a", "B", Vec2(0.0, 3.5))}
        frames = derive_frames(space, people, {}, None, [], [], PROFILE)
        assert len(frames["B"].circles) == 1
        assert len(frames["A"].markers) == 1
        assert frames["A"].markers[0].anchor == Vec2(0.0, 3.0)

    def test_every_participant_in_every_frame_exactly_once(self):
        space = make_space()
        people = {
            "a": participant("a", "A", Vec2(2.5, 2.5)),
            "b": participant("b", "B", Vec2(0.0, 3.8), color=(1, 1, 1)),
            "c": participant("c", "A", Vec2(0.0, 1.0), color=(2, 2, 2)),
        }
        frames = derive_frames(space, people, {}, None, [], [], PROFILE)
        for frame in frames.values():
            ids = [c.participant for c in frame.circles] + [m.participant for m in frame.markers]
            assert sorted(ids) == ["a", "b", "c"]

    def test_bubble_members_share_ring_color(self):
        space = make_space()
        people = {
            "a": participant("a", "A", Vec2(0.0, 1.0), color=(255, 0, 0)),
            "b": participant("b", "A", Vec2(0.8, 1.0), color=(0, 0, 255)),
        }
        bubble = SocialBubble("b1", frozenset({"a", "b"}), (128, 0, 128), 0.0)
        frames = derive_frames(space, people, {"b1": bubble}, None, [], [], PROFILE)
        rings = {c.participant: c.personal_color for c in frames["A"].circles}
        assert rings["a"] == rings["b"] == (128, 0, 128)
        inner = {c.participant: c.intimate_color for c in frames["A"].circles}
        assert inner["a"] == (255, 0, 0) and inner["b"] == (0, 0, 255)

    def test_moderator_flag_on_shadow(self):
        space = make_space()
        people = {"a": participant("a", "A", Vec2(0.0, 1.0))}
        frames = derive_frames(space, people, {}, "a", [], [], PROFILE)
        assert frames["A"].shadows[0].is_moderator


class TestAlerts:
    def run(self, tracker, d, now):
        people = {
            "a": participant("a", "A", Vec2(0.0, 0.0)),
            "b": participant("b", "A", Vec2(d, 0.0), color=(1, 1, 1)),
        }
        return tracker.step(people, now)

    def test_mutual_invasion_alerts_both_devices(self):
        tracker = IntimateAlertTracker(PROFILE)
        alerts = self.run(tracker, 0.25, 0.0)
        assert {(a.victim, a.intruder) for a in alerts} == {("a", "b"), ("b", "a")}
        assert {a.device for a in alerts} == {"dev-a", "dev-b"}

    def test_hysteresis_keeps_pair_active(self):
        tracker = IntimateAlertTracker(PROFILE)
        self.run(tracker, 0.25, 0.0)
        self.run(tracker, 0.32, 0.5)
        assert tracker.active  # still inside the exit band

    def test_exit_clears_pair(self):
        tracker = IntimateAlertTracker(PROFILE)
        self.run(tracker, 0.25, 0.0)
        self.run(tracker, 0.40, 0.5)
        assert not tracker.active

    def test_rate_limit_one_per_second(self):
        tracker = IntimateAlertTracker(PROFILE)
        times = [0.0, 0.3, 0.6, 0.9, 1.0, 1.3, 1.9, 2.0]
        emitted = []
        for now in times:
            for alert in self.run(tracker, 0.25, now):
                emitted.append((now, alert.victim))
        per_victim = [t for t, v in emitted if v == "a"]
        assert per_victim == [0.0, 1.0, 2.0]
        for earlier, later in zip(per_victim, per_victim[1:]):
            assert later - earlier >= PROFILE.alert_interval

    def test_reentry_cannot_beat_rate_limit(self):
        tracker = IntimateAlertTracker(PROFILE)
        assert self.run(tracker, 0.25, 0.0)
        assert not self.run(tracker, 0.50, 0.2)  # cleared
        assert not self.run(tracker, 0.25, 0.4)  # re-entered too soon
        assert self.run(tracker, 0.25, 1.1)

    def test_unbound_victim_gets_no_alert(self):
        tracker = IntimateAlertTracker(PROFILE)
        people = {
            "a": Participant(id="a", name="a", color=(0, 0, 0), home_room="A",
                             position=Vec2(0.0, 0.0), device=None),
            "b": participant("b", "A", Vec2(0.2, 0.0), color=(1, 1, 1)),
        }
        alerts = tracker.step(people, 0.0)
        assert alerts == []  # unbound: feels nothing, and is not an intruder


class TestInteractionRequests:
    def make_engine(self):
        engine = Engine(make_space(), EngineConfig(expire_after=0.0))
        engine.join("alice", "Alice", "A", (255, 0, 0))
        engine.join("bob", "Bob", "B", (0, 0, 255))
        engine.bind_device("alice", "da")
        engine.bind_device("bob", "db")
        return engine

    def test_out_of_reach_target_gets_glowing_path(self):
        engine = self.make_engine()
        engine.update_position("alice", Vec2(5.5, 1.0), 1)   # virtual (2.5, 1.0)
        engine.update_position("bob", Vec2(2.0, 3.5), 1)     # virtual (0.0, 3.5), outside A
        path = engine.request_interaction("alice", "bob")
        assert path is not None
        assert path.target_room == "B"
        assert path.start == Vec2(0.0, 3.5)
        # endpoint clamped into B's rectangle [-2,2]x[0,4]
        assert path.end == Vec2(2.0, 1.0)
        frame = engine.frames()["B"]
        assert frame["paths"] and frame["paths"][0]["requester"] == "alice"

    def test_reachable_target_no_path(self):
        engine = self.make_engine()
        engine.update_position("alice", Vec2(2.0, 1.0), 1)
        engine.update_position("bob", Vec2(1.0, 2.0), 1)     # virtual (-2.0, 2.0), inside A
        assert engine.request_interaction("alice", "bob") is None

    def test_path_expires(self):
        engine = self.make_engine()
        engine.update_position("alice", Vec2(5.5, 1.0), 1)
        engine.update_position("bob", Vec2(2.0, 3.5), 1)
        engine.request_interaction("alice", "bob")
        engine.set_clock(1, 11.0)
        assert engine.frames()["B"]["paths"] == []
