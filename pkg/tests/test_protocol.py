"""Server loop and replica convergence over a lossy in-memory network."""

import random

import pytest

from meetspace.engine import EngineConfig
from meetspace.protocol import codec
from meetspace.protocol.codec import encode_snapshot_payload
from meetspace.protocol.replica import Replica
from meetspace.protocol.server import FLAG_OBSERVER, ServerConfig, ServerLoop
from meetspace.protocol.transport import MemoryNetwork

TICK = 0.05


class Peer:
    """A test client: endpoint plus replica, with Hello retry."""

    def __init__(self, net: MemoryNetwork, name: str):
        self.name = name
        self.endpoint = net.endpoint(name)
        self.replica = Replica()
        self.inbox: list[codec.Message] = []
        self.seq = 0

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def hello_observer(self):
        self.endpoint.send("srv", codec.encode(
            codec.Hello(self.name, self.next_seq(), "roomA", (0, 0, 0), "", FLAG_OBSERVER)))

    def hello_join(self, room: str, color, name=None):
        self.endpoint.send("srv", codec.encode(
            codec.Hello(self.name, self.next_seq(), room, color, name or self.name)))

    def send(self, msg: codec.Message):
        self.endpoint.send("srv", codec.encode(msg))

    def pump(self):
        for _src, data in self.endpoint.receive():
            msg = codec.decode(data)
            self.inbox.append(msg)
            self.replica.apply(msg)


def make_server(space, net, **engine_kwargs):
    engine_kwargs.setdefault("expire_after", 0.0)
    config = ServerConfig(engine=EngineConfig(**engine_kwargs))
    return ServerLoop(space, net.endpoint("srv"), config)


def run_ticks(server, peers, n):
    for _ in range(n):
        server.tick((server.tick_no + 1) * TICK)
        for peer in peers:
            peer.pump()


def states_equal(server: ServerLoop, replica: Replica) -> bool:
    a = server.engine.snapshot_state()
    b = replica.snapshot_state()
    return (encode_snapshot_payload(a) == encode_snapshot_payload(b)
            and a.tick == b.tick)


def content_payload(state) -> bytes:
    """Replicated content only: event/tick counters differ across runs when
    different numbers of datagrams were accepted, state must not."""
    import dataclasses
    return encode_snapshot_payload(dataclasses.replace(state, tick=0, eseq=0))


class TestHandshake:
    def test_join_then_ack(self, two_rooms):
        net = MemoryNetwork()
        server = make_server(two_rooms, net)
        alice = Peer(net, "alice")
        alice.hello_join("roomA", (255, 0, 0))
        run_ticks(server, [alice], 1)
        acks = [m for m in alice.inbox if isinstance(m, codec.HelloAck)]
        assert acks and acks[0].status == codec.STATUS_OK
        assert "alice" in server.engine.roster.participants

    def test_color_collision_status(self, two_rooms):
        net = MemoryNetwork()
        server = make_server(two_rooms, net)
        alice, bob = Peer(net, "alice"), Peer(net, "bob")
        alice.hello_join("roomA", (255, 0, 0))
        run_ticks(server, [alice], 1)
        bob.hello_join("roomA", (255, 0, 0))
        run_ticks(server, [alice, bob], 1)
        acks = [m for m in bob.inbox if isinstance(m, codec.HelloAck)]
        assert acks[0].status == codec.STATUS_COLOR_COLLISION

    def test_duplicate_hello_is_idempotent(self, two_rooms):
        net = MemoryNetwork()
        server = make_server(two_rooms, net)
        alice = Peer(net, "alice")
        alice.hello_join("roomA", (255, 0, 0))
        alice.hello_join("roomA", (255, 0, 0))
        run_ticks(server, [alice], 1)
        joins = [r for r in server.engine.log if r["kind"] == "ParticipantJoined"]
        assert len(joins) == 1


class TestIdempotence:
    def setup_alice(self, two_rooms, net):
        server = make_server(two_rooms, net)
        alice = Peer(net, "alice")
        alice.hello_join("roomA", (255, 0, 0))
        run_ticks(server, [alice], 1)
        return server, alice

    def test_duplicate_position_update(self, two_rooms):
        net = MemoryNetwork()
        server, alice = self.setup_alice(two_rooms, net)
        msg = codec.PositionUpdate("alice", 5, 1.0, 1.0)
        alice.send(msg)
        run_ticks(server, [alice], 1)
        once = encode_snapshot_payload(server.engine.snapshot_state())
        once_events = len(server.engine.log)
        alice.send(msg)
        alice.send(msg)
        run_ticks(server, [alice], 1)
        again = encode_snapshot_payload(server.engine.snapshot_state())
        assert once == again
        assert len(server.engine.log) == once_events

    def test_reverse_order_equals_in_order(self, two_rooms):
        updates = [codec.PositionUpdate("alice", seq, 0.5 * seq, 1.0)
                   for seq in range(1, 6)]

        def run(ordering):
            net = MemoryNetwork()
            server, alice = self.setup_alice(two_rooms, net)
            for msg in ordering:
                alice.send(msg)
            run_ticks(server, [alice], 1)
            return content_payload(server.engine.snapshot_state())

        in_order = run(updates)
        reverse = run(list(reversed(updates)))
        assert in_order == reverse
        rng = random.Random(5)
        for _ in range(5):
            shuffled = updates[:]
            rng.shuffle(shuffled)
            assert run(shuffled) == in_order


class TestReplicaApplication:
    def test_snapshot_then_stale_event_ignored(self, two_rooms):
        net = MemoryNetwork()
        server = make_server(two_rooms, net)
        alice = Peer(net, "alice")
        monitor = Peer(net, "mon")
        alice.hello_join("roomA", (255, 0, 0))
        run_ticks(server, [alice], 1)
        alice.send(codec.PositionUpdate("alice", 1, 2.0, 1.0))
        run_ticks(server, [alice], 1)
        monitor.hello_observer()
        run_ticks(server, [alice, monitor], 1)  # monitor bootstraps from snapshot
        assert states_equal(server, monitor.replica)
        stale = codec.Event("server", 1, 1, 1,
                            {"kind": "PositionChanged", "participant": "alice",
                             "x": 9.9, "y": 9.9, "seq": 99})
        before = monitor.replica.snapshot_state()
        monitor.replica.apply(stale)
        assert monitor.replica.snapshot_state() == before

    def test_event_gap_bridged_by_snapshot(self, two_rooms):
        net = MemoryNetwork()
        server = make_server(two_rooms, net)
        alice = Peer(net, "alice")
        alice.hello_join("roomA", (255, 0, 0))
        run_ticks(server, [alice], 1)

        replica = Replica()
        # hand-deliver an event far ahead of anything: it must be parked
        gapped = codec.Event("server", 1, 50, 2,
                             {"kind": "PositionChanged", "participant": "alice",
                              "x": 1.0, "y": 1.0, "seq": 3})
        replica.apply(gapped)
        assert replica.eseq == 0 and not replica.participants
        # a later snapshot replaces the view wholesale
        for seq in (1, 2, 3):
            alice.send(codec.PositionUpdate("alice", seq, 0.5 + 0.5 * seq, 1.0))
        run_ticks(server, [alice], 1)
        for part in codec.snapshot_messages(server.engine.snapshot_state(), "server", 9):
            replica.apply(part)
        assert states_equal(server, replica)

    def test_buffered_events_drain_in_order(self, two_rooms):
        net = MemoryNetwork()
        server = make_server(two_rooms, net)
        alice = Peer(net, "alice")
        mon = Peer(net, "mon")
        alice.hello_join("roomA", (255, 0, 0))
        mon.hello_observer()
        run_ticks(server, [alice, mon], 1)
        for seq in (1, 2, 3):
            alice.send(codec.PositionUpdate("alice", seq, 1.0 + 0.5 * seq, 1.0))
        run_ticks(server, [alice], 1)
        events = [m for m in alice.inbox if isinstance(m, codec.Event) and m.eseq > 0]
        replica = Replica()
        # bootstrap exactly to the join, then deliver the rest out of order
        replica.apply(events[0])
        for msg in reversed(events[1:]):
            replica.apply(msg)
        assert replica.eseq == events[-1].eseq
        assert replica.participants["alice"].seq == 3

    def test_lossless_stream_equals_lossy_plus_snapshot(self, two_rooms):
        def script(server, alice):
            for seq in range(1, 20):
                alice.send(codec.PositionUpdate("alice", seq, 0.1 * seq % 3.9, 1.0))
                run_ticks(server, [alice], 1)

        # lossless run
        net1 = MemoryNetwork()
        server1 = make_server(two_rooms, net1)
        alice1 = Peer(net1, "alice")
        mon1 = Peer(net1, "mon")
        alice1.hello_join("roomA", (255, 0, 0))
        mon1.hello_observer()
        run_ticks(server1, [alice1, mon1], 1)
        for seq in range(1, 20):
            alice1.send(codec.PositionUpdate("alice", seq, 0.1 * seq % 3.9, 1.0))
            run_ticks(server1, [alice1, mon1], 1)

        # same inbound history, lossy fan-out, then one guaranteed snapshot
        net2 = MemoryNetwork(seed=3, drop=0.4, duplicate=0.2, reorder_window=4,
                             lossless_to={"srv"})
        server2 = make_server(two_rooms, net2)
        alice2 = Peer(net2, "alice")
        mon2 = Peer(net2, "mon")
        alice2.hello_join("roomA", (255, 0, 0))
        mon2.hello_observer()
        run_ticks(server2, [alice2, mon2], 1)
        assert len(server2.clients) == 2
        for seq in range(1, 20):
            alice2.send(codec.PositionUpdate("alice", seq, 0.1 * seq % 3.9, 1.0))
            run_ticks(server2, [alice2, mon2], 1)
        net2.drop = net2.duplicate = 0.0
        net2.reorder_window = 0
        while not states_equal(server2, mon2.replica):
            run_ticks(server2, [alice2, mon2], 1)

        assert states_equal(server1, mon1.replica)
        assert (content_payload(mon1.replica.snapshot_state())
                == content_payload(mon2.replica.snapshot_state()))


class TestLossyConvergence:
    @pytest.mark.parametrize("seed", range(5))
    def test_converges_after_final_snapshot(self, two_rooms, seed):
        net = MemoryNetwork(seed=seed, drop=0.2, duplicate=0.1, reorder_window=5)
        server = make_server(two_rooms, net)
        peers = [Peer(net, "alice"), Peer(net, "bob"), Peer(net, "mon")]
        alice, bob, mon = peers
        for _ in range(50):
            if len(server.clients) < 3:
                alice.hello_join("roomA", (250, 10, 10))
                bob.hello_join("roomB", (10, 10, 250))
                mon.hello_observer()
                run_ticks(server, peers, 1)
        assert len(server.clients) == 3

        rng = random.Random(1000 + seed)
        for seq in range(1, 40):
            alice.send(codec.PositionUpdate("alice", seq,
                                            round(rng.uniform(0, 4), 3),
                                            round(rng.uniform(0, 4), 3)))
            bob.send(codec.PositionUpdate("bob", seq,
                                          round(rng.uniform(0, 6), 3),
                                          round(rng.uniform(0, 3.6), 3)))
            run_ticks(server, peers, 1)

        # No further state changes; loss continues but some snapshot gets through.
        for _ in range(200):
            run_ticks(server, peers, 1)
            if all(states_equal(server, p.replica) for p in peers):
                break
        for peer in peers:
            assert states_equal(server, peer.replica)


class TestModeratorPayloadRelay:
    def make_holder(self, two_rooms, net):
        server = make_server(two_rooms, net)
        alice, bob = Peer(net, "alice"), Peer(net, "bob")
        alice.hello_join("roomA", (255, 0, 0))
        bob.hello_join("roomA", (0, 255, 0))
        run_ticks(server, [alice, bob], 1)
        alice.send(codec.BindDevice("alice", 1, "da"))
        bob.send(codec.BindDevice("bob", 2, "db"))
        run_ticks(server, [alice, bob], 1)
        alice.send(codec.PositionUpdate("alice", 1, 2.0, 1.0))  # inside control zone
        bob.send(codec.PositionUpdate("bob", 1, 2.0, 3.0))
        run_ticks(server, [alice, bob], 1)
        assert server.engine.moderator.holder == "alice"
        return server, alice, bob

    def test_holder_payload_reaches_every_client(self, two_rooms):
        net = MemoryNetwork()
        server, alice, bob = self.make_holder(two_rooms, net)
        payload = b"camera-pose:42"
        alice.send(codec.ModeratorPayload("alice", 9, payload))
        run_ticks(server, [alice, bob], 1)
        for peer in (alice, bob):
            relayed = [m for m in peer.inbox if isinstance(m, codec.ModeratorPayload)]
            assert [m.payload for m in relayed] == [payload]

    def test_non_holder_rejected_and_nothing_relayed(self, two_rooms):
        net = MemoryNetwork()
        server, alice, bob = self.make_holder(two_rooms, net)
        bob.send(codec.ModeratorPayload("bob", 9, b"hijack"))
        run_ticks(server, [alice, bob], 1)
        assert not [m for m in alice.inbox if isinstance(m, codec.ModeratorPayload)]
        errors = [m for m in bob.inbox
                  if isinstance(m, codec.Event) and m.record["kind"] == "Error"]
        assert errors and errors[0].record["code"] == "NotModerator"

    def test_speech_channel_opened_before_broadcast(self, two_rooms):
        net = MemoryNetwork()
        server, alice, bob = self.make_holder(two_rooms, net)
        alice.send(codec.ModeratorPayload("alice", 9, b"x"))
        run_ticks(server, [alice, bob], 1)
        kinds = [r["kind"] for r in server.engine.log]
        assert kinds.index("SpeechChannelOpened") < kinds.index("ModeratorBroadcast")


class TestOneShotTools:
    def test_bind_without_hello_gets_confirmation(self, two_rooms):
        net = MemoryNetwork()
        server = make_server(two_rooms, net)
        alice = Peer(net, "alice")
        alice.hello_join("roomA", (255, 0, 0))
        run_ticks(server, [alice], 1)
        tool = Peer(net, "tool")
        tool.endpoint.send("srv", codec.encode(codec.BindDevice("alice", 1, "dev9")))
        run_ticks(server, [alice, tool], 1)
        confirmations = [m for m in tool.inbox
                         if isinstance(m, codec.Event) and m.record["kind"] == "DeviceBound"]
        assert confirmations and confirmations[0].record["device"] == "dev9"

    def test_bind_conflict_reports_error(self, two_rooms):
        net = MemoryNetwork()
        server = make_server(two_rooms, net)
        alice, bob = Peer(net, "alice"), Peer(net, "bob")
        alice.hello_join("roomA", (255, 0, 0))
        bob.hello_join("roomA", (0, 255, 0))
        run_ticks(server, [alice, bob], 1)
        alice.send(codec.BindDevice("alice", 1, "dev1"))
        run_ticks(server, [alice, bob], 1)
        tool = Peer(net, "tool")
        tool.endpoint.send("srv", codec.encode(codec.BindDevice("bob", 1, "dev1")))
        run_ticks(server, [alice, bob, tool], 1)
        errors = [m for m in tool.inbox
                  if isinstance(m, codec.Event) and m.record["kind"] == "Error"]
        assert errors and errors[0].record["code"] == "DeviceAlreadyBound"


class TestExpiry:
    def test_silent_participant_expires(self, two_rooms):
        net = MemoryNetwork()
        config = ServerConfig(engine=EngineConfig(expire_after=0.5))
        server = ServerLoop(two_rooms, net.endpoint("srv"), config)
        alice = Peer(net, "alice")
        alice.hello_join("roomA", (255, 0, 0))
        run_ticks(server, [alice], 1)
        alice.send(codec.PositionUpdate("alice", 1, 1.0, 1.0))
        run_ticks(server, [alice], 1)
        run_ticks(server, [alice], 15)  # 0.75 s of silence
        assert "alice" not in server.engine.roster.participants
        leaves = [r for r in server.engine.log if r["kind"] == "ParticipantLeft"]
        assert leaves and leaves[0]["reason"] == "timeout"
