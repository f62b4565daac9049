"""Operator entry points: serve, simulate, bind, tail, report, scenarios.

Exit codes are fixed per failure class so scripts can branch on them:
  0  success
  1  expectation mismatch or path-check violation (simulate)
  2  bad configuration or usage
  3  server unreachable / timed out (bind)
  4  scenario or trace file malformed
  5  server port already in use (serve)
  6  request rejected by the server (bind)

The EERY_LOG environment variable, when set, overrides the event-log path
for serve and simulate.
"""

from __future__ import annotations

import argparse
import errno
import json
import os
import signal
import sys
import time
from typing import Optional

from .engine import EngineConfig
from .errors import ConfigError, MeetspaceError, ScenarioError, TraceFormatError
from .events import encode_line, read_log
from .participants import ProxemicProfile
from .protocol import codec
from .protocol.feed import FrameFeed
from .protocol.server import DEFAULT_PORT, SERVER_ID, ServerConfig, ServerLoop
from .protocol.transport import UdpEndpoint
from .simulator import BUILTIN_SCENARIOS, Scenario, builtin_scenario, replay
from .simulator.replay import replay_trace
from .simulator.trace import read_trace, write_trace
from .space import SharedSpace, Vec2, load_rooms_file

EXIT_OK = 0
EXIT_EXPECTATION = 1
EXIT_CONFIG = 2
EXIT_TIMEOUT = 3
EXIT_SCENARIO = 4
EXIT_PORT_IN_USE = 5
EXIT_REMOTE = 6

DEFAULT_FRAME_PORT = 47799
LOG_ENV = "EERY_LOG"

PROFILE_FLAGS = (
    "intimate_radius", "personal_radius", "bubble_enter", "bubble_exit",
    "moderator_depth", "moderator_exit",
)


def _add_profile_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("proxemics overrides")
    for name in PROFILE_FLAGS:
        group.add_argument(f"--{name.replace('_', '-')}", type=float, default=None)
    group.add_argument("--person-height", type=float, default=None,
                       help="wall-shadow person height in meters (default 1.8)")


def _profile_from_args(args: argparse.Namespace) -> ProxemicProfile:
    overrides = {name: getattr(args, name) for name in PROFILE_FLAGS}
    return ProxemicProfile.from_overrides(**overrides)


def _open_log(path: Optional[str]):
    path = path or os.environ.get(LOG_ENV)
    if not path or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _load_cast_file(path: str) -> list[dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        cast = doc["cast"] if isinstance(doc, dict) else doc
        assert isinstance(cast, list)
        return cast
    except (OSError, json.JSONDecodeError, KeyError, AssertionError) as exc:
        raise ConfigError(f"bad cast file {path!r}: {exc}") from exc


# -- serve --------------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        space = load_rooms_file(args.rooms)
        profile = _profile_from_args(args)
        cast = _load_cast_file(args.cast) if args.cast else []
    except MeetspaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        endpoint = UdpEndpoint(args.host, args.port)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            print(f"error: port {args.port} already in use", file=sys.stderr)
            return EXIT_PORT_IN_USE
        print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    log_fh, close_log = _open_log(args.log)

    def event_sink(records):
        for rec in records:
            log_fh.write(encode_line(rec) + "\n")
        log_fh.flush()

    engine_config = EngineConfig(profile=profile,
                                 person_height=args.person_height or 1.8,
                                 expire_after=args.expire_after)
    config = ServerConfig(snapshot_hz=args.snapshot_hz, engine=engine_config)

    feed = None
    if args.frame_port:
        feed = FrameFeed(space, profile, args.host if args.host != "0.0.0.0"
                         else "127.0.0.1", args.frame_port)

    server = ServerLoop(space, endpoint, config, event_sink=event_sink)
    if feed is not None:
        server.frame_sink = lambda frames: feed.publish(
            server.tick_no, server.engine.now, frames)

    for entry in cast:
        try:
            server.engine.join(entry["id"], entry.get("name", entry["id"]),
                               entry["room"], tuple(entry["color"]))
            if entry.get("device"):
                server.engine.bind_device(entry["id"], entry["device"])
            if entry.get("start"):
                server.engine.update_position(entry["id"],
                                              Vec2(*entry["start"]), 1)
        except (MeetspaceError, KeyError, TypeError) as exc:
            print(f"error: cast entry {entry!r}: {exc}", file=sys.stderr)
            return EXIT_CONFIG

    stop = {"flag": False}

    def handle_signal(_signum, _frame):
        stop["flag"] = True

    signal.signal(signal.SIGINT, handle_signal)
    signal.signal(signal.SIGTERM, handle_signal)

    frame_note = f", frames on tcp/{feed.port}" if feed else ""
    print(f"meetspace server listening on udp/{endpoint.port}{frame_note}",
          flush=True)

    interval = config.tick_interval
    started = time.monotonic()
    next_tick = started + interval
    try:
        while not stop["flag"]:
            timeout = next_tick - time.monotonic()
            if timeout > 0:
                endpoint.wait_readable(min(timeout, 0.05))
            if time.monotonic() >= next_tick:
                server.tick(round(time.monotonic() - started, 6))
                next_tick += interval
    finally:
        if feed is not None:
            feed.close()
        endpoint.close()
        if close_log:
            log_fh.close()
    return EXIT_OK


# -- simulate -----------------------------------------------------------


def _resolve_scenario(ref: str) -> Scenario:
    if ref in BUILTIN_SCENARIOS:
        return builtin_scenario(ref)
    return Scenario.load(ref)


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        if args.scenario.endswith(".jsonl") or args.trace_rooms:
            if not args.trace_rooms:
                raise ScenarioError("replaying a trace needs --trace-rooms")
            space = load_rooms_file(args.trace_rooms)
            with open(args.scenario, "r", encoding="utf-8") as fh:
                records = read_trace(fh, space)
            log = replay_trace(space, records, transport=args.transport,
                               seed=args.seed)
            result_log, name = log, os.path.basename(args.scenario)
            unmatched: list = []
            violations = None
            trace = records
        else:
            scenario = _resolve_scenario(args.scenario)
            result = replay(scenario, transport=args.transport, seed=args.seed)
            result_log, name = result.log, scenario.name
            unmatched = result.unmatched
            violations = result.violations
            trace = result.trace
            space = scenario.space()
    except (ScenarioError, TraceFormatError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO

    log_fh, close_log = _open_log(args.log)
    for rec in result_log:
        log_fh.write(encode_line(rec) + "\n")
    log_fh.flush()
    if close_log:
        log_fh.close()

    if args.record_trace:
        with open(args.record_trace, "w", encoding="utf-8") as fh:
            write_trace(fh, space, trace)

    if args.report_dir:
        from .report import write_report
        write_report(space, result_log, args.report_dir)

    status = EXIT_OK
    for pattern in unmatched:
        print(f"unmatched expectation: {json.dumps(pattern)}", file=sys.stderr)
        status = EXIT_EXPECTATION
    if violations is not None:
        print(f"path check: {violations} intimate-circle violations",
              file=sys.stderr)
        if violations > (args.max_violations
                         if args.max_violations is not None else 0):
            status = EXIT_EXPECTATION
    print(f"{name}: {len(result_log)} events, "
          f"{'ok' if status == EXIT_OK else 'FAILED'}", file=sys.stderr)
    return status


# -- bind ---------------------------------------------------------------


def cmd_bind(args: argparse.Namespace) -> int:
    endpoint = UdpEndpoint("0.0.0.0", 0)
    dest = f"{args.server_host}:{args.port}"
    request = codec.encode(codec.BindDevice(args.participant, 1, args.device))
    retries = 3  # datagrams get lost; the request is idempotent
    try:
        for _attempt in range(retries):
            endpoint.send(dest, request)
            slice_end = time.monotonic() + args.timeout / retries
            while time.monotonic() < slice_end:
                endpoint.wait_readable(slice_end - time.monotonic())
                for _src, data in endpoint.receive():
                    try:
                        msg = codec.decode(data)
                    except MeetspaceError:
                        continue
                    if not isinstance(msg, codec.Event):
                        continue
                    rec = msg.record
                    if (rec.get("kind") == "DeviceBound"
                            and rec.get("participant") == args.participant
                            and rec.get("device") == args.device):
                        print(f"bound {args.device} to {args.participant}")
                        return EXIT_OK
                    if rec.get("kind") == "Error":
                        print(f"error: {rec.get('code')}: {rec.get('detail', '')}",
                              file=sys.stderr)
                        return EXIT_REMOTE
    finally:
        endpoint.close()
    print(f"error: no reply from {dest} within {args.timeout}s", file=sys.stderr)
    return EXIT_TIMEOUT


# -- tail ---------------------------------------------------------------


def _format_event(rec: dict) -> str:
    skip = {"eseq", "tick", "t", "kind"}
    detail = " ".join(f"{k}={rec[k]}" for k in rec if k not in skip)
    return f"[{rec.get('t', 0):9.3f}] {rec.get('kind', '?'):<22} {detail}"


def cmd_tail(args: argparse.Namespace) -> int:
    path = args.log or os.environ.get(LOG_ENV)
    if not path:
        print("error: no log path (give LOG or set EERY_LOG)", file=sys.stderr)
        return EXIT_CONFIG
    wanted = set(args.kinds.split(",")) if args.kinds else None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            while True:
                line = fh.readline()
                if line:
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError:
                        continue
                    if wanted and rec.get("kind") not in wanted:
                        continue
                    print(_format_event(rec))
                elif args.follow:
                    time.sleep(0.2)
                else:
                    break
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        pass
    return EXIT_OK


# -- report -------------------------------------------------------------


def cmd_report(args: argparse.Namespace) -> int:
    from .report import load_log, write_report
    try:
        space = load_rooms_file(args.rooms)
        log = load_log(args.log)
    except (MeetspaceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    written = write_report(space, log, args.out)
    for path in written:
        print(path)
    return EXIT_OK


# -- scenarios ----------------------------------------------------------


def cmd_scenarios(args: argparse.Namespace) -> int:
    if args.export:
        os.makedirs(args.export, exist_ok=True)
        for name in BUILTIN_SCENARIOS:
            path = os.path.join(args.export, f"{name}.json")
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(builtin_scenario(name).to_dict(), fh, indent=2)
            print(path)
    else:
        for name in BUILTIN_SCENARIOS:
            scenario = builtin_scenario(name)
            print(f"{name}: {len(scenario.cast)} participants, "
                  f"{scenario.duration:.0f}s")
    return EXIT_OK


# -- parser -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meetspace",
        description="shared-floor meeting space server, simulator, and reports")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the root server")
    p.add_argument("--rooms", required=True, help="room configuration JSON")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--snapshot-hz", type=float, default=20.0)
    p.add_argument("--frame-port", type=int, default=DEFAULT_FRAME_PORT,
                   help="TCP awareness-frame feed port (0 disables)")
    p.add_argument("--cast", help="JSON file of participants to pre-join")
    p.add_argument("--expire-after", type=float, default=5.0,
                   help="drop silent participants after this many seconds (0 = never)")
    p.add_argument("--log", help="event log path ('-' for stdout)")
    p.add_argument("--seed", type=int, default=0)
    _add_profile_flags(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="replay a scenario or trace")
    p.add_argument("scenario",
                   help=f"built-in name ({', '.join(BUILTIN_SCENARIOS)}), "
                        "scenario JSON path, or trace .jsonl")
    p.add_argument("--transport", choices=["inproc", "loopback"],
                   default="inproc")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log", help="event log path ('-' for stdout)")
    p.add_argument("--record-trace", help="write the movement trace here")
    p.add_argument("--report-dir", help="render figures and CSV tables here")
    p.add_argument("--trace-rooms", help="rooms JSON when replaying a trace")
    p.add_argument("--max-violations", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bind", help="bind a handheld device to a participant")
    p.add_argument("participant")
    p.add_argument("device")
    p.add_argument("--server-host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--timeout", type=float, default=2.0)
    p.set_defaults(func=cmd_bind)

    p = sub.add_parser("tail", help="pretty-print an event log")
    p.add_argument("log", nargs="?")
    p.add_argument("--follow", action="store_true")
    p.add_argument("--kinds", help="comma-separated kinds to keep")
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("report", help="render figures and tables from a log")
    p.add_argument("--log", required=True)
    p.add_argument("--rooms", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("scenarios", help="list or export built-in scenarios")
    p.add_argument("--export", help="write scenario JSON files to this directory")
    p.set_defaults(func=cmd_scenarios)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
