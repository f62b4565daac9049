"""One-way TCP feed of per-room awareness frames, one JSON object per line.

Display clients and the floor-plan gateway subscribe here; state mutations
still travel as datagrams. Each connection first receives a config line
(room geometry plus the active thresholds), then a frames line per tick.
"""

from __future__ import annotations

import json
import socket
import threading
from dataclasses import asdict

from ..participants import ProxemicProfile
from ..space import SharedSpace


class FrameFeed:
    def __init__(self, space: SharedSpace, profile: ProxemicProfile,
                 host: str = "127.0.0.1", port: int = 0):
        self.space = space
        self.profile = profile
        self.listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.listener.bind((host, port))
        self.listener.listen(8)
        self.host, self.port = self.listener.getsockname()
        self._clients: list[socket.socket] = []
        self._lock = threading.Lock()
        self._closed = False
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    def _config_line(self) -> bytes:
        doc = {
            "type": "config",
            "rooms": {
                room.id: {
                    "bounds": [room.virtual_rect.x0, room.virtual_rect.y0,
                               room.virtual_rect.x1, room.virtual_rect.y1],
                    "display": list(self.space.display_interval()),
                }
                for room in self.space.rooms.values()
            },
            "profile": asdict(self.profile),
        }
        return (json.dumps(doc, separators=(",", ":")) + "\n").encode()

    def _accept_loop(self) -> None:
        while not self._closed:
            try:
                conn, _addr = self.listener.accept()
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            try:
                conn.sendall(self._config_line())
            except OSError:
                conn.close()
                continue
            with self._lock:
                self._clients.append(conn)

    def publish(self, tick: int, now: float, frames: dict) -> None:
        line = (json.dumps({"type": "frames", "tick": tick, "t": round(now, 3),
                            "frames": frames}, separators=(",", ":")) + "\n").encode()
        with self._lock:
            alive = []
            for conn in self._clients:
                try:
                    conn.sendall(line)
                    alive.append(conn)
                except OSError:
                    conn.close()
            self._clients = alive

    def close(self) -> None:
        self._closed = True
        try:
            self.listener.close()
        finally:
            with self._lock:
                for conn in self._clients:
                    conn.close()
                self._clients = []
