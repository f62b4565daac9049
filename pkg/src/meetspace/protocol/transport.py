"""Datagram endpoints: unordered, unreliable, bounded-payload transport.

The engine only ever sees this contract. Production binds it to a UDP
socket; tests bind it to an in-memory network with seeded drop, duplication,
and bounded reordering so protocol behavior under loss is reproducible.
"""

from __future__ import annotations

import random
import socket
from typing import Optional, Protocol

from .codec import MAX_DATAGRAM

Address = str


class DatagramEndpoint(Protocol):
    address: Address

    def send(self, dest: Address, data: bytes) -> None: ...

    def receive(self) -> list[tuple[Address, bytes]]: ...


class MemoryEndpoint:
    def __init__(self, network: "MemoryNetwork", address: Address):
        self.network = network
        self.address = address

    def send(self, dest: Address, data: bytes) -> None:
        self.network.post(self.address, dest, data)

    def receive(self) -> list[tuple[Address, bytes]]:
        return self.network.drain(self.address)


class MemoryNetwork:
    """Deterministic lossy network for tests and loopback simulation.

    Each posted datagram is independently dropped or duplicated, and may be
    inserted up to `reorder_window` positions ahead of the queue tail.
    """

    def __init__(self, seed: int = 0, drop: float = 0.0, duplicate: float = 0.0,
                 reorder_window: int = 0, lossless_to: Optional[set[Address]] = None):
        self.rng = random.Random(seed)
        self.drop = drop
        self.duplicate = duplicate
        self.reorder_window = reorder_window
        self.lossless_to = lossless_to or set()
        self.queues: dict[Address, list[tuple[Address, bytes]]] = {}

    def endpoint(self, address: Address) -> MemoryEndpoint:
        self.queues.setdefault(address, [])
        return MemoryEndpoint(self, address)

    def post(self, src: Address, dest: Address, data: bytes) -> None:
        if len(data) > MAX_DATAGRAM:
            raise ValueError(f"datagram of {len(data)} bytes exceeds {MAX_DATAGRAM}")
        queue = self.queues.setdefault(dest, [])
        if dest in self.lossless_to:
            queue.append((src, data))
            return
        copies = 0 if self.rng.random() < self.drop else 1
        if copies and self.rng.random() < self.duplicate:
            copies += 1
        for _ in range(copies):
            slot = len(queue)
            if self.reorder_window:
                slot -= self.rng.randint(0, min(self.reorder_window, len(queue)))
            queue.insert(slot, (src, data))

    def drain(self, address: Address) -> list[tuple[Address, bytes]]:
        queue = self.queues.setdefault(address, [])
        out, queue[:] = list(queue), []
        return out


class UdpEndpoint:
    """Non-blocking UDP socket behind the endpoint contract."""

    def __init__(self, host: str = "0.0.0.0", port: int = 0):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((host, port))
        self.sock.setblocking(False)
        bound_host, bound_port = self.sock.getsockname()
        self.address = f"{bound_host}:{bound_port}"

    @property
    def port(self) -> int:
        return self.sock.getsockname()[1]

    def send(self, dest: Address, data: bytes) -> None:
        host, port = dest.rsplit(":", 1)
        try:
            self.sock.sendto(data, (host, int(port)))
        except OSError:
            pass  # unreachable peers are a fact of datagram life

    def receive(self) -> list[tuple[Address, bytes]]:
        out = []
        while True:
            try:
                data, (host, port) = self.sock.recvfrom(65536)
            except BlockingIOError:
                break
            except OSError:
                break
            out.append((f"{host}:{port}", data))
        return out

    def wait_readable(self, timeout: float) -> bool:
        import select
        ready, _, _ = select.select([self.sock], [], [], max(timeout, 0.0))
        return bool(ready)

    def close(self) -> None:
        self.sock.close()
