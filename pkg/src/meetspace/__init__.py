"""Shared-floor meeting space: rooms merged into one metric plane, proximity
rules that open and close interactions, a datagram replication protocol, a
deterministic movement simulator, and reporting."""

__version__ = "0.1.0"
