"""Datagram protocol: wire codec, transport endpoints, root server, replica."""
