"""Byte transports carrying protocol frames.

The protocol only needs an ordered, reliable duplex stream. ``InMemoryChannel``
is what the tests and the benchmark use; ``TcpEndpoint`` binds the same frames
to a socket for demos across processes.
"""

from __future__ import annotations

import socket
import struct
from collections import deque

from ..errors import MalformedFrame
from .messages import frame, unframe


class InMemoryChannel:
    """Two connected endpoints; bytes written on one side are read on the other."""

    class Endpoint:
        def __init__(self, inbox: deque, outbox: deque, raw: bool):
            self._inbox = inbox
            self._outbox = outbox
            self.raw = raw
            self.bytes_sent = 0
            self.frames_sent = 0

        def send(self, msg) -> int:
            data = frame(msg, raw=self.raw)
            self._outbox.append(data)
            self.bytes_sent += len(data)
            self.frames_sent += 1
            return len(data)

        def recv(self):
            if not self._inbox:
                raise MalformedFrame("receive on an empty channel")
            return unframe(self._inbox.popleft(), raw=self.raw)

        def pending(self) -> int:
            return len(self._inbox)

    def __init__(self, raw: bool = False):
        a_to_b, b_to_a = deque(), deque()
        self.a = self.Endpoint(b_to_a, a_to_b, raw)
        self.b = self.Endpoint(a_to_b, b_to_a, raw)

    @property
    def bytes_sent(self) -> int:
        return self.a.bytes_sent + self.b.bytes_sent


class TcpEndpoint:
    """Frame-oriented wrapper around a connected TCP socket."""

    def __init__(self, sock: socket.socket, raw: bool = False):
        self.sock = sock
        self.raw = raw
        self.bytes_sent = 0

    @classmethod
    def connect(cls, host: str, port: int, raw: bool = False, timeout: float = 10.0) -> "TcpEndpoint":
        return cls(socket.create_connection((host, port), timeout=timeout), raw)

    def send(self, msg) -> int:
        data = frame(msg, raw=self.raw)
        self.sock.sendall(data)
        self.bytes_sent += len(data)
        return len(data)

    def _read_exact(self, size: int) -> bytes:
        buf = bytearray()
        while len(buf) < size:
            part = self.sock.recv(size - len(buf))
            if not part:
                raise MalformedFrame("connection closed mid-frame")
            buf += part
        return bytes(buf)

    def recv(self):
        head = self._read_exact(4)
        (length,) = struct.unpack(">I", head)
        return unframe(head + self._read_exact(length), raw=self.raw)

    def close(self) -> None:
        self.sock.close()
