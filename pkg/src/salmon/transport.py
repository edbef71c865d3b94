"""Ports: the swappable interface layer between programs and their transport.

Program code only talks to :class:`Port`. Swapping :class:`UdpPort` for
:class:`LoopbackPort` moves a program from a networked deployment to a
single-process test harness without touching the program itself.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading
from abc import ABC, abstractmethod
from collections import deque
from typing import Callable, Iterable

from .protocol import DecodeError, Telegram, decode, encode, telegram_name

log = logging.getLogger(__name__)

MAX_DATAGRAM = 65507


class PortError(OSError):
    pass


class PortClosed(PortError):
    pass


def parse_addr(addr) -> tuple[str, int]:
    if isinstance(addr, tuple):
        return addr[0], int(addr[1])
    host, sep, port = str(addr).rpartition(":")
    if not sep or not host:
        raise ValueError(f"address must look like host:port, got {addr!r}")
    return host, int(port)


class Port(ABC):
    """One program's connection: ``send`` fans out to its peers, ``receive`` yields whole telegrams."""

    closed = False

    def send(self, telegram: Telegram) -> None:
        self.send_bytes(encode(telegram))

    def send_bytes(self, data: bytes) -> None:
        if self.closed:
            raise PortClosed("send on closed port")
        if len(data) > MAX_DATAGRAM:
            raise PortError(f"datagram of {len(data)} bytes exceeds {MAX_DATAGRAM}")
        self._send(bytes(data))

    @abstractmethod
    def _send(self, data: bytes) -> None: ...

    @abstractmethod
    def receive_bytes(self, timeout: float | None = None) -> bytes | None:
        """Next datagram, or None after ``timeout`` seconds (0 polls, None blocks)."""

    def receive(self, timeout: float | None = None) -> Telegram | None:
        data = self.receive_bytes(timeout)
        return None if data is None else decode(data)

    def close(self) -> None:
        self.closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class MemoryPort(Port):
    """Records everything sent; inbound datagrams are queued by hand. For unit tests."""

    def __init__(self):
        self.sent: list[Telegram] = []
        self.inbox: deque[bytes] = deque()

    def _send(self, data: bytes) -> None:
        self.sent.append(decode(data))

    def inject(self, telegram_or_bytes) -> None:
        data = telegram_or_bytes if isinstance(telegram_or_bytes, (bytes, bytearray)) else encode(telegram_or_bytes)
        self.inbox.append(bytes(data))

    def receive_bytes(self, timeout=None):
        return self.inbox.popleft() if self.inbox else None


class LoopbackNetwork:
    """In-process datagram switch: named endpoints, ordered delivery, no loss."""

    def __init__(self):
        self._queues: dict[str, queue.Queue] = {}

    def port(self, name: str, peers: Iterable[str] = ()) -> "LoopbackPort":
        if name in self._queues:
            raise PortError(f"endpoint {name!r} already bound")
        self._queues[name] = queue.Queue()
        return LoopbackPort(self, name, tuple(peers))

    def _deliver(self, name: str, data: bytes):
        q = self._queues.get(name)
        if q is not None:
            q.put(data)


class LoopbackPort(Port):
    def __init__(self, network: LoopbackNetwork, name: str, peers: tuple[str, ...]):
        self.network = network
        self.name = name
        self.peers = peers

    def _send(self, data):
        for peer in self.peers:
            self.network._deliver(peer, data)

    def receive_bytes(self, timeout=None):
        q = self.network._queues[self.name]
        try:
            if timeout == 0:
                return q.get_nowait()
            return q.get(timeout=timeout)
        except queue.Empty:
            return None


class UdpPort(Port):
    """One UDP socket bound to ``bind_addr``; every telegram goes to all ``peers`` as one datagram."""

    def __init__(self, bind_addr, peers=()):
        self.bind_addr = parse_addr(bind_addr)
        self.peers = tuple(parse_addr(p) for p in peers)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 4 << 20)
            self.sock.bind(self.bind_addr)
        except OSError as exc:
            self.sock.close()
            raise PortError(f"cannot bind {self.bind_addr[0]}:{self.bind_addr[1]}: {exc.strerror or exc}") from None
        self._timeout = -1.0

    @property
    def address(self) -> tuple[str, int]:
        return self.sock.getsockname()

    def _send(self, data):
        for peer in self.peers:
            try:
                self.sock.sendto(data, peer)
            except ConnectionRefusedError:
                pass  # peer not up yet; UDP gives no delivery guarantee anyway

    def receive_bytes(self, timeout=None):
        if self.closed:
            raise PortClosed("receive on closed port")
        if timeout != self._timeout:
            self.sock.settimeout(timeout)
            self._timeout = timeout
        while True:
            try:
                data, _ = self.sock.recvfrom(65535)
                return data
            except (socket.timeout, BlockingIOError):
                return None
            except ConnectionRefusedError:
                continue

    def close(self):
        if not self.closed:
            super().close()
            self.sock.close()


def open_udp_port(bind_addr, peer_addr=None) -> UdpPort:
    if peer_addr is None:
        peers = ()
    elif isinstance(peer_addr, (list, tuple)) and peer_addr and not isinstance(peer_addr[1], int):
        peers = tuple(peer_addr)
    else:
        peers = (peer_addr,)
    return UdpPort(bind_addr, peers)


class Dispatcher:
    """Decode datagrams from a port and hand each to the handler registered for its type.

    Malformed datagrams and telegrams without a handler are counted and
    logged, never raised.
    """

    def __init__(self, port: Port, handlers: dict[type, Callable[[Telegram], None]]):
        self.port = port
        self.handlers = dict(handlers)
        self.received = 0
        self.malformed = 0
        self.unhandled = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def poll(self, timeout: float | None = 0) -> bool:
        """Process at most one datagram; False if none arrived in time."""
        data = self.port.receive_bytes(timeout)
        if data is None:
            return False
        self.received += 1
        try:
            t = decode(data)
        except DecodeError as exc:
            self.malformed += 1
            log.warning("dropping malformed datagram: %s", exc)
            return True
        handler = self.handlers.get(type(t))
        if handler is None:
            self.unhandled += 1
            log.debug("no handler for %s", telegram_name(t))
            return True
        handler(t)
        return True

    def drain(self) -> int:
        n = 0
        while self.poll(0):
            n += 1
        return n

    def start(self, poll_interval: float = 0.05) -> "Dispatcher":
        def loop():
            while not self._stop.is_set():
                try:
                    self.poll(poll_interval)
                except PortClosed:
                    break

        self._thread = threading.Thread(target=loop, name="dispatch", daemon=True)
        self._thread.start()
        return self

    def stop(self, join_timeout: float = 1.0):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(join_timeout)


def dispatch(port: Port, handlers) -> Dispatcher:
    return Dispatcher(port, handlers).start()
