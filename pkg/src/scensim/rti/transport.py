"""Transports between members and the coordinator.

Both implementations move encoded frames, so the in-process path exercises
the same codec as TCP. The coordinator side is an *acceptor*: it owns an
inbox of ``(link_id, frame | None)`` items (``None`` marks a disconnect) and
a ``link(link_id)`` per member to send replies on.
"""

from __future__ import annotations

import itertools
import logging
import os
import queue
import socket
import threading
from abc import ABC, abstractmethod
from typing import Callable

from ..errors import ConnectFailure
from .messages import FrameError, RtiMessage, frame, read_frame

log = logging.getLogger(__name__)

# tap(direction, link_id, body): direction is "in" (to coordinator) or "out".
Tap = Callable[[str, int, bytes], None]

DEFAULT_HOST = "127.0.0.1"
ENV_ADDRESS = "SCENSIM_RTI_ADDR"


class Connection(ABC):
    """Member-side duplex channel to the coordinator."""

    @abstractmethod
    def send(self, msg: RtiMessage) -> None: ...

    @abstractmethod
    def recv(self, timeout: float | None = None) -> RtiMessage | None:
        """Next message; None once the coordinator closed the link.

        Raises ``queue.Empty`` on timeout.
        """

    @abstractmethod
    def close(self) -> None: ...


class Link(ABC):
    """Coordinator-side handle for one member connection."""

    link_id: int

    @abstractmethod
    def send(self, msg: RtiMessage) -> None: ...

    @abstractmethod
    def close(self, wait: float = 0.0) -> None: ...


class Acceptor(ABC):
    inbox: "queue.Queue[tuple[int, bytes | None]]"

    @abstractmethod
    def link(self, link_id: int) -> Link | None: ...

    @abstractmethod
    def close(self, wait: float = 0.0) -> None: ...


# -- in-process ----------------------------------------------------------------


class _InProcLink(Link):
    def __init__(self, link_id: int, to_client: queue.Queue, tap: Tap | None):
        self.link_id = link_id
        self._to_client = to_client
        self._tap = tap
        self._closed = False

    def send(self, msg: RtiMessage) -> None:
        if self._closed:
            return
        body = msg.encode()
        if self._tap:
            self._tap("out", self.link_id, body)
        self._to_client.put(body)

    def close(self, wait: float = 0.0) -> None:
        if not self._closed:
            self._closed = True
            self._to_client.put(None)


class InProcConnection(Connection):
    def __init__(self, link_id: int, inbox: queue.Queue, from_rti: queue.Queue, tap: Tap | None):
        self.link_id = link_id
        self._inbox = inbox
        self._from_rti = from_rti
        self._tap = tap
        self._closed = False
        self._eof = False

    def send(self, msg: RtiMessage) -> None:
        if self._closed:
            raise ConnectFailure("connection closed")
        body = msg.encode()
        if self._tap:
            self._tap("in", self.link_id, body)
        self._inbox.put((self.link_id, body))

    def recv(self, timeout: float | None = None) -> RtiMessage | None:
        if self._eof:
            return None
        body = self._from_rti.get(timeout=timeout)
        if body is None:
            self._eof = True
            return None
        return RtiMessage.decode(body)

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._inbox.put((self.link_id, None))


class InProcNetwork(Acceptor):
    """Acceptor for members living in the same process."""

    def __init__(self, tap: Tap | None = None):
        self.inbox = queue.Queue()
        self.tap = tap
        self._ids = itertools.count(1)
        self._links: dict[int, _InProcLink] = {}
        self._lock = threading.Lock()
        self._closed = False

    def connect(self) -> InProcConnection:
        with self._lock:
            if self._closed:
                raise ConnectFailure("the in-process coordinator is closed")
            link_id = next(self._ids)
            to_client: queue.Queue = queue.Queue()
            self._links[link_id] = _InProcLink(link_id, to_client, self.tap)
        return InProcConnection(link_id, self.inbox, to_client, self.tap)

    def link(self, link_id: int) -> Link | None:
        return self._links.get(link_id)

    def close(self, wait: float = 0.0) -> None:
        with self._lock:
            self._closed = True
            links = list(self._links.values())
        for link in links:
            link.close()


# -- TCP ------------------------------------------------------------------------


def _recv_exactly(sock: socket.socket):
    def recv(n: int) -> bytes | None:
        buf = bytearray()
        while len(buf) < n:
            chunk = sock.recv(n - len(buf))
            if not chunk:
                return None
            buf += chunk
        return bytes(buf)

    return recv


class _TcpLink(Link):
    def __init__(self, link_id: int, sock: socket.socket, inbox: queue.Queue, tap: Tap | None):
        self.link_id = link_id
        self._sock = sock
        self._inbox = inbox
        self._tap = tap
        self._send_lock = threading.Lock()
        self._closed = False
        self._eof = threading.Event()
        self._reader = threading.Thread(target=self._read_loop, name=f"rti-link-{link_id}", daemon=True)

    def start(self) -> None:
        self._reader.start()

    def _read_loop(self) -> None:
        recv = _recv_exactly(self._sock)
        try:
            while True:
                body = read_frame(recv)
                if body is None:
                    break
                if self._tap:
                    self._tap("in", self.link_id, body)
                self._inbox.put((self.link_id, body))
        except (OSError, FrameError) as exc:
            log.debug("link %d reader stopped: %s", self.link_id, exc)
        finally:
            self._eof.set()
            self._inbox.put((self.link_id, None))

    def send(self, msg: RtiMessage) -> None:
        if self._closed:
            return
        body = msg.encode()
        if self._tap:
            self._tap("out", self.link_id, body)
        try:
            with self._send_lock:
                self._sock.sendall(frame(body))
        except OSError as exc:
            log.debug("link %d send failed: %s", self.link_id, exc)

    def close(self, wait: float = 0.0) -> None:
        # Let the member close first so the listening port is not left in TIME_WAIT.
        if wait > 0:
            self._eof.wait(wait)
        if self._closed:
            return
        self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        if self._reader.is_alive():
            self._reader.join(timeout=5)


class TcpAcceptor(Acceptor):
    def __init__(self, host: str = DEFAULT_HOST, port: int = 0, tap: Tap | None = None):
        self.inbox = queue.Queue()
        self.tap = tap
        self._ids = itertools.count(1)
        self._links: dict[int, _TcpLink] = {}
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._server.bind((host, port))
        except OSError:
            self._server.close()
            raise
        self._server.listen()
        self._server.settimeout(0.05)
        self.address = self._server.getsockname()[:2]
        self._thread = threading.Thread(target=self._accept_loop, name="rti-accept", daemon=True)
        self._thread.start()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, _ = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            sock.settimeout(None)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._lock:
                link_id = next(self._ids)
                link = self._links[link_id] = _TcpLink(link_id, sock, self.inbox, self.tap)
            # Only read once the link is findable, or early replies would be dropped.
            link.start()

    def link(self, link_id: int) -> Link | None:
        return self._links.get(link_id)

    def close(self, wait: float = 0.0) -> None:
        self._stop.set()
        self._thread.join(timeout=5)
        self._server.close()
        with self._lock:
            links = list(self._links.values())
        for link in links:
            link.close(wait=wait)


class TcpConnection(Connection):
    def __init__(self, host: str, port: int, connect_timeout: float = 10.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        except OSError as exc:
            raise ConnectFailure(f"cannot reach coordinator at {host}:{port}: {exc}") from None
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._queue: queue.Queue = queue.Queue()
        self._send_lock = threading.Lock()
        self._closed = False
        self._eof = False
        self._reader = threading.Thread(target=self._read_loop, name=f"rti-client-{port}", daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        recv = _recv_exactly(self._sock)
        try:
            while True:
                body = read_frame(recv)
                if body is None:
                    break
                self._queue.put(body)
        except (OSError, FrameError):
            pass
        finally:
            self._queue.put(None)

    def send(self, msg: RtiMessage) -> None:
        if self._closed:
            raise ConnectFailure("connection closed")
        try:
            with self._send_lock:
                self._sock.sendall(frame(msg.encode()))
        except OSError as exc:
            raise ConnectFailure(f"send failed: {exc}") from None

    def recv(self, timeout: float | None = None) -> RtiMessage | None:
        if self._eof:
            return None
        body = self._queue.get(timeout=timeout)
        if body is None:
            self._eof = True
            return None
        return RtiMessage.decode(body)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        if self._reader.is_alive():
            self._reader.join(timeout=5)


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"coordinator address must be host:port, got {text!r}")
    return host or DEFAULT_HOST, int(port)


def resolve_address(default: tuple[str, int]) -> tuple[str, int]:
    """``SCENSIM_RTI_ADDR`` overrides the configured coordinator address."""
    env = os.environ.get(ENV_ADDRESS)
    return parse_address(env) if env else default


RtiAddress = "InProcNetwork | tuple[str, int]"


def open_connection(address) -> Connection:
    if isinstance(address, InProcNetwork):
        return address.connect()
    host, port = address
    return TcpConnection(host, port)
