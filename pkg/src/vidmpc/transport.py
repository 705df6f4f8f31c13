"""Framed, ordered point-to-point channels between the three parties.

Wire frame (all integers little-endian)::

    session_id  16 bytes
    round       u32
    payload_len u32
    payload     payload_len bytes (u64 words)

A TCP connection starts with a 17-byte hello: sender id (u8) + session id.
Both the loopback and the TCP transport deliver into the same inbox keyed
by ``(sender, round)``, so out-of-order arrival is harmless.
"""

from __future__ import annotations

import hashlib
import logging
import socket
import struct
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import FramingError, ProtocolOrderError, SessionAborted, TransportError
from .sharing import PARTIES, check_party

log = logging.getLogger(__name__)

SESSION_ID_BYTES = 16
_HEADER = struct.Struct("<16sII")
_HELLO = struct.Struct("<B16s")
MAX_ROUND = 0xFFFFFFFF


def words_to_bytes(words) -> bytes:
    return np.ascontiguousarray(words, dtype="<u8").tobytes()


def bytes_to_words(payload: bytes) -> np.ndarray:
    if len(payload) % 8:
        raise FramingError(f"payload of {len(payload)} bytes is not a whole number of words")
    return np.frombuffer(payload, dtype="<u8").astype(np.uint64)


@dataclass(frozen=True)
class Frame:
    session_id: bytes
    round: int
    payload: bytes

    @property
    def payload_len(self) -> int:
        return len(self.payload)

    def encode(self) -> bytes:
        return _HEADER.pack(self.session_id, self.round, len(self.payload)) + self.payload

    @classmethod
    def decode(cls, data: bytes) -> "Frame":
        if len(data) < _HEADER.size:
            raise FramingError("truncated frame header")
        sid, rnd, n = _HEADER.unpack_from(data)
        body = data[_HEADER.size:]
        if len(body) != n:
            raise FramingError(f"frame declares {n} payload bytes, got {len(body)}")
        return cls(sid, rnd, bytes(body))


@dataclass(frozen=True)
class TranscriptEntry:
    sender: int
    receiver: int
    round: int
    byte_length: int


@dataclass
class Transcript:
    entries: list[TranscriptEntry] = field(default_factory=list)

    def append(self, entry: TranscriptEntry) -> None:
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)

    def bytes_sent(self, party: int | None = None) -> int:
        return sum(e.byte_length for e in self.entries if party is None or e.sender == party)


def transcript_shape(t: Transcript) -> list[tuple[int, int, int]]:
    return [(e.sender, e.receiver, e.byte_length) for e in t.entries]


def merge_transcripts(transcripts) -> Transcript:
    """Concatenate per-party transcripts in party order."""
    out = Transcript()
    for t in transcripts:
        out.entries.extend(t.entries)
    return out


def session_id_from(value: str | bytes) -> bytes:
    """Accept 32 hex chars, raw 16 bytes, or any label (hashed)."""
    if isinstance(value, bytes):
        if len(value) == SESSION_ID_BYTES:
            return value
        return hashlib.sha256(value).digest()[:SESSION_ID_BYTES]
    try:
        raw = bytes.fromhex(value)
        if len(raw) == SESSION_ID_BYTES:
            return raw
    except ValueError:
        pass
    return hashlib.sha256(value.encode()).digest()[:SESSION_ID_BYTES]


class Transport:
    """Common inbox/transcript logic; subclasses implement ``_deliver_out``."""

    def __init__(self, party: int, session_id: bytes, timeout: float = 60.0):
        self.party = check_party(party)
        self.session_id = session_id
        self.timeout = timeout
        self.transcript = Transcript()
        self._inbox: dict[tuple[int, int], bytes] = {}
        self._cond = threading.Condition()
        self._sent_rounds: dict[int, int] = {}
        self._aborted: str | None = None

    def send(self, to: int, round: int, payload) -> None:
        if to == self.party or to not in PARTIES:
            raise ProtocolOrderError(f"party {self.party} cannot send to {to!r}")
        if not 0 <= round <= MAX_ROUND:
            raise ProtocolOrderError("round out of u32 range")
        last = self._sent_rounds.get(to)
        if last is not None and round <= last:
            raise ProtocolOrderError(f"round {round} toward party {to} already used (last {last})")
        self._check_alive()
        data = payload if isinstance(payload, bytes) else words_to_bytes(payload)
        self._sent_rounds[to] = round
        self.transcript.append(TranscriptEntry(self.party, to, round, len(data)))
        self._deliver_out(to, Frame(self.session_id, round, data))

    def recv(self, frm: int, round: int) -> np.ndarray:
        key = (frm, round)
        deadline = time.monotonic() + self.timeout
        with self._cond:
            while key not in self._inbox:
                if self._aborted:
                    raise SessionAborted(self._aborted)
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    self._aborted = f"timed out waiting for party {frm} round {round}"
                    raise SessionAborted(self._aborted)
                self._cond.wait(remaining)
            payload = self._inbox.pop(key)
        return bytes_to_words(payload)

    def _accept(self, sender: int, frame: Frame) -> None:
        if frame.session_id != self.session_id:
            self.abort(f"frame from party {sender} carries a foreign session id")
            return
        with self._cond:
            key = (sender, frame.round)
            if key in self._inbox:
                self._aborted = f"duplicate round {frame.round} from party {sender}"
            else:
                self._inbox[key] = frame.payload
            self._cond.notify_all()

    def abort(self, reason: str) -> None:
        with self._cond:
            if not self._aborted:
                self._aborted = reason
            self._cond.notify_all()

    def _check_alive(self) -> None:
        if self._aborted:
            raise SessionAborted(self._aborted)

    def _deliver_out(self, to: int, frame: Frame) -> None:  # pragma: no cover - abstract
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class LoopbackTransport(Transport):
    def __init__(self, hub: "LoopbackHub", party: int):
        super().__init__(party, hub.session_id, hub.timeout)
        self.hub = hub

    def _deliver_out(self, to: int, frame: Frame) -> None:
        self.hub.endpoints[to]._accept(self.party, frame)

    def abort_all(self, reason: str) -> None:
        self.hub.abort(reason)


class LoopbackHub:
    """Three in-process endpoints sharing memory; used for tests and ``--local``."""

    def __init__(self, session_id: bytes = b"\x00" * SESSION_ID_BYTES, timeout: float = 120.0):
        self.session_id = session_id
        self.timeout = timeout
        self.endpoints = {i: LoopbackTransport(self, i) for i in PARTIES}

    def __getitem__(self, party: int) -> LoopbackTransport:
        return self.endpoints[party]

    def abort(self, reason: str) -> None:
        for ep in self.endpoints.values():
            ep.abort(reason)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(min(n, 1 << 20))
        if not chunk:
            break
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> Frame | None:
    """Read one frame; ``None`` on clean EOF at a frame boundary."""
    head = _recv_exact(sock, _HEADER.size)
    if not head:
        return None
    if len(head) < _HEADER.size:
        raise FramingError("connection closed inside a frame header")
    sid, rnd, n = _HEADER.unpack(head)
    body = _recv_exact(sock, n)
    if len(body) != n:
        raise FramingError(f"connection closed after {len(body)} of {n} payload bytes")
    return Frame(sid, rnd, body)


class TcpTransport(Transport):
    """One outgoing and one incoming TCP connection per peer.

    ``addresses`` maps party id to ``(host, port)``. ``connect()`` blocks
    until both peers are reachable or ``timeout`` elapses.
    """

    def __init__(self, party: int, addresses: dict[int, tuple[str, int]], session_id: bytes, timeout: float = 60.0):
        super().__init__(party, session_id, timeout)
        self.addresses = {int(k): (h, int(p)) for k, (h, p) in addresses.items()}
        self._out: dict[int, socket.socket] = {}
        self._threads: list[threading.Thread] = []
        self._listener: socket.socket | None = None
        self._send_lock = threading.Lock()
        self._closed = False

    def connect(self) -> "TcpTransport":
        host, port = self.addresses[self.party]
        lsock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        lsock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        lsock.bind((host, port))
        lsock.listen(4)
        lsock.settimeout(0.2)
        self._listener = lsock
        acceptor = threading.Thread(target=self._accept_loop, name=f"accept-p{self.party}", daemon=True)
        acceptor.start()
        self._threads.append(acceptor)

        deadline = time.monotonic() + self.timeout
        for peer in PARTIES:
            if peer == self.party:
                continue
            self._out[peer] = self._dial(peer, deadline)
        return self

    def _dial(self, peer: int, deadline: float) -> socket.socket:
        addr = self.addresses[peer]
        while True:
            try:
                s = socket.create_connection(addr, timeout=2.0)
                s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                s.settimeout(None)
                s.sendall(_HELLO.pack(self.party, self.session_id))
                return s
            except OSError as exc:
                if time.monotonic() >= deadline:
                    self.abort(f"party {peer} unreachable at {addr[0]}:{addr[1]}")
                    raise TransportError(f"party {peer} unreachable at {addr[0]}:{addr[1]}: {exc}") from exc
                time.sleep(0.1)

    def _accept_loop(self) -> None:
        accepted = 0
        while not self._closed and accepted < 2:
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.settimeout(None)
            t = threading.Thread(target=self._reader, args=(conn,), name=f"reader-p{self.party}", daemon=True)
            t.start()
            self._threads.append(t)
            accepted += 1

    def _reader(self, conn: socket.socket) -> None:
        try:
            hello = _recv_exact(conn, _HELLO.size)
            if len(hello) != _HELLO.size:
                raise FramingError("truncated hello")
            sender, sid = _HELLO.unpack(hello)
            if sender not in PARTIES or sender == self.party:
                raise FramingError(f"bad sender id {sender} in hello")
            if sid != self.session_id:
                raise FramingError("peer joined a different session")
            while True:
                frame = read_frame(conn)
                if frame is None:
                    return
                self._accept(sender, frame)
        except (OSError, TransportError) as exc:
            if not self._closed:
                log.error("party %d: receive failed: %s", self.party, exc)
                self.abort(f"receive failed: {exc}")
        finally:
            conn.close()

    def _deliver_out(self, to: int, frame: Frame) -> None:
        try:
            with self._send_lock:
                self._out[to].sendall(frame.encode())
        except (OSError, KeyError) as exc:
            self.abort(f"send to party {to} failed: {exc}")
            raise TransportError(f"send to party {to} failed: {exc}") from exc

    def close(self) -> None:
        self._closed = True
        for s in self._out.values():
            try:
                s.shutdown(socket.SHUT_WR)
            except OSError:
                pass
            s.close()
        if self._listener is not None:
            self._listener.close()
