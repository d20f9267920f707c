"""Two-party session layer: framing, handshake, phases, and transports.

One duplex connection carries everything, multiplexed by message type;
that keeps round counting a pure function of the message trace. The
loopback transport (queue pair) and the TCP transport produce identical
traces for identical seeds, so protocol tests run in-process and the
wire path is checked separately.

Frame layout: magic "MSH1" | msg_type (1 byte) | session_id (8 bytes) |
payload length (u64 LE) | payload.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
from dataclasses import dataclass, field
from enum import IntEnum

from .tally import Tally

MAGIC = b"MSH1"
PROTO_VERSION = 1
_HEADER = struct.Struct("<4sB8sQ")


class MsgType(IntEnum):
    HELLO = 1
    HELLO_ACK = 2
    OFFLINE_CT_H = 3
    OFFLINE_CT_HBAR_HTILDE = 4
    OFFLINE_DONE = 5
    ONLINE_CT_A = 6
    ONLINE_CT_HACUTE = 7
    ONLINE_CT_C = 8
    TREE_LEVEL = 9
    OT_BASE = 10
    OT_EXT = 11
    DEALER = 12
    RESULT = 13


_OFFLINE_TYPES = {
    MsgType.OFFLINE_CT_H,
    MsgType.OFFLINE_CT_HBAR_HTILDE,
    MsgType.OFFLINE_DONE,
    MsgType.DEALER,
}
_ONLINE_TYPES = {
    MsgType.ONLINE_CT_A,
    MsgType.ONLINE_CT_HACUTE,
    MsgType.ONLINE_CT_C,
    MsgType.TREE_LEVEL,
    MsgType.OT_BASE,
    MsgType.OT_EXT,
    MsgType.DEALER,
    MsgType.RESULT,
}


class TransportError(Exception):
    pass


class DigestMismatch(TransportError):
    pass


class PhaseViolation(TransportError):
    pass


class FramingError(TransportError):
    pass


def pack_frame(msg_type: int, session_id: bytes, payload: bytes) -> bytes:
    return _HEADER.pack(MAGIC, msg_type, session_id, len(payload)) + payload


# ---------------------------------------------------------------------------
# connections


class LoopbackConn:
    """One end of an in-process duplex byte channel."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._in = inbox
        self._out = outbox

    @staticmethod
    def pair() -> tuple["LoopbackConn", "LoopbackConn"]:
        a, b = queue.Queue(), queue.Queue()
        return LoopbackConn(a, b), LoopbackConn(b, a)

    def send_frame(self, frame: bytes):
        self._out.put(frame)

    def recv_frame(self, timeout: float = 60.0) -> bytes:
        try:
            return self._in.get(timeout=timeout)
        except queue.Empty:
            raise TransportError("timed out waiting for peer") from None

    def close(self):
        pass


class TcpConn:
    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buf = b""

    @staticmethod
    def listen_accept(host: str, port: int, ready: threading.Event | None = None) -> "TcpConn":
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host, port))
        srv.listen(1)
        if ready is not None:
            ready.set()
        conn, _ = srv.accept()
        srv.close()
        return TcpConn(conn)

    @staticmethod
    def connect(host: str, port: int, retries: int = 50) -> "TcpConn":
        last = None
        for _ in range(retries):
            try:
                s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
                s.connect((host, port))
                return TcpConn(s)
            except OSError as e:  # server may not be up yet
                last = e
                s.close()
                import time

                time.sleep(0.1)
        raise TransportError(f"cannot connect to {host}:{port}: {last}")

    def send_frame(self, frame: bytes):
        self._sock.sendall(frame)

    def recv_frame(self, timeout: float = 60.0) -> bytes:
        self._sock.settimeout(timeout)
        header = self._read(_HEADER.size)
        magic, _, _, length = _HEADER.unpack(header)
        if magic != MAGIC:
            raise FramingError(f"bad frame magic {magic!r}")
        return header + self._read(length)

    def _read(self, n: int) -> bytes:
        while len(self._buf) < n:
            chunk = self._sock.recv(min(1 << 20, n - len(self._buf) + 4096))
            if not chunk:
                raise TransportError("connection closed by peer")
            self._buf += chunk
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def close(self):
        try:
            self._sock.close()
        except OSError:
            pass


# ---------------------------------------------------------------------------
# session


@dataclass
class TraceEvent:
    direction: str  # "send" | "recv"
    msg_type: int
    nbytes: int
    label: str


@dataclass
class Session:
    role: str  # "client" | "server"
    conn: object
    session_id: bytes
    phase: str = "handshake"
    tally: Tally = field(default_factory=Tally)
    trace: list = field(default_factory=list)
    _label: str = ""

    PHASES = ("handshake", "offline", "online", "done")

    # -- phase machine ------------------------------------------------------

    def advance(self, phase: str):
        if self.PHASES.index(phase) < self.PHASES.index(self.phase):
            raise PhaseViolation(f"cannot move back from {self.phase} to {phase}")
        self.phase = phase

    def _check_phase(self, msg_type: int):
        t = MsgType(msg_type)
        if self.phase == "offline" and t not in _OFFLINE_TYPES:
            raise PhaseViolation(f"{t.name} not allowed during offline phase")
        if self.phase == "online" and t not in _ONLINE_TYPES:
            raise PhaseViolation(f"{t.name} not allowed during online phase")
        if self.phase == "handshake" and t not in (MsgType.HELLO, MsgType.HELLO_ACK):
            raise PhaseViolation(f"{t.name} before handshake completes")
        if self.phase == "done":
            raise PhaseViolation("session is finished")

    # -- labeled scopes for per-block accounting ------------------------------

    def block_scope(self, label: str):
        session = self

        class _Scope:
            def __enter__(self):
                self.prev = session._label
                session._label = label

            def __exit__(self, *exc):
                session._label = self.prev

        return _Scope()

    # -- messaging ------------------------------------------------------------

    def send(self, msg_type: int, payload: bytes):
        self._check_phase(msg_type)
        frame = pack_frame(msg_type, self.session_id, payload)
        self.conn.send_frame(frame)
        self.tally.bump("bytes_sent", len(frame))
        self.tally.bump("msgs_sent")
        self.trace.append(TraceEvent("send", int(msg_type), len(payload), self._label))

    def recv(self, msg_type: int, timeout: float = 60.0) -> bytes:
        self._check_phase(msg_type)
        frame = self.conn.recv_frame(timeout=timeout)
        magic, got_type, sid, length = _HEADER.unpack(frame[: _HEADER.size])
        if magic != MAGIC:
            raise FramingError(f"bad frame magic {magic!r}")
        try:
            got = MsgType(got_type)
        except ValueError:
            raise FramingError(f"unknown msg_type {got_type}") from None
        if sid != self.session_id:
            raise TransportError("frame from a different session")
        payload = frame[_HEADER.size :]
        if len(payload) != length:
            raise FramingError("frame length mismatch")
        if got != msg_type:
            if got == MsgType.HELLO:
                raise TransportError("handshake replay on live session rejected")
            raise TransportError(f"expected {MsgType(msg_type).name}, got {got.name}")
        self.tally.bump("bytes_recv", len(frame))
        self.trace.append(TraceEvent("recv", int(got), length, self._label))
        return payload

    # channel-interface aliases used by the comparison substrate
    def send_tagged(self, tag: int, payload: bytes):
        self.send(tag, payload)

    def recv_tagged(self, tag: int) -> bytes:
        return self.recv(tag)

    def mark_offline_done(self):
        self.send(MsgType.OFFLINE_DONE, b"")
        self.recv(MsgType.OFFLINE_DONE)
        self.advance("online")


# ---------------------------------------------------------------------------
# handshake

_HELLO = struct.Struct("<BB8s32s32s32s")


def _hello_payload(role: str, session_id: bytes, params_digest: bytes, plan_digest: bytes, model_digest: bytes) -> bytes:
    role_code = 0 if role == "client" else 1
    return _HELLO.pack(PROTO_VERSION, role_code, session_id, params_digest, plan_digest, model_digest)


def handshake(
    conn,
    role: str,
    params_digest: bytes,
    plan_digest: bytes,
    model_digest: bytes = b"\0" * 32,
    session_id: bytes | None = None,
) -> Session:
    """Agree on parameter/plan/model digests or abort; returns an offline-phase session."""
    if role == "client":
        session_id = session_id or b"\x00" * 8
        hello = _hello_payload(role, session_id, params_digest, plan_digest, model_digest)
        conn.send_frame(pack_frame(MsgType.HELLO, session_id, hello))
        ack_frame = conn.recv_frame()
        payload = ack_frame[_HEADER.size :]
        ver, _, sid, their_params, their_plan, their_model = _HELLO.unpack(payload)
        if ver != PROTO_VERSION:
            raise DigestMismatch(f"protocol version mismatch: {ver} != {PROTO_VERSION}")
        _require_match("params", params_digest, their_params)
        _require_match("plan", plan_digest, their_plan)
        _require_match("model", model_digest, their_model)
        sess = Session(role=role, conn=conn, session_id=sid)
    else:
        frame = conn.recv_frame()
        magic, msg_type, sid, _ = _HEADER.unpack(frame[: _HEADER.size])
        if magic != MAGIC or msg_type != MsgType.HELLO:
            raise FramingError("expected HELLO")
        payload = frame[_HEADER.size :]
        ver, _, sid_c, their_params, their_plan, their_model = _HELLO.unpack(payload)
        ack = _hello_payload(role, sid_c, params_digest, plan_digest, model_digest)
        conn.send_frame(pack_frame(MsgType.HELLO_ACK, sid_c, ack))
        if ver != PROTO_VERSION:
            raise DigestMismatch(f"protocol version mismatch: {ver} != {PROTO_VERSION}")
        _require_match("params", params_digest, their_params)
        _require_match("plan", plan_digest, their_plan)
        _require_match("model", model_digest, their_model)
        sess = Session(role=role, conn=conn, session_id=sid_c)
    sess.advance("offline")
    return sess


def _require_match(what: str, mine: bytes, theirs: bytes):
    if mine != theirs:
        raise DigestMismatch(f"{what} digest mismatch: {mine.hex()[:12]} != {theirs.hex()[:12]}")


# ---------------------------------------------------------------------------
# two-party harness


def run_two_party(client_fn, server_fn, timeout: float = 600.0):
    """Run both roles in threads over a loopback pair; re-raise any failure."""
    c_conn, s_conn = LoopbackConn.pair()
    results: dict = {}
    errors: dict = {}

    def runner(name, fn, conn):
        try:
            results[name] = fn(conn)
        except BaseException as e:  # propagated after join
            errors[name] = e

    tc = threading.Thread(target=runner, args=("client", client_fn, c_conn), daemon=True)
    ts = threading.Thread(target=runner, args=("server", server_fn, s_conn), daemon=True)
    tc.start()
    ts.start()
    tc.join(timeout)
    ts.join(timeout)
    if tc.is_alive() or ts.is_alive():
        raise TransportError("two-party run timed out (likely a deadlocked exchange)")
    for name in ("client", "server"):
        if name in errors:
            raise errors[name]
    return results.get("client"), results.get("server")
