"""Binary wire framing and the TCP bridge between bus instances.

Frame layout (little-endian):
  magic "TBAG" | version u8 = 1 | payload_tag u8 | topic_len u8 | topic bytes
  | stamp u64 | seq u64 | body_len u32 | body bytes
"""

import socket
import struct
import threading
import time

import numpy as np

from .bus import (ArmJointCommand, ArmJointState, Bus, BusMessage, CameraFramePayload,
                  JointCommandPayload, JointStatePayload, PayloadTag,
                  SessionEventPayload)
from .safety import FeedbackCause, FeedbackSignal

MAGIC = b"TBAG"
VERSION = 1
MAX_BODY = 1 << 24

_PRE = struct.Struct("<4sBBB")      # magic, version, tag, topic_len
_MID = struct.Struct("<QQI")        # stamp, seq, body_len


class FrameError(Exception):
    pass


class BadMagic(FrameError):
    pass


class UnsupportedVersion(FrameError):
    pass


class UnknownPayloadTag(FrameError):
    pass


class TruncatedFrame(FrameError):
    pass


class LengthMismatch(FrameError):
    pass


def _pack_f64(values):
    arr = np.asarray(values, dtype="<f8")
    return arr.tobytes()


def _encode_body(payload):
    if isinstance(payload, JointStatePayload):
        parts = [struct.pack("<B", len(payload.arms))]
        for arm in payload.arms:
            parts.append(_pack_f64(arm.position))
            parts.append(_pack_f64(arm.velocity))
            parts.append(_pack_f64(arm.effort))
            parts.append(struct.pack("<d", arm.gripper))
        return PayloadTag.JOINT_STATE, b"".join(parts)
    if isinstance(payload, JointCommandPayload):
        parts = [struct.pack("<B", len(payload.arms))]
        for arm in payload.arms:
            parts.append(_pack_f64(arm.position))
            parts.append(struct.pack("<d", arm.gripper))
        return PayloadTag.JOINT_COMMAND, b"".join(parts)
    if isinstance(payload, FeedbackSignal):
        return PayloadTag.FEEDBACK, struct.pack("<B", int(payload.cause)) + _pack_f64(payload.magnitudes)
    if isinstance(payload, CameraFramePayload):
        head = struct.pack("<BQHH", payload.camera_id, payload.frame_index,
                           payload.width, payload.height)
        return PayloadTag.CAMERA_FRAME, head + payload.pixels
    if isinstance(payload, SessionEventPayload):
        body = struct.pack("<B", payload.code)
        if payload.value is not None:
            body += struct.pack("<Q", payload.value)
        return PayloadTag.SESSION_EVENT, body
    raise TypeError("unsupported payload type: %r" % type(payload))


def encode_frame(msg):
    tag, body = _encode_body(msg.payload)
    if len(body) > MAX_BODY:
        raise ValueError("payload exceeds 2^24 bytes")
    topic = msg.topic.encode("utf-8")
    return (_PRE.pack(MAGIC, VERSION, int(tag), len(topic)) + topic
            + _MID.pack(msg.stamp, msg.seq, len(body)))+ body


def _unpack_f64(buf, offset, count):
    return np.frombuffer(buf, dtype="<f8", count=count, offset=offset).copy()


def _decode_body(tag, body):
    if tag == PayloadTag.JOINT_STATE:
        if len(body) < 1:
            raise LengthMismatch("joint state body too short")
        n = body[0]
        if len(body) != 1 + n * 176:
            raise LengthMismatch("joint state body length")
        arms = []
        off = 1
        for _ in range(n):
            pos = _unpack_f64(body, off, 7)
            vel = _unpack_f64(body, off + 56, 7)
            eff = _unpack_f64(body, off + 112, 7)
            grip = struct.unpack_from("<d", body, off + 168)[0]
            arms.append(ArmJointState(pos, vel, eff, grip))
            off += 176
        return JointStatePayload(tuple(arms))
    if tag == PayloadTag.JOINT_COMMAND:
        if len(body) < 1:
            raise LengthMismatch("joint command body too short")
        n = body[0]
        if len(body) != 1 + n * 64:
            raise LengthMismatch("joint command body length")
        arms = []
        off = 1
        for _ in range(n):
            pos = _unpack_f64(body, off, 7)
            grip = struct.unpack_from("<d", body, off + 56)[0]
            arms.append(ArmJointCommand(pos, grip))
            off += 64
        return JointCommandPayload(tuple(arms))
    if tag == PayloadTag.FEEDBACK:
        if len(body) != 1 + 14 * 8:
            raise LengthMismatch("feedback body length")
        cause = FeedbackCause(body[0])
        mags = _unpack_f64(body, 1, 14).reshape(2, 7)
        return FeedbackSignal(mags, cause)
    if tag == PayloadTag.CAMERA_FRAME:
        if len(body) < 13:
            raise LengthMismatch("camera frame body too short")
        cam, idx, w, h = struct.unpack_from("<BQHH", body, 0)
        pixels = body[13:]
        if len(pixels) != w * h * 3:
            raise LengthMismatch("camera frame pixel length")
        return CameraFramePayload(cam, idx, w, h, bytes(pixels))
    if tag == PayloadTag.SESSION_EVENT:
        if len(body) == 1:
            return SessionEventPayload(body[0], None)
        if len(body) == 9:
            return SessionEventPayload(body[0], struct.unpack_from("<Q", body, 1)[0])
        raise LengthMismatch("session event body length")
    raise UnknownPayloadTag("tag %d" % tag)


def decode_frame(buf):
    """Decode one frame from a complete byte string."""
    if len(buf) < _PRE.size:
        raise TruncatedFrame("short header")
    magic, version, tag, topic_len = _PRE.unpack_from(buf, 0)
    if magic != MAGIC:
        raise BadMagic(repr(magic))
    if version != VERSION:
        raise UnsupportedVersion(str(version))
    off = _PRE.size
    if len(buf) < off + topic_len + _MID.size:
        raise TruncatedFrame("short topic/header")
    topic = buf[off:off + topic_len].decode("utf-8")
    off += topic_len
    stamp, seq, body_len = _MID.unpack_from(buf, off)
    off += _MID.size
    if len(buf) < off + body_len:
        raise TruncatedFrame("short body")
    if len(buf) > off + body_len:
        raise LengthMismatch("trailing bytes after body")
    if tag not in PayloadTag._value2member_map_:
        raise UnknownPayloadTag("tag %d" % tag)
    payload = _decode_body(PayloadTag(tag), buf[off:off + body_len])
    return BusMessage(topic, stamp, seq, payload)


def _recv_exact(sock, n):
    chunks = []
    while n > 0:
        chunk = sock.recv(n)
        if not chunk:
            raise ConnectionError("connection closed")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_frame(sock):
    """Read exactly one frame from a stream socket."""
    pre = _recv_exact(sock, _PRE.size)
    magic, version, tag, topic_len = _PRE.unpack(pre)
    if magic != MAGIC:
        raise BadMagic(repr(magic))
    rest = _recv_exact(sock, topic_len + _MID.size)
    _, _, body_len = _MID.unpack_from(rest, topic_len)
    if body_len > MAX_BODY:
        raise LengthMismatch("body too large")
    body = _recv_exact(sock, body_len)
    return decode_frame(pre + rest + body)


class BusServer:
    """Accepts TCP peers and mirrors all bus traffic in both directions."""

    def __init__(self, bus, host="127.0.0.1", port=0):
        self.bus = bus
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen()
        self.address = self._sock.getsockname()
        self._closing = False
        self._conns = []
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    def _accept_loop(self):
        conn_counter = 0
        while not self._closing:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                break
            conn_counter += 1
            self._conns.append(conn)
            _bridge_connection(self.bus, conn, origin="srv-conn-%d" % conn_counter)

    def close(self):
        self._closing = True
        try:
            self._sock.close()
        except OSError:
            pass
        for conn in self._conns:
            try:
                conn.close()
            except OSError:
                pass


def _bridge_connection(bus, conn, origin):
    """Spawn reader/writer threads mirroring one TCP peer onto `bus`."""
    conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    tap = bus.subscribe_all(capacity=4096, exclude_origin=origin)
    stop = threading.Event()

    def reader():
        try:
            while not stop.is_set():
                msg = read_frame(conn)
                bus.publish(msg, origin=origin)
        except (ConnectionError, OSError, FrameError):
            pass
        finally:
            stop.set()
            tap.close()
            try:
                conn.close()
            except OSError:
                pass

    def writer():
        try:
            while not stop.is_set():
                msg = tap.poll(timeout=0.1)
                if msg is not None:
                    conn.sendall(encode_frame(msg))
        except (ConnectionError, OSError):
            pass
        finally:
            stop.set()

    threading.Thread(target=reader, daemon=True).start()
    threading.Thread(target=writer, daemon=True).start()
    return stop


class RemoteBus:
    """Client side of the TCP bridge: a local bus kept in sync with a server.

    Reconnects with backoff after connection loss; local subscriptions survive,
    traffic resumes once the link is back.
    """

    def __init__(self, host, port, reconnect=True, retry_interval=0.2):
        self.bus = Bus()
        self._host = host
        self._port = port
        self._reconnect = reconnect
        self._retry_interval = retry_interval
        self._closed = False
        self.connected = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def _run(self):
        first = True
        while not self._closed and (first or self._reconnect):
            first = False
            try:
                conn = socket.create_connection((self._host, self._port), timeout=5.0)
                conn.settimeout(None)
            except OSError:
                time.sleep(self._retry_interval)
                continue
            self.connected.set()
            stop = _bridge_connection(self.bus, conn, origin="remote")
            stop.wait()
            self.connected.clear()
            time.sleep(self._retry_interval)

    def close(self):
        self._closed = True


def serve(bus, host="127.0.0.1", port=0):
    return BusServer(bus, host, port)


def connect(host, port, reconnect=True):
    return RemoteBus(host, port, reconnect=reconnect)
