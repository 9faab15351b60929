"""In-process topic pub/sub with bounded drop-oldest queues.

Stands in for the middleware layer: joint states, commands, feedback, camera
frames and session events all travel as BusMessages. A TCP bridge for
cross-process operation lives in `wire`.
"""

import re
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

from .safety import FeedbackSignal

TOPIC_MAX_BYTES = 255
_TOPIC_RE = re.compile(r"^\S+$")


def validate_topic(name):
    if not name or not _TOPIC_RE.match(name) or len(name.encode("utf-8")) > TOPIC_MAX_BYTES:
        raise ValueError("invalid topic: %r" % (name,))
    return name


class PayloadTag(IntEnum):
    JOINT_STATE = 1
    JOINT_COMMAND = 2
    FEEDBACK = 3
    CAMERA_FRAME = 4
    SESSION_EVENT = 5


@dataclass(frozen=True)
class ArmJointState:
    position: np.ndarray
    velocity: np.ndarray
    effort: np.ndarray
    gripper: float

    def __post_init__(self):
        for name in ("position", "velocity", "effort"):
            arr = getattr(self, name)
            if type(arr) is not np.ndarray or arr.shape != (7,) or arr.dtype != np.float64:
                arr = np.asarray(arr, dtype=float).reshape(7)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "gripper", float(self.gripper))

    def __eq__(self, other):
        if not isinstance(other, ArmJointState):
            return NotImplemented
        return (np.array_equal(self.position, other.position)
                and np.array_equal(self.velocity, other.velocity)
                and np.array_equal(self.effort, other.effort)
                and self.gripper == other.gripper)


@dataclass(frozen=True)
class ArmJointCommand:
    position: np.ndarray
    gripper: float

    def __post_init__(self):
        arr = np.asarray(self.position, dtype=float).reshape(7)
        arr.setflags(write=False)
        object.__setattr__(self, "position", arr)
        object.__setattr__(self, "gripper", float(self.gripper))

    def __eq__(self, other):
        if not isinstance(other, ArmJointCommand):
            return NotImplemented
        return np.array_equal(self.position, other.position) and self.gripper == other.gripper


@dataclass(frozen=True)
class JointStatePayload:
    arms: tuple  # of ArmJointState


@dataclass(frozen=True)
class JointCommandPayload:
    arms: tuple  # of ArmJointCommand


@dataclass(frozen=True)
class CameraFramePayload:
    camera_id: int
    frame_index: int
    width: int
    height: int
    pixels: bytes  # raw RGB8, len == width * height * 3


class SessionEventCode(IntEnum):
    EPISODE_START = 1
    EPISODE_STOP = 2
    STATE_CHANGED = 3


@dataclass(frozen=True)
class SessionEventPayload:
    code: int
    value: Optional[int] = None


PAYLOAD_TAGS = {
    JointStatePayload: PayloadTag.JOINT_STATE,
    JointCommandPayload: PayloadTag.JOINT_COMMAND,
    FeedbackSignal: PayloadTag.FEEDBACK,
    CameraFramePayload: PayloadTag.CAMERA_FRAME,
    SessionEventPayload: PayloadTag.SESSION_EVENT,
}


@dataclass(frozen=True)
class BusMessage:
    topic: str
    stamp: int  # monotonic nanoseconds since process epoch
    seq: int
    payload: object


class Subscription:
    """Single-consumer bounded queue; oldest messages are dropped on overflow."""

    def __init__(self, bus, topic, capacity, exclude_origin=None):
        if capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        self._bus = bus
        self.topic = topic
        self.exclude_origin = exclude_origin
        self._queue = deque(maxlen=capacity)
        self._cond = threading.Condition()
        self.dropped = 0
        self.closed = False

    def _push(self, msg):
        with self._cond:
            if len(self._queue) == self._queue.maxlen:
                self.dropped += 1
            self._queue.append(msg)
            self._cond.notify()

    def poll(self, timeout=None):
        """Next message, or None on timeout. timeout=0 polls without blocking."""
        with self._cond:
            if not self._queue and timeout != 0:
                self._cond.wait_for(lambda: self._queue or self.closed, timeout)
            if self._queue:
                return self._queue.popleft()
            return None

    def drain(self):
        """All currently queued messages, oldest first."""
        with self._cond:
            out = list(self._queue)
            self._queue.clear()
            return out

    def latest(self):
        """Newest queued message, discarding the rest; None if empty."""
        msgs = self.drain()
        return msgs[-1] if msgs else None

    def close(self):
        with self._cond:
            self.closed = True
            self._cond.notify_all()
        self._bus.unsubscribe(self)


class Publisher:
    """Per-topic publishing handle owning the seq counter."""

    def __init__(self, bus, topic):
        self.bus = bus
        self.topic = validate_topic(topic)
        self.seq = 0
        self._last_stamp = -1

    def send(self, stamp, payload):
        stamp = max(int(stamp), self._last_stamp)  # stamps non-decreasing per publisher
        self._last_stamp = stamp
        msg = BusMessage(self.topic, stamp, self.seq, payload)
        self.seq += 1
        self.bus.publish(msg)
        return msg


class Bus:
    """Topic fan-out. publish never blocks; slow subscribers drop oldest."""

    def __init__(self):
        self._lock = threading.Lock()
        self._subs = {}  # topic -> list of Subscription
        self._taps = []  # subscribe-all (bridges)

    def subscribe(self, topic, capacity=64):
        validate_topic(topic)
        sub = Subscription(self, topic, capacity)
        with self._lock:
            self._subs.setdefault(topic, []).append(sub)
        return sub

    def subscribe_all(self, capacity=1024, exclude_origin=None):
        """Internal tap receiving every message (used by TCP / websocket bridges)."""
        sub = Subscription(self, None, capacity, exclude_origin=exclude_origin)
        with self._lock:
            self._taps.append(sub)
        return sub

    def unsubscribe(self, sub):
        with self._lock:
            if sub.topic is None:
                if sub in self._taps:
                    self._taps.remove(sub)
            else:
                subs = self._subs.get(sub.topic, [])
                if sub in subs:
                    subs.remove(sub)

    def publish(self, msg, origin=None):
        validate_topic(msg.topic)
        with self._lock:
            targets = list(self._subs.get(msg.topic, ()))
            taps = [t for t in self._taps
                    if t.exclude_origin is None or t.exclude_origin != origin]
        for sub in targets:
            sub._push(msg)
        for tap in taps:
            tap._push(msg)

    def publisher(self, topic):
        return Publisher(self, topic)

    @property
    def dropped_total(self):
        with self._lock:
            return sum(s.dropped for subs in self._subs.values() for s in subs)


# Standard topic names
def topic_leader_states():
    return "/leader/joint_states"


def topic_follower_states():
    return "/follower/joint_states"


def topic_follower_commands():
    return "/follower/joint_commands"


def topic_feedback():
    return "/teleop/feedback"


def topic_camera(camera_id):
    return "/camera/%d/frame" % camera_id


def topic_session_events():
    return "/session/events"
