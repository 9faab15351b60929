"""Simulated endpoints: follower arms with rate-limited first-order tracking,
scripted or UI-driven leader devices, and synthetic test-pattern cameras."""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import bus as busmod
from .bus import ArmJointState, CameraFramePayload, JointStatePayload
from .kinematics import NUM_JOINTS, JointVector, clamp_to_limits

NS = 1_000_000_000
STATE_RATE = 125
STATE_PERIOD_NS = NS // STATE_RATE
CAMERA_RATE = 30
CAMERA_PERIOD_NS = NS // CAMERA_RATE

FRAME_WIDTH = 32
FRAME_HEIGHT = 24


@dataclass(frozen=True)
class FollowerSimConfig:
    tracking_bandwidth: float = 12.0  # 1/s first-order pole
    max_joint_velocity: float = 3.0  # rad/s, per joint
    control_rate: float = STATE_RATE
    noise_std: float = 0.0
    effort_gain: float = 10.0  # synthetic effort = gain * residual error

    def __post_init__(self):
        if self.tracking_bandwidth <= 0 or self.max_joint_velocity <= 0:
            raise ValueError("bandwidth and max velocity must be > 0")


def follower_step(cfg, state, cmd, dt):
    """First-order tracking with a per-joint velocity clamp.

    Returns (new JointVector, velocity array, synthetic effort array).
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    bw = cfg.tracking_bandwidth
    vmax = cfg.max_joint_velocity
    gain = cfg.effort_gain
    prev = state.angles.tolist()
    target = cmd.angles.tolist()
    angles = np.empty(NUM_JOINTS)
    velocity = np.empty(NUM_JOINTS)
    effort = np.empty(NUM_JOINTS)
    for i in range(NUM_JOINTS):
        rate = min(vmax, max(-vmax, bw * (target[i] - prev[i])))
        a = prev[i] + rate * dt
        angles[i] = a
        velocity[i] = (a - prev[i]) / dt
        effort[i] = gain * (target[i] - a)
    g_rate = min(vmax, max(-vmax, bw * (cmd.gripper - state.gripper)))
    gripper = min(1.0, max(0.0, state.gripper + g_rate * dt))
    return JointVector._trusted(angles, gripper), velocity, effort


class FollowerSim:
    """Both follower arms: tracks published commands, publishes joint states at 125 Hz."""

    def __init__(self, bus, models, initial_pair, cfg=None, seed=0):
        self.cfg = cfg or FollowerSimConfig()
        self.models = models  # (left, right)
        self.states = list(initial_pair)
        self.cmds = list(initial_pair)
        self._sub = bus.subscribe(busmod.topic_follower_commands(), capacity=256)
        self._pub = bus.publisher(busmod.topic_follower_states())
        self._rng = np.random.default_rng(seed)
        self._last_step = None
        self.period_ns = int(round(NS / self.cfg.control_rate))
        self.next_due = 0

    def step(self, now):
        msg = self._sub.latest()
        if msg is not None:
            for i, arm in enumerate(msg.payload.arms[:2]):
                self.cmds[i] = clamp_to_limits(self.models[i],
                                               JointVector(arm.position,
                                                           min(1.0, max(0.0, arm.gripper))))
        dt = self.period_ns / NS if self._last_step is None else max(now - self._last_step, 1) / NS
        self._last_step = now
        arms = []
        for i in range(2):
            new, velocity, effort = follower_step(self.cfg, self.states[i], self.cmds[i], dt)
            new = clamp_to_limits(self.models[i], new)
            self.states[i] = new
            position = new.angles
            if self.cfg.noise_std > 0:
                position = position + self._rng.normal(0.0, self.cfg.noise_std, NUM_JOINTS)
            arms.append(ArmJointState(position, velocity, effort, new.gripper))
        self._pub.send(now, JointStatePayload(tuple(arms)))
        self.next_due = now + self.period_ns


@dataclass
class LeaderScript:
    """Per-arm waypoints (time s, 7 angles, gripper), linearly interpolated."""

    left: list
    right: list
    loop: bool = False

    def __post_init__(self):
        for name in ("left", "right"):
            wps = [(float(t), np.asarray(a, dtype=float).reshape(NUM_JOINTS), float(g))
                   for t, a, g in getattr(self, name)]
            times = [w[0] for w in wps]
            if not wps or any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("waypoint times must be strictly increasing and non-empty")
            if any(not 0.0 <= g <= 1.0 for _, _, g in wps):
                raise ValueError("waypoint gripper values must be in [0, 1]")
            setattr(self, name, wps)

    @property
    def duration(self):
        return max(self.left[-1][0], self.right[-1][0])

    @staticmethod
    def from_json(path):
        data = json.loads(open(path).read())
        return LeaderScript(
            [(float(t), np.asarray(a, dtype=float), float(g)) for t, a, g in data["left"]],
            [(float(t), np.asarray(a, dtype=float), float(g)) for t, a, g in data["right"]],
            bool(data.get("loop", False)))

    def to_json(self, path):
        data = {
            "left": [[t, list(map(float, a)), g] for t, a, g in self.left],
            "right": [[t, list(map(float, a)), g] for t, a, g in self.right],
            "loop": self.loop,
        }
        with open(path, "w") as f:
            json.dump(data, f, indent=2)

    def _sample_arm(self, wps, t):
        if self.loop and t > wps[-1][0]:
            t = t % wps[-1][0]
        if t <= wps[0][0]:
            _, a, g = wps[0]
            return JointVector._trusted(a, g)
        if t >= wps[-1][0]:
            _, a, g = wps[-1]
            return JointVector._trusted(a, g)
        for (t0, a0, g0), (t1, a1, g1) in zip(wps, wps[1:]):
            if t0 <= t <= t1:
                u = (t - t0) / (t1 - t0)
                return JointVector._trusted(a0 + u * (a1 - a0),
                                            min(1.0, max(0.0, g0 + u * (g1 - g0))))
        raise AssertionError("unreachable")

    def sample(self, t):
        return self._sample_arm(self.left, t), self._sample_arm(self.right, t)


class LeaderSim:
    """Leader devices publishing joint states at 125 Hz.

    Scripted mode samples a LeaderScript; UI mode passes externally injected
    setpoints through unchanged.
    """

    def __init__(self, bus, script=None, initial_pair=None, rate=STATE_RATE):
        self.script = script
        self._pub = bus.publisher(busmod.topic_leader_states())
        self.period_ns = int(round(NS / rate))
        self.next_due = 0
        self.setpoints = list(initial_pair) if initial_pair else [JointVector.zeros(), JointVector.zeros()]

    def inject(self, arm_index, q):
        """UI-driven setpoint for one arm (0 = left, 1 = right)."""
        self.setpoints[arm_index] = q

    def step(self, now):
        if self.script is not None:
            left, right = self.script.sample(now / NS)
        else:
            left, right = self.setpoints
        arms = tuple(ArmJointState(q.angles, np.zeros(NUM_JOINTS), np.zeros(NUM_JOINTS), q.gripper)
                     for q in (left, right))
        self._pub.send(now, JointStatePayload(arms))
        self.next_due = now + self.period_ns


def make_test_pattern(camera_id, frame_index, width=FRAME_WIDTH, height=FRAME_HEIGHT):
    """Deterministic RGB8 pattern with (camera_id, frame_index) embedded up front."""
    n = width * height * 3
    base = (camera_id * 31 + frame_index) % 256
    ramp = _pattern_ramp(n)
    buf = bytearray((ramp + np.uint8(base)).tobytes())  # uint8 add wraps mod 256
    header = struct.pack("<BQ", camera_id, frame_index)
    buf[:len(header)] = header
    return bytes(buf)


_RAMPS = {}


def _pattern_ramp(n):
    if n not in _RAMPS:
        _RAMPS[n] = (np.arange(n, dtype=np.int64) % 256).astype(np.uint8)
    return _RAMPS[n]


def decode_test_pattern(pixels):
    camera_id, frame_index = struct.unpack_from("<BQ", pixels, 0)
    return camera_id, frame_index


class CameraSim:
    """Synthetic camera publishing test-pattern frames at 30 Hz."""

    def __init__(self, bus, camera_id, rate=CAMERA_RATE,
                 width=FRAME_WIDTH, height=FRAME_HEIGHT):
        self.camera_id = camera_id
        self.width = width
        self.height = height
        self._pub = bus.publisher(busmod.topic_camera(camera_id))
        self.period_ns = int(round(NS / rate))
        self.next_due = 0
        self.frame_index = 0

    def step(self, now):
        pixels = make_test_pattern(self.camera_id, self.frame_index, self.width, self.height)
        self._pub.send(now, CameraFramePayload(self.camera_id, self.frame_index,
                                               self.width, self.height, pixels))
        self.frame_index += 1
        self.next_due = now + self.period_ns
