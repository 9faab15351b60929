"""Data-collection lifecycle state machine.

Ready pose -> 1 s dual-gripper grasp arms an episode -> minimum-jerk transit to
the leader configuration -> following -> 1 s grasp inside the ending zone stops
the episode -> return to ready. All timing uses message stamps passed in as
`now`; the machine never reads a clock, so replays reproduce transitions
exactly.
"""

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Optional

import numpy as np

from .bus import SessionEventCode, SessionEventPayload
from .kinematics import JointVector

NS = 1_000_000_000


class StateKind(IntEnum):
    IDLE = 0
    READY = 1
    ARMING = 2
    TRANSIT = 3
    FOLLOWING = 4
    DISARMING = 5
    STOPPING = 6


@dataclass(frozen=True)
class SessionState:
    kind: StateKind = StateKind.IDLE
    entered_at: int = 0
    held_since: Optional[int] = None
    episode_id: Optional[int] = None
    episodes_started: int = 0

    @property
    def progress_denominator(self):
        return self.entered_at


@dataclass(frozen=True)
class GestureConfig:
    grasp_threshold: float = 0.2
    hold_duration: float = 1.0
    end_zone_min: np.ndarray = field(default_factory=lambda: np.array([0.1, -0.45, 0.2]))
    end_zone_max: np.ndarray = field(default_factory=lambda: np.array([0.45, 0.45, 0.6]))
    transit_duration: float = 2.0
    ready_tolerance: float = 0.02  # rad, declares the ready pose reached

    def __post_init__(self):
        if self.hold_duration <= 0:
            raise ValueError("hold_duration must be > 0")
        zmin = np.asarray(self.end_zone_min, dtype=float).reshape(3)
        zmax = np.asarray(self.end_zone_max, dtype=float).reshape(3)
        if not np.all(zmin < zmax):
            raise ValueError("end zone must be non-degenerate")
        zmin.setflags(write=False)
        zmax.setflags(write=False)
        object.__setattr__(self, "end_zone_min", zmin)
        object.__setattr__(self, "end_zone_max", zmax)

    @property
    def hold_duration_ns(self):
        return int(round(self.hold_duration * NS))

    @property
    def transit_duration_ns(self):
        return int(round(self.transit_duration * NS))


@dataclass(frozen=True)
class ReadyPose:
    q_left: JointVector
    q_right: JointVector


def is_grasped(leader_q, cfg):
    """A leader gripper at or below the aperture threshold counts as grasped."""
    return leader_q.gripper <= cfg.grasp_threshold


def in_end_zone(position, cfg):
    p = np.asarray(position, dtype=float).reshape(3)
    return bool(np.all(p >= cfg.end_zone_min) and np.all(p <= cfg.end_zone_max))


def _enter(state, kind, now, **kw):
    new = replace(state, kind=kind, entered_at=now, held_since=None, **kw)
    return new, SessionEventPayload(SessionEventCode.STATE_CHANGED, int(kind))


def step(state, leader_pair, leader_ee_pair, cfg, now, followers_at_ready=False):
    """One transition of the session automaton.

    leader_pair: (JointVector, JointVector); leader_ee_pair: the two leader
    end-effector poses (RigidTransform). followers_at_ready reports whether the
    follower arms have converged to the ready pose (used by Idle and Stopping).
    Returns (new state, events).
    """
    events = []
    both_grasped = all(is_grasped(q, cfg) for q in leader_pair)

    if state.kind == StateKind.IDLE:
        if followers_at_ready:
            state, ev = _enter(state, StateKind.READY, now)
            events.append(ev)

    elif state.kind == StateKind.READY:
        if both_grasped:
            state, ev = _enter(state, StateKind.ARMING, now)
            state = replace(state, held_since=now)
            events.append(ev)

    elif state.kind == StateKind.ARMING:
        if not both_grasped:
            state, ev = _enter(state, StateKind.READY, now)
            events.append(ev)
        elif now - state.held_since >= cfg.hold_duration_ns:
            episode_id = state.episodes_started
            state, ev = _enter(state, StateKind.TRANSIT, now,
                               episode_id=episode_id,
                               episodes_started=state.episodes_started + 1)
            events.append(SessionEventPayload(SessionEventCode.EPISODE_START, episode_id))
            events.append(ev)

    elif state.kind == StateKind.TRANSIT:
        if now - state.entered_at >= cfg.transit_duration_ns:
            state, ev = _enter(state, StateKind.FOLLOWING, now)
            events.append(ev)

    elif state.kind == StateKind.FOLLOWING:
        both_in_zone = all(in_end_zone(ee.translation, cfg) for ee in leader_ee_pair)
        if both_grasped and both_in_zone:
            state, ev = _enter(state, StateKind.DISARMING, now)
            state = replace(state, held_since=now)
            events.append(ev)

    elif state.kind == StateKind.DISARMING:
        both_in_zone = all(in_end_zone(ee.translation, cfg) for ee in leader_ee_pair)
        if not (both_grasped and both_in_zone):
            state, ev = _enter(state, StateKind.FOLLOWING, now)
            events.append(ev)
        elif now - state.held_since >= cfg.hold_duration_ns:
            episode_id = state.episode_id
            state, ev = _enter(state, StateKind.STOPPING, now, episode_id=None)
            events.append(SessionEventPayload(SessionEventCode.EPISODE_STOP, episode_id))
            events.append(ev)

    elif state.kind == StateKind.STOPPING:
        if followers_at_ready:
            state, ev = _enter(state, StateKind.READY, now)
            events.append(ev)

    return state, events


def transit_progress(state, cfg, now):
    if cfg.transit_duration_ns <= 0:
        return 1.0
    return min(1.0, max(0.0, (now - state.entered_at) / cfg.transit_duration_ns))


def minimum_jerk(progress):
    p = min(1.0, max(0.0, float(progress)))
    return p * p * p * (10.0 + p * (-15.0 + 6.0 * p))


def _interp(src, dst, s):
    angles = src.angles + s * (dst.angles - src.angles)
    gripper = src.gripper + s * (dst.gripper - src.gripper)
    return JointVector(angles, gripper)


def transit_command(source_pair, target_pair, progress):
    """Minimum-jerk interpolation between two configuration pairs."""
    s = minimum_jerk(progress)
    return tuple(_interp(a, b, s) for a, b in zip(source_pair, target_pair))
