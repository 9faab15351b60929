"""Leader-to-follower joint mapping: per-joint sign/offset, gripper affine map,
optional exponential smoothing, always clamped into follower limits."""

from dataclasses import dataclass

import numpy as np

from .kinematics import NUM_JOINTS, JointVector, clamp_to_limits


@dataclass(frozen=True)
class RetargetConfig:
    signs: np.ndarray
    offsets: np.ndarray
    gripper_gain: float = 1.0
    gripper_bias: float = 0.0
    smoothing_alpha: float = 1.0

    def __post_init__(self):
        signs = np.asarray(self.signs, dtype=float).reshape(NUM_JOINTS)
        offsets = np.asarray(self.offsets, dtype=float).reshape(NUM_JOINTS)
        if not np.all(np.isin(signs, (-1.0, 1.0))):
            raise ValueError("signs must be +1 or -1")
        if not 0.0 < self.smoothing_alpha <= 1.0:
            raise ValueError("smoothing_alpha must be in (0, 1]")
        signs.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "offsets", offsets)

    @staticmethod
    def identity():
        return RetargetConfig(np.ones(NUM_JOINTS), np.zeros(NUM_JOINTS))


def retarget(cfg, follower_model, leader_q, prev_cmd=None):
    """Map a leader joint state to a follower command.

    Smoothing blends the raw mapping with the previous command per component;
    clamping runs last so the output always satisfies follower limits.
    """
    raw = cfg.signs * leader_q.angles + cfg.offsets
    raw_gripper = cfg.gripper_gain * leader_q.gripper + cfg.gripper_bias
    if prev_cmd is not None and cfg.smoothing_alpha < 1.0:
        a = cfg.smoothing_alpha
        raw = a * raw + (1.0 - a) * prev_cmd.angles
        raw_gripper = a * raw_gripper + (1.0 - a) * prev_cmd.gripper

    lo = follower_model.joint_limits[:, 0]
    hi = follower_model.joint_limits[:, 1]
    angles = np.clip(raw, lo, hi)
    closed, opened = follower_model.gripper_limits
    gripper = min(max(raw_gripper, closed), opened)
    return JointVector._trusted(angles, float(gripper))


def retarget_raw_limit_flags(cfg, follower_model, leader_q):
    """Per-joint flags: would the unclamped mapping exceed the follower limits."""
    raw = cfg.signs * leader_q.angles + cfg.offsets
    lo = follower_model.joint_limits[:, 0]
    hi = follower_model.joint_limits[:, 1]
    return (raw < lo) | (raw > hi)


def tracking_error(cmd, follower_state):
    """Per-joint command minus state, and the max-abs scalar over the 7 joints."""
    errors = cmd.angles - follower_state.angles
    return errors, float(np.max(np.abs(errors)))
