"""Kinematic model of a 7-DoF serial arm with a parallel-jaw gripper.

Forward kinematics, joint limits and collision-capsule placement. The default
model is a desk-scale arm with 0.794 m reach; the miniature leader device is
the same chain with translations scaled down.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Capsule, RigidTransform, quat_normalize

NUM_JOINTS = 7

_AXIS_TOL = 1e-9


@dataclass(frozen=True)
class LinkSpec:
    """Fixed transform from the parent joint frame plus this joint's axis."""

    translation: np.ndarray
    rotation: np.ndarray
    axis: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3)
        r = quat_normalize(np.asarray(self.rotation, dtype=float).reshape(4))
        ax = np.asarray(self.axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(ax) - 1.0) > _AXIS_TOL:
            raise ValueError("joint axis must be unit norm")
        for arr in (t, r, ax):
            arr.setflags(write=False)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "axis", ax)

    def fixed_transform(self):
        return RigidTransform(self.translation, self.rotation)


@dataclass(frozen=True)
class CapsuleSpec:
    """Collision capsule attached to one FK frame, endpoints in that frame."""

    link_index: int
    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("capsule radius must be > 0")
        p0 = np.asarray(self.p0, dtype=float).reshape(3)
        p1 = np.asarray(self.p1, dtype=float).reshape(3)
        p0.setflags(write=False)
        p1.setflags(write=False)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)


@dataclass(frozen=True)
class JointVector:
    """Seven joint angles (rad) plus a normalized gripper aperture in [0, 1]."""

    angles: np.ndarray
    gripper: float = 1.0

    def __post_init__(self):
        angles = self.angles
        if type(angles) is not np.ndarray or angles.shape != (NUM_JOINTS,) or angles.dtype != np.float64:
            angles = np.asarray(angles, dtype=float).reshape(NUM_JOINTS)
        if not np.isfinite(angles).all():
            raise ValueError("joint angles must be finite")
        g = float(self.gripper)
        if not math.isfinite(g) or not 0.0 <= g <= 1.0:
            raise ValueError("gripper aperture must be in [0, 1]")
        angles.setflags(write=False)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "gripper", g)

    @staticmethod
    def zeros(gripper=1.0):
        return JointVector(np.zeros(NUM_JOINTS), gripper)

    @classmethod
    def _trusted(cls, angles, gripper):
        """Fast internal constructor: angles must already be float64 (7,)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "angles", angles)
        object.__setattr__(obj, "gripper", gripper)
        return obj

    def __eq__(self, other):
        if not isinstance(other, JointVector):
            return NotImplemented
        return np.array_equal(self.angles, other.angles) and self.gripper == other.gripper


@dataclass(frozen=True)
class ArmModel:
    name: str
    links: tuple
    joint_limits: np.ndarray
    gripper_limits: tuple
    base_pose: RigidTransform
    capsules: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.links) != NUM_JOINTS:
            raise ValueError("arm must have exactly %d revolute joints" % NUM_JOINTS)
        limits = np.asarray(self.joint_limits, dtype=float).reshape(NUM_JOINTS, 2)
        if not np.all(limits[:, 0] < limits[:, 1]):
            raise ValueError("every joint limit must satisfy lower < upper")
        closed, opened = self.gripper_limits
        if not 0.0 <= closed < opened <= 1.0:
            raise ValueError("gripper limits must satisfy 0 <= closed < open <= 1")
        for cap in self.capsules:
            if not 0 <= cap.link_index <= NUM_JOINTS:
                raise ValueError("capsule link_index out of range")
        limits.setflags(write=False)
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "joint_limits", limits)
        object.__setattr__(self, "gripper_limits", (float(closed), float(opened)))
        object.__setattr__(self, "capsules", tuple(self.capsules))


def _fk_link_data(model):
    """Per-model scalar link constants, computed once and cached on the model."""
    try:
        return model._fk_data
    except AttributeError:
        pass
    base = (*(float(x) for x in model.base_pose.translation),
            *(float(x) for x in model.base_pose.rotation))
    links = []
    for link in model.links:
        rw, rx, ry, rz = (float(x) for x in link.rotation)
        has_rot = abs(rw - 1.0) > 1e-15 or rx or ry or rz
        links.append(((*(float(x) for x in link.translation),),
                      has_rot, (rw, rx, ry, rz),
                      (*(float(x) for x in link.axis),)))
    data = (base, tuple(links))
    object.__setattr__(model, "_fk_data", data)
    return data


def _rotate_scalar(w, x, y, z, vx, vy, vz):
    # v' = v + 2 u x (u x v + w v) with u = (x, y, z)
    ax = y * vz - z * vy + w * vx
    ay = z * vx - x * vz + w * vy
    az = x * vy - y * vx + w * vz
    return (vx + 2.0 * (y * az - z * ay),
            vy + 2.0 * (z * ax - x * az),
            vz + 2.0 * (x * ay - y * ax))


def _fk_scalar(model, angles):
    """FK as plain float tuples: [(px, py, pz, qw, qx, qy, qz)] per frame."""
    (px, py, pz, qw, qx, qy, qz), links = _fk_link_data(model)
    frames = [(px, py, pz, qw, qx, qy, qz)]
    for ((tx, ty, tz), has_rot, (rw, rx, ry, rz), (ax, ay, az)), angle in zip(links, angles):
        if tx or ty or tz:
            # inlined _rotate_scalar, the single hottest inner statement
            cx = qy * tz - qz * ty + qw * tx
            cy = qz * tx - qx * tz + qw * ty
            cz = qx * ty - qy * tx + qw * tz
            px = px + (tx + 2.0 * (qy * cz - qz * cy))
            py = py + (ty + 2.0 * (qz * cx - qx * cz))
            pz = pz + (tz + 2.0 * (qx * cy - qy * cx))
        if has_rot:
            qw, qx, qy, qz = (qw * rw - qx * rx - qy * ry - qz * rz,
                              qw * rx + qx * rw + qy * rz - qz * ry,
                              qw * ry - qx * rz + qy * rw + qz * rx,
                              qw * rz + qx * ry - qy * rx + qz * rw)
        half = 0.5 * angle
        c = math.cos(half)
        s = math.sin(half)
        jw, jx, jy, jz = c, s * ax, s * ay, s * az
        qw, qx, qy, qz = (qw * jw - qx * jx - qy * jy - qz * jz,
                          qw * jx + qx * jw + qy * jz - qz * jy,
                          qw * jy - qx * jz + qy * jw + qz * jx,
                          qw * jz + qx * jy - qy * jx + qz * jw)
        n = (qw * qw + qx * qx + qy * qy + qz * qz) ** -0.5
        qw, qx, qy, qz = qw * n, qx * n, qy * n, qz * n
        frames.append((px, py, pz, qw, qx, qy, qz))
    return frames


def forward_kinematics(model, q):
    """FK frames: base pose plus one frame per joint; the last is the end-effector.

    frame[k] = frame[k-1] ∘ fixed_k ∘ rotate(axis_k, q_k)
    """
    return [RigidTransform._trusted(np.array(f[:3]), np.array(f[3:]))
            for f in _fk_scalar(model, q.angles)]


def end_effector_frame(model, q):
    """Just the last FK frame, skipping the intermediate frame objects."""
    f = _fk_scalar(model, q.angles)[-1]
    return RigidTransform._trusted(np.array(f[:3]), np.array(f[3:]))


def _limits_scalar(model):
    try:
        return model._limits_data
    except AttributeError:
        pass
    data = (tuple(float(x) for x in model.joint_limits[:, 0]),
            tuple(float(x) for x in model.joint_limits[:, 1]))
    object.__setattr__(model, "_limits_data", data)
    return data


def within_limits(model, q):
    lo, hi = _limits_scalar(model)
    for v, l, h in zip(q.angles.tolist(), lo, hi):
        if v < l or v > h:
            return False
    closed, opened = model.gripper_limits
    return closed <= q.gripper <= opened


def clamp_to_limits(model, q):
    if within_limits(model, q):
        return q
    angles = np.clip(q.angles, model.joint_limits[:, 0], model.joint_limits[:, 1])
    closed, opened = model.gripper_limits
    gripper = min(max(q.gripper, closed), opened)
    return JointVector(angles, gripper)


def _capsule_data(model):
    try:
        return model._capsule_data
    except AttributeError:
        pass
    data = tuple((c.link_index, (*(float(x) for x in c.p0),), (*(float(x) for x in c.p1),),
                  c.radius, "%s/%d#%d" % (model.name, c.link_index, i))
                 for i, c in enumerate(model.capsules))
    object.__setattr__(model, "_capsule_data", data)
    return data


def capsule_endpoints(model, q):
    """World-frame capsule endpoints at configuration q, as two (n, 3) arrays."""
    frames = _fk_scalar(model, q.angles)
    a = []
    b = []
    for link_index, p0, p1, _, _ in _capsule_data(model):
        px, py, pz, qw, qx, qy, qz = frames[link_index]
        for p, out in ((p0, a), (p1, b)):
            dx, dy, dz = _rotate_scalar(qw, qx, qy, qz, *p)
            out.append((px + dx, py + dy, pz + dz))
    return np.array(a), np.array(b)


def capsule_poses(model, q):
    """Map the model's collision capsules into the world frame at configuration q."""
    a, b = capsule_endpoints(model, q)
    return [Capsule._trusted(a[i], b[i], spec[3], spec[4])
            for i, spec in enumerate(_capsule_data(model))]


def scale_model(model, scale, name=None):
    """Uniformly scale link translations and capsule geometry (the leader device)."""
    if scale <= 0:
        raise ValueError("scale must be > 0")
    links = tuple(LinkSpec(l.translation * scale, l.rotation, l.axis) for l in model.links)
    capsules = tuple(CapsuleSpec(c.link_index, c.p0 * scale, c.p1 * scale, c.radius * scale)
                     for c in model.capsules)
    return ArmModel(name or (model.name + "-scaled"), links, model.joint_limits,
                    model.gripper_limits, model.base_pose, capsules)


# Default desk-scale model. Translation magnitudes sum to 0.794 m reach.
_DEFAULT_CHAIN = (
    ((0.0, 0.0, 0.100), (0, 0, 1)),
    ((0.0, 0.0, 0.050), (0, 1, 0)),
    ((0.150, 0.0, 0.0), (1, 0, 0)),
    ((0.150, 0.0, 0.0), (0, 1, 0)),
    ((0.130, 0.0, 0.0), (1, 0, 0)),
    ((0.120, 0.0, 0.0), (0, 1, 0)),
    ((0.094, 0.0, 0.0), (1, 0, 0)),
)

DEFAULT_CAPSULE_RADIUS = 0.04
ELBOW_JOINT = 3


def default_arm_model(name="arm", base_pose=None, capsule_radius=DEFAULT_CAPSULE_RADIUS):
    identity_rot = (1.0, 0.0, 0.0, 0.0)
    links = tuple(LinkSpec(np.array(t), identity_rot, np.array(ax, dtype=float))
                  for t, ax in _DEFAULT_CHAIN)
    limits = np.tile([-np.pi, np.pi], (NUM_JOINTS, 1))
    limits[ELBOW_JOINT] = (-2.6, 2.6)
    # one column capsule over the short base links, then one per long link,
    # each spanning its parent frame origin to the child joint origin
    capsules = (CapsuleSpec(1, np.array([0.0, 0.0, -0.10]), np.array([0.0, 0.0, 0.05]),
                            capsule_radius),)
    capsules += tuple(CapsuleSpec(k, np.zeros(3), np.array(_DEFAULT_CHAIN[k][0]), capsule_radius)
                      for k in range(2, NUM_JOINTS))
    return ArmModel(name, links, limits, (0.0, 1.0),
                    base_pose or RigidTransform.identity(), capsules)
