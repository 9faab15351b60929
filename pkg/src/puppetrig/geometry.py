"""Rigid transforms (quaternion based) and segment/capsule geometry."""

from dataclasses import dataclass, field

import numpy as np

_QUAT_TOL = 1e-9


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def quat_multiply(a, b):
    """Hamilton product, (w, x, y, z) convention."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    half = 0.5 * angle
    q = np.empty(4)
    q[0] = np.cos(half)
    q[1:] = np.sin(half) * axis
    return q


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def quat_rotate(q, v):
    return quat_to_matrix(q) @ np.asarray(v, dtype=float)


@dataclass(frozen=True)
class RigidTransform:
    """Translation (m) plus unit quaternion rotation (w, x, y, z)."""

    translation: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3)
        r = np.asarray(self.rotation, dtype=float).reshape(4)
        if abs(np.linalg.norm(r) - 1.0) > _QUAT_TOL:
            raise ValueError("rotation quaternion must be unit norm")
        t.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)

    @staticmethod
    def identity():
        return RigidTransform(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def _trusted(cls, translation, rotation):
        """Fast internal constructor for arrays already known to be valid."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "translation", translation)
        object.__setattr__(obj, "rotation", rotation)
        return obj

    def compose(self, other):
        """self ∘ other: apply `other` first in self's frame."""
        t = self.translation + quat_rotate(self.rotation, other.translation)
        r = quat_normalize(quat_multiply(self.rotation, other.rotation))
        return RigidTransform(t, r)

    def apply(self, points):
        points = np.asarray(points, dtype=float)
        return points @ quat_to_matrix(self.rotation).T + self.translation

    def to_matrix(self):
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.rotation)
        m[:3, 3] = self.translation
        return m

    def __eq__(self, other):
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return (np.array_equal(self.translation, other.translation)
                and np.array_equal(self.rotation, other.rotation))


@dataclass(frozen=True)
class Capsule:
    """Line segment a-b swept by a sphere of the given radius."""

    a: np.ndarray
    b: np.ndarray
    radius: float
    label: str = field(default="")

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("capsule radius must be > 0")
        a = np.asarray(self.a, dtype=float).reshape(3)
        b = np.asarray(self.b, dtype=float).reshape(3)
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def _trusted(cls, a, b, radius, label):
        obj = object.__new__(cls)
        object.__setattr__(obj, "a", a)
        object.__setattr__(obj, "b", b)
        object.__setattr__(obj, "radius", radius)
        object.__setattr__(obj, "label", label)
        return obj


def segment_pair_distances(p1, q1, p2, q2):
    """Minimum distances between segment batches p1-q1 and p2-q2, shape (N, 3)."""
    p1 = np.atleast_2d(np.asarray(p1, dtype=float))
    q1 = np.atleast_2d(np.asarray(q1, dtype=float))
    p2 = np.atleast_2d(np.asarray(p2, dtype=float))
    q2 = np.atleast_2d(np.asarray(q2, dtype=float))
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    m = np.stack((d1, d2, r), axis=1)
    g = m @ m.transpose(0, 2, 1)  # per-pair Gram matrix of (d1, d2, r)
    a = g[:, 0, 0]
    e = g[:, 1, 1]
    b = g[:, 0, 1]
    c = g[:, 0, 2]
    f = g[:, 1, 2]

    eps = 1e-12
    denom = a * e - b * b
    clip01 = lambda x: np.minimum(np.maximum(x, 0.0), 1.0)
    s = np.where(denom > eps, clip01((b * f - c * e) / np.where(denom > eps, denom, 1.0)), 0.0)
    # closest point on segment 2 for that s, then re-clamp s if t left [0, 1]
    t = np.where(e > eps, (b * s + f) / np.where(e > eps, e, 1.0), 0.0)
    t_clamped = clip01(t)
    need = (t != t_clamped) | (e <= eps)
    s_reclamped = clip01((b * t_clamped - c) / np.where(a > eps, a, 1.0))
    s = np.where(need, s_reclamped, s)
    s = np.where(a > eps, s, 0.0)
    t = t_clamped
    closest1 = p1 + s[:, None] * d1
    closest2 = p2 + t[:, None] * d2
    return np.linalg.norm(closest1 - closest2, axis=1)


def segment_distance(p1, q1, p2, q2):
    """Scalar minimum distance between segments p1-q1 and p2-q2."""
    return float(segment_pair_distances(p1, q1, p2, q2)[0])
