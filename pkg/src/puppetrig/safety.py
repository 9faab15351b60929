"""Self-collision gating of follower commands and operator feedback signals."""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .geometry import segment_distance, segment_pair_distances
from .kinematics import JointVector, capsule_endpoints, capsule_poses


class FeedbackCause(IntEnum):
    NONE = 0
    COLLISION = 1
    JOINT_LIMIT = 2
    TRACKING_LAG = 3


@dataclass(frozen=True)
class CollisionReport:
    colliding: bool
    min_distance: float
    worst_pair: tuple
    margin: float


@dataclass(frozen=True)
class FeedbackSignal:
    """Per-joint magnitudes in [0, 1], shape (2 arms, 7 joints), plus the cause."""

    magnitudes: np.ndarray
    cause: FeedbackCause

    def __post_init__(self):
        m = np.asarray(self.magnitudes, dtype=float).reshape(2, 7)
        m.setflags(write=False)
        object.__setattr__(self, "magnitudes", m)
        object.__setattr__(self, "cause", FeedbackCause(self.cause))

    @staticmethod
    def none():
        return FeedbackSignal(np.zeros((2, 7)), FeedbackCause.NONE)

    def __eq__(self, other):
        if not isinstance(other, FeedbackSignal):
            return NotImplemented
        return self.cause == other.cause and np.array_equal(self.magnitudes, other.magnitudes)


def capsule_distance(a, b):
    """Signed surface distance between two capsules; negative means penetration."""
    return segment_distance(a.a, a.b, b.a, b.b) - (a.radius + b.radius)


def _pair_indices(n_left, n_right, n_body, left_caps, right_caps):
    """Index pairs to test: inter-arm, arm-vs-body, and intra-arm non-adjacent."""
    pairs = []
    # inter-arm: everything against everything
    for i in range(n_left):
        for j in range(n_right):
            pairs.append((i, n_left + j))
    # each arm against the body proxy
    for k in range(n_body):
        body = n_left + n_right + k
        for i in range(n_left):
            pairs.append((i, body))
        for j in range(n_right):
            pairs.append((n_left + j, body))
    # intra-arm, skipping adjacent links (permanently near contact)
    for caps, base in ((left_caps, 0), (right_caps, n_left)):
        for i in range(len(caps)):
            for j in range(i + 1, len(caps)):
                if abs(caps[i].link_index - caps[j].link_index) >= 2:
                    pairs.append((base + i, base + j))
    return pairs


def _rig_pair_cache(rig):
    """Static per-rig pair indexing, radii sums and labels, computed once."""
    try:
        return rig._pair_cache
    except AttributeError:
        pass
    spec_left = rig.follower_left.capsules
    spec_right = rig.follower_right.capsules
    n_left, n_right = len(spec_left), len(spec_right)
    body = list(rig.body_capsules)
    pairs = _pair_indices(n_left, n_right, len(body), spec_left, spec_right)
    radii = np.array([c.radius for c in spec_left] + [c.radius for c in spec_right]
                     + [c.radius for c in body])
    labels = ([c.label for c in capsule_poses(rig.follower_left, JointVector.zeros())]
              + [c.label for c in capsule_poses(rig.follower_right, JointVector.zeros())]
              + [c.label or "body#%d" % k for k, c in enumerate(body)])
    ii = np.array([i for i, _ in pairs])
    jj = np.array([j for _, j in pairs])
    cache = {
        "ii": ii,
        "jj": jj,
        "radii_sum": radii[ii] + radii[jj],
        "labels": labels,
        "body_a": np.array([c.a for c in body]).reshape(len(body), 3),
        "body_b": np.array([c.b for c in body]).reshape(len(body), 3),
    }
    object.__setattr__(rig, "_pair_cache", cache)
    return cache


def check_self_collision(rig, q_left, q_right, margin):
    """Test all relevant capsule pairs of the two-arm rig at the given configuration.

    Pairs: left vs right arm (all), each arm vs the body proxy, and intra-arm
    pairs on non-adjacent links. Collision means min distance strictly below margin.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    cache = _rig_pair_cache(rig)
    la, lb = capsule_endpoints(rig.follower_left, q_left)
    ra, rb = capsule_endpoints(rig.follower_right, q_right)
    a = np.concatenate((la, ra, cache["body_a"]))
    b = np.concatenate((lb, rb, cache["body_b"]))
    ii, jj = cache["ii"], cache["jj"]
    dists = segment_pair_distances(a[ii], b[ii], a[jj], b[jj]) - cache["radii_sum"]
    worst = int(np.argmin(dists))
    min_distance = float(dists[worst])
    labels = cache["labels"]
    worst_pair = (labels[ii[worst]], labels[jj[worst]])
    return CollisionReport(min_distance < margin, min_distance, worst_pair, margin)


def gate_command(report, cmd_pair, last_safe_pair):
    """Freeze the followers at the last safe command while a collision is predicted."""
    if report.colliding:
        return last_safe_pair, True
    return cmd_pair, False


def compute_feedback(errors, report, limits_hit, deadband, saturation):
    """Normalized ramp of per-joint tracking error, with a cause classification.

    errors and limits_hit are (2, 7) arrays (both arms).
    """
    if not 0.0 <= deadband < saturation:
        raise ValueError("need 0 <= deadband < saturation")
    errors = np.asarray(errors, dtype=float).reshape(2, 7)
    limits_hit = np.asarray(limits_hit, dtype=bool).reshape(2, 7)
    magnitudes = np.clip((np.abs(errors) - deadband) / (saturation - deadband), 0.0, 1.0)
    if report is not None and report.colliding:
        cause = FeedbackCause.COLLISION
    elif limits_hit.any():
        cause = FeedbackCause.JOINT_LIMIT
    elif magnitudes.any():
        cause = FeedbackCause.TRACKING_LAG
    else:
        cause = FeedbackCause.NONE
    if cause == FeedbackCause.NONE:
        magnitudes = np.zeros((2, 7))
    return FeedbackSignal(magnitudes, cause)
