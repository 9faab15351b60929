"""Interaction-point analysis over recorded episodes.

The interaction point of an episode is the midpoint between the two follower
end-effectors at the time of their minimum mutual distance, reported only when
that distance falls below a proximity threshold. Results go out as a CSV table
and, optionally, a rendered scatter figure (top and side views).
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kinematics import JointVector, forward_kinematics
from .recorder import read_episode

DEFAULT_PROXIMITY_THRESHOLD = 0.15

CSV_COLUMNS = ["episode_id", "group", "t", "min_distance", "x", "y", "z"]
GROUP_CSV_COLUMNS = ["group", "count", "mean_x", "mean_y", "mean_z",
                     "cov_xx", "cov_xy", "cov_xz", "cov_yy", "cov_yz", "cov_zz"]


class NoInteraction(Exception):
    """The arms never came within the proximity threshold."""


@dataclass(frozen=True)
class InteractionPoint:
    episode_id: int
    group: str
    t: float
    min_distance: float
    point: np.ndarray


def end_effector_trajectories(episode, rig):
    """(N, 2, 3) end-effector positions from FK over the observed states."""
    out = np.empty((len(episode.records), 2, 3))
    models = (rig.follower_left, rig.follower_right)
    for i, rec in enumerate(episode.records):
        for a, (arm, model) in enumerate(zip(rec.obs, models)):
            q = JointVector(np.clip(arm.position, model.joint_limits[:, 0],
                                    model.joint_limits[:, 1]),
                            min(1.0, max(0.0, arm.gripper)))
            out[i, a] = forward_kinematics(model, q)[-1].translation
    return out


def episode_interaction_point(episode, rig, threshold=DEFAULT_PROXIMITY_THRESHOLD,
                              group_key="location"):
    traj = end_effector_trajectories(episode, rig)
    if len(traj) == 0:
        raise NoInteraction("empty episode")
    dists = np.linalg.norm(traj[:, 0] - traj[:, 1], axis=1)
    i = int(np.argmin(dists))
    if dists[i] >= threshold:
        raise NoInteraction("minimum distance %.3f m >= threshold %.3f m"
                            % (dists[i], threshold))
    midpoint = 0.5 * (traj[i, 0] + traj[i, 1])
    return InteractionPoint(episode.manifest["episode_id"],
                            str(episode.manifest.get(group_key, "")),
                            episode.records[i].t, float(dists[i]), midpoint)


def find_episode_dirs(root):
    root = Path(root)
    return sorted(p.parent for p in root.rglob("manifest.json"))


def analyze_tree(root, rig, threshold=DEFAULT_PROXIMITY_THRESHOLD, group_key="location"):
    """Interaction points for every episode under root, plus per-group statistics.

    Returns (points, skipped, groups) where groups maps group label to a dict
    with count, mean (3,), and covariance (3, 3).
    """
    points = []
    skipped = []
    for ep_dir in find_episode_dirs(root):
        episode = read_episode(ep_dir)
        try:
            points.append(episode_interaction_point(episode, rig, threshold, group_key))
        except NoInteraction as exc:
            skipped.append((ep_dir, str(exc)))
    groups = {}
    for label in sorted({p.group for p in points}):
        pts = np.array([p.point for p in points if p.group == label])
        cov = np.cov(pts.T) if len(pts) > 1 else np.zeros((3, 3))
        groups[label] = {"count": len(pts), "mean": pts.mean(axis=0),
                         "cov": np.atleast_2d(cov)}
    return points, skipped, groups


def write_points_csv(points, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_COLUMNS)
        for p in sorted(points, key=lambda p: (p.group, p.episode_id)):
            w.writerow([p.episode_id, p.group, "%.6f" % p.t, "%.6f" % p.min_distance,
                        "%.9f" % p.point[0], "%.9f" % p.point[1], "%.9f" % p.point[2]])


def write_groups_csv(groups, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(GROUP_CSV_COLUMNS)
        for label in sorted(groups):
            g = groups[label]
            cov = g["cov"]
            w.writerow([label, g["count"],
                        *("%.9f" % v for v in g["mean"]),
                        *("%.9f" % cov[i][j] for i, j in
                          ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)))])


def render_figure(points, groups, path):
    """Scatter of interaction points, top (x-y) and side (x-z) views."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_top, ax_side) = plt.subplots(1, 2, figsize=(10, 4.5))
    labels = sorted({p.group for p in points})
    cmap = plt.get_cmap("tab10")
    for k, label in enumerate(labels):
        pts = np.array([p.point for p in points if p.group == label])
        color = cmap(k % 10)
        ax_top.scatter(pts[:, 0], pts[:, 1], s=18, color=color, label=label or "(none)")
        ax_side.scatter(pts[:, 0], pts[:, 2], s=18, color=color)
        mean = groups[label]["mean"]
        ax_top.scatter([mean[0]], [mean[1]], marker="x", s=80, color=color)
        ax_side.scatter([mean[0]], [mean[2]], marker="x", s=80, color=color)
    ax_top.set_xlabel("x [m]")
    ax_top.set_ylabel("y [m]")
    ax_top.set_title("top view")
    ax_side.set_xlabel("x [m]")
    ax_side.set_ylabel("z [m]")
    ax_side.set_title("side view")
    if labels:
        ax_top.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
