import numpy as np
import pytest

from puppetrig.kinematics import NUM_JOINTS
from puppetrig.rig import default_rig
from puppetrig.simdev import LeaderScript

ZERO = [0.0] * NUM_JOINTS
ZONE_POSE = [0.0, -0.9, 0.0, 0.0, 0.0, 0.0, 0.0]  # pitched up into the ending zone

# Tick-grid facts used when building scripts: grasp crossing at script time
# 0.5 - 0.002 lands on the 8 ms tick at +0.504, the 1 s holds and the 2 s
# transit are exact tick multiples.
GRASP_TICK = 0.504
FOLLOW_ENTRY = GRASP_TICK + 3.0  # hold 1 s + transit 2 s


@pytest.fixture
def rig(tmp_path):
    return default_rig(record_root=str(tmp_path / "episodes"))


def _wp(t, angles, gripper):
    return (float(t), np.asarray(angles, dtype=float), float(gripper))


def episode_cycle(base, pose_waypoints, follow_span):
    """Waypoints for one start->follow->stop cycle beginning at script time `base`.

    pose_waypoints: [(offset_after_follow_entry, angles), ...] task motion.
    The stop signal lands `follow_span + 2.0` s after following entry (the
    stop grasp crossing plus its 1 s hold), tick-exact when follow_span is a
    multiple of 0.008, so the recorded span is follow_span + 2.0 s.
    Returns (waypoints, cycle_duration).
    """
    wps = [
        _wp(base + 0.0, ZERO, 1.0),
        _wp(base + 0.49, ZERO, 1.0),
        _wp(base + 0.50, ZERO, 0.0),  # grasp: crossing 0.2 at +0.498 -> tick +0.504
        _wp(base + 1.60, ZERO, 0.0),
        _wp(base + 1.70, ZERO, 1.0),  # release after the start signal fired
    ]
    follow_entry = base + FOLLOW_ENTRY
    last_pose = ZERO
    last_t = base + 1.70
    for off, pose in pose_waypoints:
        t = follow_entry + off
        assert t > last_t
        wps.append(_wp(t, pose, 0.7))
        last_pose = pose
        last_t = t
    # move into the ending zone, then the 1 s stop grasp
    t_stop = follow_entry + follow_span + 1.0  # disarm tick = stop tick - 1 s hold
    t_zone = t_stop - 0.6
    assert t_zone > last_t
    wps.append(_wp(t_zone - 0.4, last_pose, 1.0))
    wps.append(_wp(t_zone, ZONE_POSE, 1.0))
    wps.append(_wp(t_stop - 0.01, ZONE_POSE, 1.0))
    wps.append(_wp(t_stop, ZONE_POSE, 0.0))  # crossing 0.2 at t_stop - 0.002
    wps.append(_wp(t_stop + 1.40, ZONE_POSE, 0.0))
    wps.append(_wp(t_stop + 1.50, ZONE_POSE, 1.0))
    wps.append(_wp(t_stop + 2.00, ZERO, 1.0))
    cycle_end = t_stop + 4.0  # stop transit + convergence margin
    return wps, cycle_end


def single_episode_script(follow_span=3.0, pose_waypoints=None):
    if pose_waypoints is None:
        pose_waypoints = [
            (0.5, [0.3, 0.0, 0.2, -0.4, 0.0, 0.0, 0.0]),
            (follow_span - 1.5, [-0.2, 0.1, -0.3, 0.3, 0.0, 0.0, 0.0]),
        ]
    wps, end = episode_cycle(0.0, pose_waypoints, follow_span)
    wps.append(_wp(end, ZERO, 1.0))
    return LeaderScript([list(w) for w in wps], [list(w) for w in wps]), end


def multi_episode_script(cycles, follow_span=1.2):
    wps = []
    base = 0.0
    for _ in range(cycles):
        cycle, end = episode_cycle(base, [(0.5, [0.2, 0.0, 0.1, -0.2, 0.0, 0.0, 0.0])],
                                   follow_span)
        wps.extend(cycle)
        base = end + 0.5
    wps.append(_wp(base, ZERO, 1.0))
    return LeaderScript([list(w) for w in wps], [list(w) for w in wps]), base


def meeting_script(yaw, pitch=0.0, dwell=1.5):
    """Both arms converge tip-to-tip (left yaw -yaw, right +yaw), dwell, retreat."""
    meet_left = [-yaw, pitch, 0.0, 0.0, 0.0, 0.0, 0.0]
    meet_right = [yaw, pitch, 0.0, 0.0, 0.0, 0.0, 0.0]
    span = 2.0 + dwell + 1.0

    def arm(meet_pose):
        poses = [(0.8, meet_pose), (0.8 + dwell, meet_pose), (0.8 + dwell + 0.8, ZERO)]
        wps, end = episode_cycle(0.0, poses, span)
        wps.append(_wp(end, ZERO, 1.0))
        return [list(w) for w in wps]

    return LeaderScript(arm(meet_left), arm(meet_right)), 4.504 + span + 4.0


def collision_script():
    """Drive both arms' yaw inward until the capsules would interpenetrate."""
    crash_left = [-0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    crash_right = [0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    span = 4.0

    def arm(crash_pose):
        poses = [(0.5, ZERO), (1.5, crash_pose), (2.5, crash_pose), (3.2, ZERO)]
        wps, end = episode_cycle(0.0, poses, span)
        wps.append(_wp(end, ZERO, 1.0))
        return [list(w) for w in wps]

    return LeaderScript(arm(crash_left), arm(crash_right)), 4.504 + span + 4.0
