import numpy as np
import pytest

from puppetrig.geometry import quat_to_matrix
from puppetrig.kinematics import (NUM_JOINTS, JointVector, capsule_poses,
                                  clamp_to_limits, default_arm_model,
                                  forward_kinematics, scale_model, within_limits)


def homogeneous_fk(model, q):
    """Independent oracle: compose 4x4 homogeneous matrices numerically."""
    m = model.base_pose.to_matrix()
    frames = [m]
    for link, angle in zip(model.links, q.angles):
        fixed = np.eye(4)
        fixed[:3, :3] = quat_to_matrix(link.rotation)
        fixed[:3, 3] = link.translation
        axis = link.axis
        k = np.array([[0, -axis[2], axis[1]],
                      [axis[2], 0, -axis[0]],
                      [-axis[1], axis[0], 0]])
        rot = np.eye(4)
        rot[:3, :3] = np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)
        m = m @ fixed @ rot
        frames.append(m)
    return frames


def random_q(rng, model):
    lo = model.joint_limits[:, 0]
    hi = model.joint_limits[:, 1]
    return JointVector(rng.uniform(lo, hi), rng.uniform(0, 1))


@pytest.fixture
def model():
    return default_arm_model()


def test_zero_angles_composes_fixed_transforms(model):
    frames = forward_kinematics(model, JointVector.zeros())
    expected = model.base_pose
    for link in model.links:
        expected = expected.compose(link.fixed_transform())
    assert np.allclose(frames[-1].translation, expected.translation, atol=1e-12)
    assert np.allclose(frames[-1].rotation, expected.rotation, atol=1e-12)


def test_fk_returns_eight_frames(model):
    assert len(forward_kinematics(model, JointVector.zeros())) == 8


def test_fk_matches_homogeneous_oracle_single(model):
    q = JointVector(np.array([np.pi / 2, 0, 0, 0, 0, 0, 0]))
    frames = forward_kinematics(model, q)
    oracle = homogeneous_fk(model, q)
    assert np.allclose(frames[-1].to_matrix(), oracle[-1], atol=1e-9)


def test_fk_matches_homogeneous_oracle_random(model):
    rng = np.random.default_rng(11)
    for _ in range(200):
        q = random_q(rng, model)
        frames = forward_kinematics(model, q)
        oracle = homogeneous_fk(model, q)
        for f, m in zip(frames, oracle):
            assert np.allclose(f.to_matrix(), m, atol=1e-9)


def test_fk_deterministic(model):
    q = JointVector(np.linspace(-1, 1, NUM_JOINTS))
    a = forward_kinematics(model, q)
    b = forward_kinematics(model, q)
    for fa, fb in zip(a, b):
        assert np.array_equal(fa.translation, fb.translation)
        assert np.array_equal(fa.rotation, fb.rotation)


def test_frame_chaining(model):
    rng = np.random.default_rng(12)
    q = random_q(rng, model)
    q2 = JointVector(np.concatenate([q.angles[:4], rng.uniform(-1, 1, 3)]), q.gripper)
    a = forward_kinematics(model, q)
    b = forward_kinematics(model, q2)
    for k in range(5):  # frames 0..4 depend only on joints 1..4
        assert np.allclose(a[k].to_matrix(), b[k].to_matrix(), atol=1e-15)


def test_scaled_leader_translation_property(model):
    s = 0.8
    leader = scale_model(model, s, "leader")
    rng = np.random.default_rng(13)
    for _ in range(100):
        q = random_q(rng, model)
        f = forward_kinematics(model, q)[-1]
        l = forward_kinematics(leader, q)[-1]
        t_f = f.translation - model.base_pose.translation
        t_l = l.translation - leader.base_pose.translation
        assert np.allclose(t_l, s * t_f, atol=1e-9)
        assert np.allclose(np.abs(np.dot(l.rotation, f.rotation)), 1.0, atol=1e-9)


def test_output_rotations_unit_norm(model):
    rng = np.random.default_rng(14)
    for _ in range(50):
        for f in forward_kinematics(model, random_q(rng, model)):
            assert abs(np.linalg.norm(f.rotation) - 1.0) < 1e-9


def test_within_limits_boundaries(model):
    lo = model.joint_limits[:, 0]
    assert within_limits(model, JointVector(lo, 0.0))
    angles = lo.copy()
    angles[3] = model.joint_limits[3, 1] + 1e-6
    assert not within_limits(model, JointVector(angles, 0.5))


def test_within_limits_against_component_scan(model):
    rng = np.random.default_rng(15)
    lo = model.joint_limits[:, 0]
    hi = model.joint_limits[:, 1]
    span = hi - lo
    for _ in range(1000):
        angles = rng.uniform(lo - 0.2 * span, hi + 0.2 * span)
        g = rng.uniform(0, 1)
        q = JointVector(angles, g)
        expected = all(lo[i] <= angles[i] <= hi[i] for i in range(NUM_JOINTS))
        expected = expected and model.gripper_limits[0] <= g <= model.gripper_limits[1]
        assert within_limits(model, q) == expected


def test_clamp_identity_on_feasible(model):
    q = JointVector(np.full(NUM_JOINTS, 0.3), 0.5)
    assert clamp_to_limits(model, q) == q


def test_clamp_single_joint(model):
    angles = np.zeros(NUM_JOINTS)
    angles[0] = model.joint_limits[0, 1] + 0.5
    clamped = clamp_to_limits(model, JointVector(angles, 0.5))
    assert clamped.angles[0] == model.joint_limits[0, 1]
    assert np.array_equal(clamped.angles[1:], angles[1:])


def test_clamp_idempotent(model):
    rng = np.random.default_rng(16)
    for _ in range(1000):
        q = JointVector(rng.uniform(-5, 5, NUM_JOINTS), rng.uniform(0, 1))
        once = clamp_to_limits(model, q)
        assert clamp_to_limits(model, once) == once
        assert within_limits(model, once)


def test_capsules_at_zero_match_fixed_composition(model):
    caps = capsule_poses(model, JointVector.zeros())
    frames = forward_kinematics(model, JointVector.zeros())
    for spec, cap in zip(model.capsules, caps):
        assert np.allclose(cap.a, frames[spec.link_index].apply(spec.p0), atol=1e-12)
        assert np.allclose(cap.b, frames[spec.link_index].apply(spec.p1), atol=1e-12)


def test_capsule_length_invariant(model):
    rng = np.random.default_rng(17)
    rest = [np.linalg.norm(c.p1 - c.p0) for c in model.capsules]
    for _ in range(100):
        caps = capsule_poses(model, random_q(rng, model))
        for cap, length in zip(caps, rest):
            assert np.linalg.norm(cap.b - cap.a) == pytest.approx(length, abs=1e-9)


def test_base_capsule_independent_of_distal_joints(model):
    # first capsule sits on frame 1: only joint 1 moves it
    rng = np.random.default_rng(18)
    q1 = 0.4
    base = None
    for _ in range(20):
        angles = rng.uniform(-1, 1, NUM_JOINTS)
        angles[0] = q1
        cap = capsule_poses(model, JointVector(angles, 0.5))[0]
        if base is None:
            base = cap
        assert np.allclose(cap.a, base.a, atol=1e-15)
        assert np.allclose(cap.b, base.b, atol=1e-15)


def test_jointvector_invariants():
    with pytest.raises(ValueError):
        JointVector(np.full(NUM_JOINTS, np.nan))
    with pytest.raises(ValueError):
        JointVector(np.zeros(NUM_JOINTS), 1.5)


def test_model_invariants():
    model = default_arm_model()
    assert len(model.links) == NUM_JOINTS
    assert np.all(model.joint_limits[:, 0] < model.joint_limits[:, 1])
    for link in model.links:
        assert abs(np.linalg.norm(link.axis) - 1.0) < 1e-9
    # total reach matches the documented 0.794 m
    reach = sum(np.linalg.norm(l.translation) for l in model.links)
    assert reach == pytest.approx(0.794)
