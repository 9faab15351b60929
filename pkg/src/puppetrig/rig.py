"""Rig description: one YAML file defining both arm models, mounts, retarget,
gesture and safety parameters. The file's hash is stamped into every episode
manifest so recordings stay traceable to the exact configuration."""

import hashlib
import json
from dataclasses import dataclass

import numpy as np
import yaml

from .geometry import Capsule, RigidTransform
from .kinematics import (NUM_JOINTS, ArmModel, CapsuleSpec, JointVector, LinkSpec,
                         default_arm_model, scale_model)
from .retarget import RetargetConfig
from .session import GestureConfig, ReadyPose

DEFAULT_LEADER_SCALE = 0.8  # leader length 635 mm over follower 794 mm


class RigError(Exception):
    pass


@dataclass(frozen=True)
class SafetyParams:
    margin: float = 0.02
    deadband: float = 0.05
    saturation: float = 0.5


@dataclass(frozen=True)
class Rig:
    follower_left: ArmModel
    follower_right: ArmModel
    leader_left: ArmModel
    leader_right: ArmModel
    body_capsules: tuple
    retarget_cfg: RetargetConfig
    gesture_cfg: GestureConfig
    safety: SafetyParams
    ready_pose: ReadyPose
    leader_scale: float
    cameras: int
    record_root: str
    rig_hash: str


def default_rig_dict():
    """The shipped desk-scale two-arm rig as a plain config tree."""
    model = default_arm_model()
    return {
        "arm": {
            "links": [{"translation": [float(x) for x in l.translation],
                       "rotation": [float(x) for x in l.rotation],
                       "axis": [float(x) for x in l.axis]} for l in model.links],
            "joint_limits": [[float(lo), float(hi)] for lo, hi in model.joint_limits],
            "gripper_limits": [0.0, 1.0],
            "capsules": [{"link": c.link_index,
                          "p0": [float(x) for x in c.p0],
                          "p1": [float(x) for x in c.p1],
                          "radius": c.radius} for c in model.capsules],
        },
        "mounts": {
            "left": {"translation": [0.0, 0.25, 0.0], "rotation": [1.0, 0.0, 0.0, 0.0]},
            "right": {"translation": [0.0, -0.25, 0.0], "rotation": [1.0, 0.0, 0.0, 0.0]},
        },
        "leader_scale": DEFAULT_LEADER_SCALE,
        "body_capsules": [
            {"p0": [-0.22, -0.3, 0.0], "p1": [-0.22, 0.3, 0.0], "radius": 0.08},
        ],
        "retarget": {
            "signs": [1] * NUM_JOINTS,
            "offsets": [0.0] * NUM_JOINTS,
            "gripper_gain": 1.0,
            "gripper_bias": 0.0,
            "smoothing_alpha": 1.0,
        },
        "gesture": {
            "grasp_threshold": 0.2,
            "hold_duration": 1.0,
            "transit_duration": 2.0,
            "end_zone": {"min": [0.1, -0.45, 0.2], "max": [0.45, 0.45, 0.6]},
            "ready_tolerance": 0.02,
        },
        "safety": {"margin": 0.02, "deadband": 0.05, "saturation": 0.5},
        "ready_pose": {
            "left": {"angles": [0.0] * NUM_JOINTS, "gripper": 1.0},
            "right": {"angles": [0.0] * NUM_JOINTS, "gripper": 1.0},
        },
        "cameras": 3,
        "record_root": "episodes",
    }


_TOP_KEYS = {"arm", "mounts", "leader_scale", "body_capsules", "retarget",
             "gesture", "safety", "ready_pose", "cameras", "record_root"}


def rig_hash(tree):
    """Stable hash of the canonicalized config tree."""
    canonical = json.dumps(tree, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _require(tree, key, context):
    if key not in tree:
        raise RigError("missing key '%s' in %s" % (key, context))
    return tree[key]


def build_rig(tree, record_root=None):
    unknown = set(tree) - _TOP_KEYS
    if unknown:
        raise RigError("unknown key '%s' in rig description" % sorted(unknown)[0])
    missing = _TOP_KEYS - set(tree)
    if missing:
        raise RigError("missing key '%s' in rig description" % sorted(missing)[0])
    try:
        arm = tree["arm"]
        links = tuple(LinkSpec(np.array(l["translation"], dtype=float),
                               np.array(l["rotation"], dtype=float),
                               np.array(l["axis"], dtype=float))
                      for l in _require(arm, "links", "arm"))
        limits = np.array(_require(arm, "joint_limits", "arm"), dtype=float)
        gripper_limits = tuple(_require(arm, "gripper_limits", "arm"))
        capsules = tuple(CapsuleSpec(c["link"], np.array(c["p0"], dtype=float),
                                     np.array(c["p1"], dtype=float), float(c["radius"]))
                         for c in _require(arm, "capsules", "arm"))

        mounts = {}
        for side in ("left", "right"):
            m = _require(tree["mounts"], side, "mounts")
            mounts[side] = RigidTransform(np.array(m["translation"], dtype=float),
                                          np.array(m["rotation"], dtype=float))
        follower_left = ArmModel("follower_left", links, limits, gripper_limits,
                                 mounts["left"], capsules)
        follower_right = ArmModel("follower_right", links, limits, gripper_limits,
                                  mounts["right"], capsules)
        scale = float(tree["leader_scale"])
        leader_left = scale_model(follower_left, scale, "leader_left")
        leader_right = scale_model(follower_right, scale, "leader_right")

        body = tuple(Capsule(np.array(c["p0"], dtype=float), np.array(c["p1"], dtype=float),
                             float(c["radius"]), label="body#%d" % i)
                     for i, c in enumerate(tree["body_capsules"]))

        rt = tree["retarget"]
        retarget_cfg = RetargetConfig(
            np.array(_require(rt, "signs", "retarget"), dtype=float),
            np.array(_require(rt, "offsets", "retarget"), dtype=float),
            float(rt.get("gripper_gain", 1.0)),
            float(rt.get("gripper_bias", 0.0)),
            float(rt.get("smoothing_alpha", 1.0)))

        g = tree["gesture"]
        zone = _require(g, "end_zone", "gesture")
        gesture_cfg = GestureConfig(
            grasp_threshold=float(_require(g, "grasp_threshold", "gesture")),
            hold_duration=float(_require(g, "hold_duration", "gesture")),
            end_zone_min=np.array(zone["min"], dtype=float),
            end_zone_max=np.array(zone["max"], dtype=float),
            transit_duration=float(_require(g, "transit_duration", "gesture")),
            ready_tolerance=float(g.get("ready_tolerance", 0.02)))

        s = tree["safety"]
        safety = SafetyParams(float(_require(s, "margin", "safety")),
                              float(_require(s, "deadband", "safety")),
                              float(_require(s, "saturation", "safety")))

        rp = tree["ready_pose"]
        ready = ReadyPose(
            JointVector(np.array(rp["left"]["angles"], dtype=float), float(rp["left"]["gripper"])),
            JointVector(np.array(rp["right"]["angles"], dtype=float), float(rp["right"]["gripper"])))

        cameras = int(tree["cameras"])
        root = record_root or str(tree["record_root"])
    except RigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise RigError("invalid rig description: %s" % exc) from exc

    return Rig(follower_left, follower_right, leader_left, leader_right, body,
               retarget_cfg, gesture_cfg, safety, ready, scale, cameras, root,
               rig_hash(tree))


def load_rig(path, record_root=None):
    try:
        with open(path) as f:
            tree = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise RigError("cannot parse %s: %s" % (path, exc)) from exc
    except OSError as exc:
        raise RigError(str(exc)) from exc
    if not isinstance(tree, dict):
        raise RigError("rig description must be a mapping")
    return build_rig(tree, record_root=record_root)


def default_rig(record_root=None):
    return build_rig(default_rig_dict(), record_root=record_root)


def write_default_rig(path):
    with open(path, "w") as f:
        yaml.safe_dump(default_rig_dict(), f, sort_keys=False)
