"""Republish a recorded episode's streams onto a bus, and re-record support
used to verify recorder determinism."""

import tempfile
from pathlib import Path

from . import bus as busmod
from .bus import (ArmJointCommand, ArmJointState, Bus, CameraFramePayload,
                  JointCommandPayload, JointStatePayload)
from .clockutil import RealClock
from .recorder import (NS, RECORD_PERIOD_NS, RECORD_RATE, EpisodeRecorder,
                       read_episode)
from .simdev import CameraSim  # noqa: F401  (re-exported for CLI convenience)

REPLAY_STATE_TOPIC = "/replay/joint_states"
REPLAY_COMMAND_TOPIC = "/replay/joint_commands"


def replay_camera_topic(camera_id):
    return "/replay/camera/%d/frame" % camera_id


def _episode_messages(episode, rebase=True):
    """Flatten an episode into (stamp, topic, payload), ordered by stamp."""
    start = episode.manifest["start_stamp"]
    offset = -start if rebase else 0
    msgs = []
    seen_frames = set()
    for rec in episode.records:
        stamp = start + int(round(rec.t * RECORD_RATE)) * RECORD_PERIOD_NS
        msgs.append((stamp + offset, REPLAY_STATE_TOPIC, JointStatePayload(rec.obs)))
        msgs.append((stamp + offset, REPLAY_COMMAND_TOPIC, JointCommandPayload(rec.action)))
        for ref in rec.frames:
            key = (ref.camera_id, ref.frame_index)
            if key in seen_frames:
                continue
            seen_frames.add(key)
            w, h, pixels = episode.frames[key]
            msgs.append((max(ref.stamp + offset, 0), replay_camera_topic(ref.camera_id),
                         CameraFramePayload(ref.camera_id, ref.frame_index, w, h, pixels)))
    msgs.sort(key=lambda m: m[0])
    return msgs


def replay_episode(bus, episode, speed=1.0, clock=None):
    """Publish the episode streams with stamps rescaled by 1/speed; returns the
    replayed duration in seconds."""
    if speed <= 0:
        raise ValueError("speed must be > 0")
    clock = clock or RealClock()
    pubs = {}

    def pub(topic):
        if topic not in pubs:
            pubs[topic] = bus.publisher(topic)
        return pubs[topic]

    msgs = _episode_messages(episode, rebase=True)
    t0 = clock.now()
    last = 0
    for stamp, topic, payload in msgs:
        scaled = int(stamp / speed)
        clock.sleep_until(t0 + scaled)
        pub(topic).send(t0 + scaled, payload)
        last = scaled
    return last / NS


def rerecord_episode(episode, out_root=None):
    """Feed an episode's streams back through a fresh recorder on the same grid.

    Returns the re-read episode; used to check replay determinism.
    """
    manifest = episode.manifest
    bus = Bus()
    labels = {k: manifest.get(k, "") for k in ("task", "location", "operator")}
    recorder = EpisodeRecorder(bus, manifest["cameras"], manifest["rig_hash"],
                               labels, out_root or tempfile.mkdtemp(prefix="rerecord-"))
    state_pub = bus.publisher(busmod.topic_follower_states())
    cmd_pub = bus.publisher(busmod.topic_follower_commands())
    cam_pubs = {cid: bus.publisher(busmod.topic_camera(cid)) for cid in manifest["cameras"]}

    start = manifest["start_stamp"]
    seen_frames = set()
    events = []
    for rec in episode.records:
        stamp = start + int(round(rec.t * RECORD_RATE)) * RECORD_PERIOD_NS
        for ref in rec.frames:
            key = (ref.camera_id, ref.frame_index)
            if key not in seen_frames:
                seen_frames.add(key)
                w, h, pixels = episode.frames[key]
                events.append((ref.stamp, "frame",
                               CameraFramePayload(ref.camera_id, ref.frame_index, w, h, pixels)))
        events.append((stamp, "state", JointStatePayload(rec.obs)))
        events.append((stamp, "cmd", JointCommandPayload(rec.action)))
        events.append((stamp, "status", (rec.feedback_cause, rec.gated)))
    events.sort(key=lambda e: (e[0], e[1] != "frame"))

    recorder.start(manifest["episode_id"], start, manifest["wall_clock_start"])
    for stamp, kind, payload in events:
        if kind == "state":
            state_pub.send(stamp, payload)
        elif kind == "cmd":
            cmd_pub.send(stamp, payload)
        elif kind == "frame":
            cam_pubs[payload.camera_id].send(stamp, payload)
        else:
            recorder.push_status(stamp, *payload)
        recorder.pump()  # keep the bounded queues from overflowing
    end_stamp = start + max(len(episode.records) - 1, 0) * RECORD_PERIOD_NS
    recorder.on_tick(end_stamp)
    path = recorder.finish(manifest.get("status", "completed"))
    return read_episode(path)
