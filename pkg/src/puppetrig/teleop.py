"""Central control node: per tick, read leader states, step the session
machine, retarget, collision-gate, publish follower commands plus operator
feedback, and drive the episode recorder on its 50 Hz grid."""

import numpy as np

from . import bus as busmod
from .bus import ArmJointCommand, JointCommandPayload, SessionEventCode
from .kinematics import JointVector, end_effector_frame
from .recorder import EpisodeRecorder
from .retarget import retarget, retarget_raw_limit_flags, tracking_error
from .safety import (FeedbackCause, FeedbackSignal, check_self_collision,
                     compute_feedback, gate_command)
from .session import (SessionState, StateKind, step as session_step,
                      transit_command, transit_progress)

NS = 1_000_000_000
TICK_RATE = 125
TICK_PERIOD_NS = NS // TICK_RATE
LEADER_STALE_NS = 500_000_000


class TeleopNode:
    def __init__(self, bus, rig, wall_clock_fn=None, labels=None):
        self.bus = bus
        self.rig = rig
        self.wall_clock_fn = wall_clock_fn or (lambda: "1970-01-01T00:00:00")
        self._leader_sub = bus.subscribe(busmod.topic_leader_states(), capacity=256)
        self._follower_sub = bus.subscribe(busmod.topic_follower_states(), capacity=256)
        self._cmd_pub = bus.publisher(busmod.topic_follower_commands())
        self._feedback_pub = bus.publisher(busmod.topic_feedback())
        self._event_pub = bus.publisher(busmod.topic_session_events())
        self.recorder = EpisodeRecorder(
            bus, list(range(rig.cameras)), rig.rig_hash,
            labels or {"task": "", "location": "", "operator": ""}, rig.record_root)

        self.state = SessionState()
        ready = (rig.ready_pose.q_left, rig.ready_pose.q_right)
        self.last_cmd = ready
        self.last_safe = ready
        self._transit_source = ready
        self._transit_target = ready
        self._stop_source = ready
        self._leader = None  # (stamp, (JointVector, JointVector))
        self._follower = None  # (JointVector, JointVector)
        self._pending_episode_id = None
        self._last_checked = None
        self._last_report = None
        self.period_ns = TICK_PERIOD_NS
        self.next_due = 0
        self.episodes_written = []

    def _drain_inputs(self):
        msg = self._leader_sub.latest()
        if msg is not None:
            pair = tuple(JointVector(arm.position, min(1.0, max(0.0, arm.gripper)))
                         for arm in msg.payload.arms[:2])
            self._leader = (msg.stamp, pair)
        msg = self._follower_sub.latest()
        if msg is not None:
            self._follower = tuple(JointVector(
                np.clip(arm.position, m.joint_limits[:, 0], m.joint_limits[:, 1]),
                min(1.0, max(0.0, arm.gripper)))
                for arm, m in zip(msg.payload.arms[:2],
                                  (self.rig.follower_left, self.rig.follower_right)))

    def _followers_at_ready(self):
        if self._follower is None:
            return False
        tol = self.rig.gesture_cfg.ready_tolerance
        ready = (self.rig.ready_pose.q_left, self.rig.ready_pose.q_right)
        return all(np.max(np.abs(f.angles - r.angles)) < tol
                   for f, r in zip(self._follower, ready))

    def _handle_events(self, events, now, leader_pair):
        for ev in events:
            self._event_pub.send(now, ev)
            if ev.code == SessionEventCode.EPISODE_START:
                self._transit_source = self.last_cmd
                self._transit_target = tuple(
                    retarget(self.rig.retarget_cfg, model, q)
                    for model, q in zip((self.rig.follower_left, self.rig.follower_right),
                                        leader_pair))
                self._pending_episode_id = ev.value
            elif ev.code == SessionEventCode.EPISODE_STOP:
                self._stop_source = self.last_cmd
                self.recorder.on_tick(now)  # flush grid points up to the stop stamp
                path = self.recorder.finish("completed")
                if path is not None:
                    self.episodes_written.append(path)
            elif (ev.code == SessionEventCode.STATE_CHANGED
                  and ev.value == int(StateKind.FOLLOWING)
                  and self._pending_episode_id is not None):
                # record grid is anchored where following (and thus recording) begins
                self.recorder.start(self._pending_episode_id, now, self.wall_clock_fn())
                self._pending_episode_id = None

    def _candidate_command(self, now, leader_pair):
        rig = self.rig
        ready = (rig.ready_pose.q_left, rig.ready_pose.q_right)
        kind = self.state.kind
        if kind == StateKind.TRANSIT:
            p = transit_progress(self.state, rig.gesture_cfg, now)
            return transit_command(self._transit_source, self._transit_target, p), False
        if kind == StateKind.STOPPING:
            p = transit_progress(self.state, rig.gesture_cfg, now)
            return transit_command(self._stop_source, ready, p), False
        if kind in (StateKind.FOLLOWING, StateKind.DISARMING):
            cmd = tuple(retarget(rig.retarget_cfg, model, q, prev)
                        for model, q, prev in zip((rig.follower_left, rig.follower_right),
                                                  leader_pair, self.last_cmd))
            return cmd, True
        return ready, False

    def _publish_command(self, now, cmd_pair):
        payload = JointCommandPayload(tuple(ArmJointCommand(q.angles, q.gripper)
                                            for q in cmd_pair))
        self._cmd_pub.send(now, payload)
        self.last_cmd = cmd_pair

    def _publish_feedback(self, now, errors, report, limits_hit):
        fb = compute_feedback(errors, report,limits_hit,
                              self.rig.safety.deadband, self.rig.safety.saturation)
        self._feedback_pub.send(now, fb)
        return fb

    def _tracking_errors(self, cmd_pair):
        if self._follower is None:
            return np.zeros((2, 7))
        return np.stack([tracking_error(c, f)[0] for c, f in zip(cmd_pair, self._follower)])

    def step(self, now):
        self._drain_inputs()
        rig = self.rig

        if self._leader is None or now - self._leader[0] > LEADER_STALE_NS:
            # leader stream missing: hold position, raise a lag signal, keep going
            self._publish_command(now, self.last_cmd)
            fb = compute_feedback(self._tracking_errors(self.last_cmd), None,
                                  np.zeros((2, 7), dtype=bool),
                                  rig.safety.deadband, rig.safety.saturation)
            if fb.cause == FeedbackCause.NONE:
                fb = FeedbackSignal(fb.magnitudes, FeedbackCause.TRACKING_LAG)
            self._feedback_pub.send(now, fb)
            self.recorder.push_status(now, fb.cause, False)
            self.recorder.on_tick(now)
            self.next_due = now + self.period_ns
            return

        leader_pair = self._leader[1]
        if self.state.kind in (StateKind.FOLLOWING, StateKind.DISARMING):
            # only these states look at leader end effectors (end-zone test)
            leader_ee = tuple(end_effector_frame(model, q)
                              for model, q in zip((rig.leader_left, rig.leader_right),
                                                  leader_pair))
        else:
            leader_ee = None

        self.state, events = session_step(self.state, leader_pair, leader_ee,
                                          rig.gesture_cfg, now,
                                          followers_at_ready=self._followers_at_ready())
        self._handle_events(events, now, leader_pair)

        cmd_pair, following = self._candidate_command(now, leader_pair)
        if (self._last_checked is not None
                and cmd_pair[0] is self._last_checked[0]
                and cmd_pair[1] is self._last_checked[1]):
            report = self._last_report  # unchanged candidate (e.g. holding ready)
        else:
            report = check_self_collision(rig, cmd_pair[0], cmd_pair[1], rig.safety.margin)
            self._last_checked = cmd_pair
            self._last_report = report
        out_pair, gated = gate_command(report, cmd_pair, self.last_safe)
        if not gated:
            self.last_safe = out_pair
        self._publish_command(now, out_pair)

        if following:
            limits_hit = np.stack([
                retarget_raw_limit_flags(rig.retarget_cfg, model, q)
                for model, q in zip((rig.follower_left, rig.follower_right), leader_pair)])
        else:
            limits_hit = np.zeros((2, 7), dtype=bool)
        fb = self._publish_feedback(now, self._tracking_errors(out_pair), report, limits_hit)

        self.recorder.push_status(now, fb.cause, gated)
        self.recorder.on_tick(now)
        self.next_due = now + self.period_ns

    def abort(self):
        """Finalize any in-flight episode as aborted."""
        path = self.recorder.finish("aborted")
        if path is not None:
            self.episodes_written.append(path)
        return path
