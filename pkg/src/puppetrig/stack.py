"""Assembles the full rig: bus, simulated devices, teleop node, recorder.

Two execution modes share the same device objects:
  * virtual  — one thread, event-ordered by stamp, fully deterministic
  * realtime — one pacing thread per device with absolute deadlines
"""

import heapq
import threading
from datetime import datetime, timezone

from . import bus as busmod
from .bus import Bus
from .clockutil import RealClock, VirtualClock
from .simdev import CameraSim, FollowerSim, LeaderSim
from .teleop import TeleopNode

NS = 1_000_000_000

# fixed per-stamp device ordering keeps virtual runs deterministic
_PRIORITY = {"leader": 0, "camera": 1, "teleop": 2, "follower": 3}


class ReplayLeader:
    """Republishes a captured leader message log at its original stamps."""

    def __init__(self, bus, log):
        self._pub = bus.publisher(busmod.topic_leader_states())
        self._log = list(log)  # [(stamp, payload)]
        self._i = 0
        self.period_ns = None
        self.next_due = self._log[0][0] if self._log else None

    def step(self, now):
        while self._i < len(self._log) and self._log[self._i][0] <= now:
            stamp, payload = self._log[self._i]
            self._pub.send(stamp, payload)
            self._i += 1
        self.next_due = self._log[self._i][0] if self._i < len(self._log) else None


class Stack:
    def __init__(self, rig, script=None, seed=0, clock=None, bus=None,
                 capture_leader_log=False, leader_log=None, labels=None):
        self.rig = rig
        self.bus = bus or Bus()
        self.clock = clock or RealClock()
        if self.clock.virtual:
            wall_fn = lambda: "1970-01-01T00:00:00+00:00"
        else:
            wall_fn = lambda: datetime.now(timezone.utc).isoformat()

        ready = (rig.ready_pose.q_left, rig.ready_pose.q_right)
        if leader_log is not None:
            self.leader = ReplayLeader(self.bus, leader_log)
        else:
            self.leader = LeaderSim(self.bus, script=script, initial_pair=ready)
        self.follower = FollowerSim(self.bus, (rig.follower_left, rig.follower_right),
                                    ready, seed=seed)
        self.cameras = [CameraSim(self.bus, cid) for cid in range(rig.cameras)]
        self.teleop = TeleopNode(self.bus, rig, wall_clock_fn=wall_fn, labels=labels)

        self._capture = None
        if capture_leader_log:
            self._capture = self.bus.subscribe(busmod.topic_leader_states(), capacity=1 << 20)
            self.captured_log = []

    def _devices(self):
        out = [("leader", self.leader), ("teleop", self.teleop), ("follower", self.follower)]
        out.extend(("camera", cam) for cam in self.cameras)
        return out

    def _drain_capture(self):
        if self._capture is not None:
            for msg in self._capture.drain():
                self.captured_log.append((msg.stamp, msg.payload))

    def run_virtual(self, duration_s):
        """Deterministic single-thread run for `duration_s` simulated seconds."""
        end = int(round(duration_s * NS))
        heap = []
        for i, (kind, dev) in enumerate(self._devices()):
            if dev.next_due is not None:
                heapq.heappush(heap, (dev.next_due, _PRIORITY[kind], i, kind, dev))
        while heap:
            due, _, i, kind, dev = heapq.heappop(heap)
            if due > end:
                break
            self.clock.advance_to(due)
            dev.step(due)
            if dev.next_due is not None:
                heapq.heappush(heap, (dev.next_due, _PRIORITY[kind], i, kind, dev))
        self._drain_capture()

    def run_realtime(self, duration_s=None, stop_event=None):
        """Deadline-paced threads; blocks until duration elapses or stop is set."""
        stop = stop_event or threading.Event()
        threads = []

        def pace(dev):
            while not stop.is_set():
                due = dev.next_due
                if due is None:
                    return
                self.clock.sleep_until(due)
                if stop.is_set():
                    return
                dev.step(due)

        for _, dev in self._devices():
            t = threading.Thread(target=pace, args=(dev,), daemon=True)
            threads.append(t)
            t.start()
        try:
            if duration_s is not None:
                stop.wait(duration_s)
                stop.set()
            else:
                stop.wait()
        except KeyboardInterrupt:
            stop.set()
            raise
        finally:
            stop.set()
            for t in threads:
                t.join(timeout=2.0)
            self._drain_capture()

    def abort(self):
        return self.teleop.abort()


def make_virtual_stack(rig, script=None, seed=0, **kw):
    return Stack(rig, script=script, seed=seed, clock=VirtualClock(), **kw)
