"""Multi-rate synchronization and episode persistence.

Joint states arrive at 125 Hz, camera frames at 30 Hz, commands per teleop
tick; records are emitted on an exact 50 Hz grid anchored at the start stamp
using zero-order hold (latest sample at or before the grid stamp).

Episode layout on disk:
  <root>/<episode_id>/manifest.json
  <root>/<episode_id>/records.tbr   "TBR1" magic, count u64, fixed records
  <root>/<episode_id>/frames.tbf    "TBF1" magic, count u64, then per frame
                                    camera u8, index u64, w u16, h u16,
                                    len u32, raw RGB8 pixels
"""

import bisect
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bus import ArmJointCommand, ArmJointState

NS = 1_000_000_000
RECORD_RATE = 50
RECORD_PERIOD_NS = NS // RECORD_RATE
STALE_STATE_NS = 100_000_000  # joint state older than this flags the record

RECORDS_MAGIC = b"TBR1"
FRAMES_MAGIC = b"TBF1"
FORMAT_VERSION = 1
_FRAME_HEADER = struct.Struct("<BQHHI")

# t | 2 arms x (7 pos, 7 vel, 7 eff, gripper) | 2 arms x (7 cmd, gripper)
# | 3 frame refs (camera u8, index u64, stamp u64) | cause u8 | gated u8
_RECORD = struct.Struct("<61d" + "BQQ" * 3 + "BB")


class EpisodeReadError(Exception):
    pass


class MissingManifest(EpisodeReadError):
    pass


class ChecksumMismatch(EpisodeReadError):
    pass


class TruncatedRecords(EpisodeReadError):
    pass


class DanglingFrameReference(EpisodeReadError):
    pass


@dataclass(frozen=True)
class FrameRef:
    camera_id: int
    frame_index: int
    stamp: int


@dataclass(frozen=True)
class EpisodeRecord:
    t: float  # seconds since episode start, exact 0.02 s grid
    obs: tuple  # (ArmJointState, ArmJointState)
    action: tuple  # (ArmJointCommand, ArmJointCommand)
    frames: tuple  # 3 x FrameRef
    feedback_cause: int = 0
    gated: bool = False


@dataclass
class Episode:
    manifest: dict
    records: list
    frames: dict = field(default_factory=dict)  # (camera_id, frame_index) -> (w, h, bytes)


class StreamBuffer:
    """Append-only timestamped samples with monotone stamps and latest-<= lookup."""

    def __init__(self):
        self.stamps = []
        self.values = []

    def append(self, stamp, value):
        if self.stamps and stamp < self.stamps[-1]:
            raise ValueError("stream stamps must be non-decreasing")
        self.stamps.append(stamp)
        self.values.append(value)

    def latest_at(self, stamp):
        """(stamp, value) of the newest sample at or before `stamp`, else None."""
        i = bisect.bisect_right(self.stamps, stamp)
        if i == 0:
            return None
        return self.stamps[i - 1], self.values[i - 1]

    def trim_before(self, stamp, keep=2):
        """Drop samples older than `stamp` except the last `keep` of them."""
        i = max(0, bisect.bisect_right(self.stamps, stamp) - keep)
        if i:
            del self.stamps[:i]
            del self.values[:i]

    def __len__(self):
        return len(self.stamps)


def grid_time(k):
    """Episode time of grid index k, reproducible bit-exactly."""
    return (k * RECORD_PERIOD_NS) / NS


def synchronize(tick_stamp, t, state_streams, cmd_streams, frame_streams, status_stream=None):
    """Build one record at `tick_stamp` by zero-order hold over the input streams.

    Returns (record, stale) or (None, False) when some stream has no sample yet.
    stale is set when the newest joint-state sample lags more than 100 ms.
    """
    obs = []
    stale = False
    for stream in state_streams:
        hit = stream.latest_at(tick_stamp)
        if hit is None:
            return None, False
        stamp, value = hit
        if tick_stamp - stamp > STALE_STATE_NS:
            stale = True
        obs.append(value)
    action = []
    for stream in cmd_streams:
        hit = stream.latest_at(tick_stamp)
        if hit is None:
            return None, False
        action.append(hit[1])
    frames = []
    for stream in frame_streams:
        hit = stream.latest_at(tick_stamp)
        if hit is None:
            return None, False
        stamp, payload = hit
        frames.append(FrameRef(payload.camera_id, payload.frame_index, stamp))
    cause, gated = 0, False
    if status_stream is not None:
        hit = status_stream.latest_at(tick_stamp)
        if hit is not None:
            cause, gated = hit[1]
    record = EpisodeRecord(t, tuple(obs), tuple(action), tuple(frames), int(cause), bool(gated))
    return record, stale


def _pack_record(rec):
    doubles = [rec.t]
    for arm in rec.obs:
        doubles.extend(arm.position)
        doubles.extend(arm.velocity)
        doubles.extend(arm.effort)
        doubles.append(arm.gripper)
    for arm in rec.action:
        doubles.extend(arm.position)
        doubles.append(arm.gripper)
    tail = []
    for ref in rec.frames:
        tail.extend((ref.camera_id, ref.frame_index, ref.stamp))
    tail.extend((rec.feedback_cause, 1 if rec.gated else 0))
    return _RECORD.pack(*doubles, *tail)


def _unpack_record(buf, offset):
    vals = _RECORD.unpack_from(buf, offset)
    t = vals[0]
    obs = []
    off = 1
    for _ in range(2):
        pos = np.array(vals[off:off + 7])
        vel = np.array(vals[off + 7:off + 14])
        eff = np.array(vals[off + 14:off + 21])
        grip = vals[off + 21]
        obs.append(ArmJointState(pos, vel, eff, grip))
        off += 22
    action = []
    for _ in range(2):
        action.append(ArmJointCommand(np.array(vals[off:off + 7]), vals[off + 7]))
        off += 8
    frames = []
    for _ in range(3):
        frames.append(FrameRef(vals[off], vals[off + 1], vals[off + 2]))
        off += 3
    cause, gated = vals[off], vals[off + 1]
    return EpisodeRecord(t, tuple(obs), tuple(action), tuple(frames), cause, bool(gated))


def write_episode(episode, root):
    """Persist an episode; read_episode(write_episode(e)) is bit-exact."""
    root = Path(root)
    ep_dir = root / ("%06d" % episode.manifest["episode_id"])
    ep_dir.mkdir(parents=True, exist_ok=True)

    body = bytearray(RECORDS_MAGIC)
    body += struct.pack("<Q", len(episode.records))
    for rec in episode.records:
        body += _pack_record(rec)
    records_bytes = bytes(body)
    (ep_dir / "records.tbr").write_bytes(records_bytes)

    manifest = dict(episode.manifest)
    manifest["format_version"] = FORMAT_VERSION
    manifest["records_crc32"] = zlib.crc32(records_bytes)
    manifest["record_count"] = len(episode.records)
    (ep_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))

    blob = bytearray(FRAMES_MAGIC)
    blob += struct.pack("<Q", len(episode.frames))
    for (camera_id, frame_index) in sorted(episode.frames):
        w, h, pixels = episode.frames[(camera_id, frame_index)]
        blob += _FRAME_HEADER.pack(camera_id, frame_index, w, h, len(pixels))
        blob += pixels
    (ep_dir / "frames.tbf").write_bytes(bytes(blob))
    return ep_dir


def read_episode(path):
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise MissingManifest(str(manifest_path))
    manifest = json.loads(manifest_path.read_text())

    records_bytes = (path / "records.tbr").read_bytes() if (path / "records.tbr").exists() else b""
    if manifest.get("records_crc32") != zlib.crc32(records_bytes):
        raise ChecksumMismatch(str(path))
    if len(records_bytes) < len(RECORDS_MAGIC) + 8 or records_bytes[:4] != RECORDS_MAGIC:
        raise TruncatedRecords("bad records header")
    (count,) = struct.unpack_from("<Q", records_bytes, 4)
    expected = len(RECORDS_MAGIC) + 8 + count * _RECORD.size
    if len(records_bytes) != expected:
        raise TruncatedRecords("expected %d bytes, got %d" % (expected, len(records_bytes)))
    records = [_unpack_record(records_bytes, len(RECORDS_MAGIC) + 8 + i * _RECORD.size)
               for i in range(count)]

    frames = {}
    frames_path = path / "frames.tbf"
    if frames_path.exists():
        blob = frames_path.read_bytes()
        if len(blob) < len(FRAMES_MAGIC) + 8 or blob[:4] != FRAMES_MAGIC:
            raise TruncatedRecords("bad frames header")
        (n_frames,) = struct.unpack_from("<Q", blob, 4)
        off = len(FRAMES_MAGIC) + 8
        for _ in range(n_frames):
            if off + _FRAME_HEADER.size > len(blob):
                raise TruncatedRecords("truncated frame entry header")
            camera_id, frame_index, w, h, n = _FRAME_HEADER.unpack_from(blob, off)
            off += _FRAME_HEADER.size
            if off + n > len(blob):
                raise TruncatedRecords("truncated frame pixel data")
            frames[(camera_id, frame_index)] = (w, h, blob[off:off + n])
            off += n
        if off != len(blob):
            raise TruncatedRecords("trailing bytes after frame data")

    for rec in records:
        for ref in rec.frames:
            if (ref.camera_id, ref.frame_index) not in frames:
                raise DanglingFrameReference("camera %d frame %d" % (ref.camera_id, ref.frame_index))
    return Episode(manifest, records, frames)


@dataclass(frozen=True)
class Violation:
    kind: str
    index: int
    detail: str


def validate_episode(episode, rig=None):
    """Structural checks; an empty list means the episode is clean."""
    violations = []
    start_stamp = episode.manifest.get("start_stamp", 0)
    prev_t = None
    for i, rec in enumerate(episode.records):
        k = int(round(rec.t * RECORD_RATE))
        if rec.t != grid_time(k) or rec.t < 0:
            violations.append(Violation("GridViolation", i, "t=%r off the 50 Hz grid" % rec.t))
        elif prev_t is not None and int(round(prev_t * RECORD_RATE)) + 1 != k:
            violations.append(Violation("GridViolation", i, "grid gap before t=%r" % rec.t))
        if prev_t is not None and rec.t <= prev_t:
            violations.append(Violation("NonMonotonicTime", i, "t=%r after %r" % (rec.t, prev_t)))
        prev_t = rec.t

        record_stamp = start_stamp + k * RECORD_PERIOD_NS
        for ref in rec.frames:
            if (ref.camera_id, ref.frame_index) not in episode.frames:
                violations.append(Violation("DanglingFrame", i,
                                            "camera %d frame %d" % (ref.camera_id, ref.frame_index)))
            if ref.stamp > record_stamp:
                violations.append(Violation("CausalityViolation", i,
                                            "frame stamp %d after record stamp %d" % (ref.stamp, record_stamp)))
        for arm in rec.action:
            if not np.all(np.isfinite(arm.position)) or not np.isfinite(arm.gripper):
                violations.append(Violation("NonFiniteAction", i, "non-finite command"))
        if rig is not None:
            tol = 1e-9
            for arm_state, model in zip(rec.obs, (rig.follower_left, rig.follower_right)):
                lo = model.joint_limits[:, 0] - tol
                hi = model.joint_limits[:, 1] + tol
                if not np.all((arm_state.position >= lo) & (arm_state.position <= hi)):
                    violations.append(Violation("LimitViolation", i, "observation outside joint limits"))
    return violations


class EpisodeRecorder:
    """Consumes bus streams and emits 50 Hz grid records while an episode is live."""

    def __init__(self, bus, camera_ids, rig_hash, labels, root):
        from . import bus as busmod
        self.root = Path(root)
        self.rig_hash = rig_hash
        self.labels = dict(labels)
        self.camera_ids = list(camera_ids)
        self._state_sub = bus.subscribe(busmod.topic_follower_states(), capacity=512)
        self._cmd_sub = bus.subscribe(busmod.topic_follower_commands(), capacity=512)
        self._frame_subs = [bus.subscribe(busmod.topic_camera(cid), capacity=128)
                            for cid in self.camera_ids]
        self._states = [StreamBuffer(), StreamBuffer()]
        self._cmds = [StreamBuffer(), StreamBuffer()]
        self._frames = [StreamBuffer() for _ in self.camera_ids]
        self._status = StreamBuffer()
        self._frame_store = {}  # (camera_id, frame_index) -> (w, h, pixels)
        self.active = None
        self.stale_ticks = 0
        self.skipped_ticks = 0

    def push_status(self, stamp, cause, gated):
        self._status.append(stamp, (int(cause), bool(gated)))

    def pump(self):
        """Drain bus subscriptions into the stream buffers."""
        for msg in self._state_sub.drain():
            for i, arm in enumerate(msg.payload.arms[:2]):
                self._states[i].append(msg.stamp, arm)
        for msg in self._cmd_sub.drain():
            for i, arm in enumerate(msg.payload.arms[:2]):
                self._cmds[i].append(msg.stamp, arm)
        for buf, sub in zip(self._frames, self._frame_subs):
            for msg in sub.drain():
                p = msg.payload
                buf.append(msg.stamp, p)
                self._frame_store[(p.camera_id, p.frame_index)] = (p.width, p.height, p.pixels)

    def start(self, episode_id, start_stamp, wall_clock_iso):
        self.active = {
            "episode_id": episode_id,
            "start_stamp": start_stamp,
            "wall_clock_start": wall_clock_iso,
            "records": [],
            "next_k": 0,
        }
        self.stale_ticks = 0
        self.skipped_ticks = 0

    def on_tick(self, tick_stamp):
        """Emit records for every grid stamp at or before tick_stamp."""
        self.pump()
        if self.active is None:
            self._trim(tick_stamp)
            return
        ep = self.active
        while ep["start_stamp"] + ep["next_k"] * RECORD_PERIOD_NS <= tick_stamp:
            k = ep["next_k"]
            grid_stamp = ep["start_stamp"] + k * RECORD_PERIOD_NS
            record, stale = synchronize(grid_stamp, grid_time(k), self._states,
                                        self._cmds, self._frames, self._status)
            if record is None:
                self.skipped_ticks += 1
            else:
                if stale:
                    self.stale_ticks += 1
                ep["records"].append(record)
            ep["next_k"] = k + 1

    def finish(self, status="completed"):
        """Close the active episode, write it to disk and return its path."""
        ep = self.active
        self.active = None
        if ep is None:
            return None
        referenced = set()
        for rec in ep["records"]:
            for ref in rec.frames:
                referenced.add((ref.camera_id, ref.frame_index))
        frames = {key: self._frame_store[key] for key in referenced if key in self._frame_store}
        manifest = {
            "episode_id": ep["episode_id"],
            "wall_clock_start": ep["wall_clock_start"],
            "start_stamp": ep["start_stamp"],
            "rig_hash": self.rig_hash,
            "status": status,
            "stale_ticks": self.stale_ticks,
            "skipped_ticks": self.skipped_ticks,
            "cameras": self.camera_ids,
        }
        manifest.update(self.labels)
        episode = Episode(manifest, ep["records"], frames)
        return write_episode(episode, self.root)

    def _trim(self, now):
        horizon = now - 2 * NS
        for buf in (*self._states, *self._cmds, *self._frames, self._status):
            buf.trim_before(horizon)
        live = {(p.camera_id, p.frame_index)
                for buf in self._frames for p in buf.values}
        for key in list(self._frame_store):
            if key not in live:
                del self._frame_store[key]
