"""Websocket bridge for the browser operator console.

Mirrors bus traffic to connected clients as JSON text frames
(`{topic, stamp, seq, payload}`), downsampling camera frames to base64
thumbnails at no more than 10 Hz per camera, and injects client leader
setpoints (`{type: "leader_set", arm, angles[7], gripper}`) into the
UI-driven leader device after clamping to the leader model's limits.
Also serves the console's static page when it has been built.
"""

import asyncio
import base64
import json
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, HTMLResponse

from .bus import (CameraFramePayload, JointCommandPayload, JointStatePayload,
                  SessionEventPayload)
from .kinematics import NUM_JOINTS, JointVector
from .safety import FeedbackSignal

CAMERA_MIN_INTERVAL_NS = 100_000_000  # thumbnails at <= 10 Hz per camera
THUMB_MAX_WIDTH = 32
EPISODE_LIST_TOPIC = "/console/episodes"

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>operator console</title></head>
<body><h1>operator console</h1>
<p>The browser console has not been built. Run <code>npm install &amp;&amp;
npm run build</code> in <code>frontend/</code>, then restart with
<code>--ws-port</code>. The websocket endpoint is live at
<code>/ws</code> either way.</p></body></html>
"""


def _arm_state_json(arm):
    return {
        "position": list(arm.position),
        "velocity": list(arm.velocity),
        "effort": list(arm.effort),
        "gripper": arm.gripper,
    }


def _thumbnail(payload, max_width=THUMB_MAX_WIDTH):
    """Stride-downsample a raw RGB8 frame so its width is <= max_width."""
    stride = max(1, -(-payload.width // max_width))  # ceil division
    pixels = np.frombuffer(payload.pixels, dtype=np.uint8)
    pixels = pixels.reshape(payload.height, payload.width, 3)
    thumb = pixels[::stride, ::stride]
    return thumb.shape[1], thumb.shape[0], base64.b64encode(thumb.tobytes()).decode("ascii")


def encode_message(msg, last_camera_sent=None):
    """BusMessage -> JSON text, or None when the message should be skipped."""
    p = msg.payload
    if isinstance(p, JointStatePayload):
        payload = {"kind": "joint_state", "arms": [_arm_state_json(a) for a in p.arms]}
    elif isinstance(p, JointCommandPayload):
        payload = {"kind": "joint_command",
                   "arms": [{"position": list(a.position), "gripper": a.gripper}
                            for a in p.arms]}
    elif isinstance(p, FeedbackSignal):
        payload = {"kind": "feedback", "cause": int(p.cause),
                   "magnitudes": [list(row) for row in p.magnitudes]}
    elif isinstance(p, SessionEventPayload):
        payload = {"kind": "session_event", "code": int(p.code), "value": p.value}
    elif isinstance(p, CameraFramePayload):
        if last_camera_sent is not None:
            last = last_camera_sent.get(p.camera_id)
            if last is not None and msg.stamp - last < CAMERA_MIN_INTERVAL_NS:
                return None
            last_camera_sent[p.camera_id] = msg.stamp
        w, h, b64 = _thumbnail(p)
        payload = {"kind": "camera_frame", "camera_id": p.camera_id,
                   "frame_index": p.frame_index, "width": w, "height": h,
                   "pixels_b64": b64}
    else:
        return None
    return json.dumps({"topic": msg.topic, "stamp": msg.stamp, "seq": msg.seq,
                       "payload": payload})


def parse_leader_set(text, leader_model):
    """Validate and clamp a client frame; returns (arm_index, JointVector) or None."""
    try:
        data = json.loads(text)
        if data.get("type") != "leader_set":
            return None
        arm = int(data["arm"])
        if arm not in (0, 1):
            return None
        angles = np.asarray(data["angles"], dtype=float).reshape(NUM_JOINTS)
        gripper = float(data["gripper"])
    except (ValueError, TypeError, KeyError):
        return None
    if not np.all(np.isfinite(angles)) or not np.isfinite(gripper):
        return None
    angles = np.clip(angles, leader_model.joint_limits[:, 0],
                     leader_model.joint_limits[:, 1])
    return arm, JointVector(angles, min(1.0, max(0.0, gripper)))


def default_static_root():
    return Path(__file__).resolve().parents[2] / "frontend" / "dist"


class ConsoleBridge:
    """Serves the console page and the `/ws` JSON mirror for one stack."""

    def __init__(self, stack, port=8400, host="127.0.0.1", static_root=None):
        self.stack = stack
        self.port = port
        self.host = host
        self.static_root = Path(static_root) if static_root else default_static_root()
        self.malformed_frames = 0
        self.app = self._build_app()
        self._server = None
        self._thread = None

    # --- http / websocket endpoints ---------------------------------------

    def _build_app(self):
        app = FastAPI()

        @app.get("/")
        def index():
            page = self.static_root / "index.html"
            if page.exists():
                return FileResponse(page)
            return HTMLResponse(_FALLBACK_PAGE)

        @app.get("/{name}.js")
        def module_js(name: str):
            module = (self.static_root / (name + ".js")).resolve()
            # refuse path traversal out of the build directory
            if module.parent == self.static_root.resolve() and module.exists():
                return FileResponse(module, media_type="text/javascript")
            return HTMLResponse(_FALLBACK_PAGE, status_code=404)

        @app.websocket("/ws")
        async def ws(socket: WebSocket):
            await self._serve_ws(socket)

        return app

    async def _serve_ws(self, socket):
        await socket.accept()
        sub = self.stack.bus.subscribe_all(capacity=4096)
        stop = asyncio.Event()

        async def reader():
            leaders = (self.stack.rig.leader_left, self.stack.rig.leader_right)
            try:
                while True:
                    text = await socket.receive_text()
                    parsed = parse_leader_set(text, leaders[0])
                    if parsed is None:
                        self.malformed_frames += 1
                        continue
                    arm, q = parsed
                    if arm == 1:
                        parsed = parse_leader_set(text, leaders[1])
                        if parsed is None:
                            self.malformed_frames += 1
                            continue
                        _, q = parsed
                    self.stack.leader.inject(arm, q)
            except WebSocketDisconnect:
                pass
            finally:
                stop.set()

        async def writer():
            last_camera = {}
            last_episode_list = None
            try:
                while not stop.is_set():
                    for msg in sub.drain():
                        text = encode_message(msg, last_camera)
                        if text is not None:
                            await socket.send_text(text)
                    episodes = [str(p) for p in self.stack.teleop.episodes_written]
                    if episodes != last_episode_list:
                        last_episode_list = episodes
                        await socket.send_text(json.dumps(
                            {"topic": EPISODE_LIST_TOPIC, "stamp": 0, "seq": 0,
                             "payload": {"kind": "episodes", "episodes": episodes}}))
                    await asyncio.sleep(0.02)
            except (WebSocketDisconnect, RuntimeError):
                pass

        try:
            await asyncio.gather(reader(), writer())
        finally:
            sub.close()

    # --- lifecycle ---------------------------------------------------------

    def start(self):
        import uvicorn
        config = uvicorn.Config(self.app, host=self.host, port=self.port,
                                log_level="warning")
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)
        self._thread.start()

    def stop(self):
        if self._server is not None:
            self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=5.0)
        self._server = None
        self._thread = None
