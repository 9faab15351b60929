/** Browser entry point: websocket wiring, sliders, grasp buttons, skeleton
 * canvas, feedback bars, session banner and episode list. */

import { fkPoints } from "./kinematics.js";
import {
  BridgeMessage,
  FEEDBACK_CAUSES,
  NUM_JOINTS,
  encodeLeaderSet,
  parseMessage,
} from "./protocol.js";
import { JOINT_LIMITS, MOUNTS, Vec3 } from "./rigmodel.js";
import { skeletonPolyline, View, Viewport } from "./skeleton.js";
import {
  ConsoleState,
  GraspControl,
  applyMessage,
  initialState,
  sessionStateName,
} from "./state.js";

const SEND_INTERVAL_MS = 20; // setpoint stream at 50 Hz
const state: ConsoleState = initialState();
const setpoints: { angles: number[]; grasp: GraspControl }[] = [
  { angles: new Array(NUM_JOINTS).fill(0), grasp: new GraspControl() },
  { angles: new Array(NUM_JOINTS).fill(0), grasp: new GraspControl() },
];
let lastFeedbackLatencyMs: number | null = null;
let lastSendMs: number | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function connect(): WebSocket {
  const url = `ws://${location.host}/ws`;
  const socket = new WebSocket(url);
  socket.onopen = () => {
    state.connection = "connected";
  };
  socket.onclose = () => {
    state.connection = "disconnected";
    setTimeout(() => {
      ws = connect();
    }, 1000);
  };
  socket.onmessage = (event: MessageEvent) => {
    const msg: BridgeMessage | null = parseMessage(String(event.data));
    if (msg === null) {
      state.malformed += 1;
      return;
    }
    if (msg.payload.kind === "feedback" && lastSendMs !== null) {
      lastFeedbackLatencyMs = performance.now() - lastSendMs;
      lastSendMs = null;
    }
    applyMessage(state, msg);
  };
  return socket;
}

let ws = connect();

function sendSetpoints(): void {
  if (state.connection !== "connected" || ws.readyState !== WebSocket.OPEN) return;
  for (const arm of [0, 1] as const) {
    const sp = setpoints[arm];
    ws.send(encodeLeaderSet(arm, sp.angles, sp.grasp.gripper(), JOINT_LIMITS));
  }
  lastSendMs = performance.now();
}

function buildSliders(): void {
  for (const arm of [0, 1] as const) {
    const host = el<HTMLDivElement>(`sliders-${arm}`);
    for (let j = 0; j < NUM_JOINTS; j++) {
      const row = document.createElement("label");
      row.className = "slider-row";
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = String(JOINT_LIMITS[j][0]);
      slider.max = String(JOINT_LIMITS[j][1]);
      slider.step = "0.01";
      slider.value = "0";
      slider.oninput = () => {
        setpoints[arm].angles[j] = Number(slider.value);
      };
      row.append(`j${j + 1}`, slider);
      host.append(row);
    }
    const grasp = el<HTMLButtonElement>(`grasp-${arm}`);
    grasp.onpointerdown = () => setpoints[arm].grasp.press(performance.now());
    grasp.onpointerup = () => setpoints[arm].grasp.release();
    grasp.onpointerleave = () => setpoints[arm].grasp.release();
  }
}

function drawView(canvas: HTMLCanvasElement, view: View): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const vp: Viewport = {
    width: canvas.width,
    height: canvas.height,
    worldHalfExtent: 1.1,
  };
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "10px sans-serif";
  ctx.fillStyle = "#888";
  ctx.fillText(view, 4, 12);
  const arms: { angles: number[]; mount: Vec3; color: string }[] = [];
  if (state.followers) {
    arms.push(
      { angles: state.followers[0].position, mount: MOUNTS.left, color: "#2a7" },
      { angles: state.followers[1].position, mount: MOUNTS.right, color: "#27a" },
    );
  }
  for (const arm of arms) {
    const pts = skeletonPolyline(fkPoints(arm.angles, arm.mount), view, vp);
    ctx.strokeStyle = arm.color;
    ctx.lineWidth = 3;
    ctx.beginPath();
    pts.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
    ctx.stroke();
    for (const [x, y] of pts) {
      ctx.beginPath();
      ctx.arc(x, y, 3, 0, 2 * Math.PI);
      ctx.fillStyle = arm.color;
      ctx.fill();
    }
  }
}

function renderFeedback(): void {
  const bars = el<HTMLDivElement>("feedback-bars");
  const label = el<HTMLSpanElement>("feedback-cause");
  if (!state.feedback) {
    label.textContent = "—";
    return;
  }
  label.textContent = FEEDBACK_CAUSES[state.feedback.cause] ?? "?";
  label.className = state.feedback.cause === 0 ? "ok" : "alert";
  const rows = state.feedback.magnitudes
    .map(
      (row, arm) =>
        `<div class="bar-row">arm ${arm}: ${row
          .map((m) => `<span class="bar" style="width:${Math.round(m * 40)}px"></span>`)
          .join("")}</div>`,
    )
    .join("");
  bars.innerHTML = rows;
}

function renderCameras(): void {
  const host = el<HTMLDivElement>("cameras");
  for (const [id, frame] of state.cameras) {
    let img = document.getElementById(`cam-${id}`) as HTMLCanvasElement | null;
    if (!img) {
      img = document.createElement("canvas");
      img.id = `cam-${id}`;
      img.width = frame.width;
      img.height = frame.height;
      img.className = "camera";
      host.append(img);
    }
    const ctx = img.getContext("2d");
    if (!ctx) continue;
    const raw = atob(frame.pixels_b64);
    const image = ctx.createImageData(frame.width, frame.height);
    for (let i = 0; i < frame.width * frame.height; i++) {
      image.data[4 * i] = raw.charCodeAt(3 * i);
      image.data[4 * i + 1] = raw.charCodeAt(3 * i + 1);
      image.data[4 * i + 2] = raw.charCodeAt(3 * i + 2);
      image.data[4 * i + 3] = 255;
    }
    ctx.putImageData(image, 0, 0);
  }
}

function render(): void {
  el<HTMLSpanElement>("connection").textContent = state.connection;
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = sessionStateName(state);
  banner.dataset.state = sessionStateName(state);
  const hold = Math.max(
    setpoints[0].grasp.holdProgress(performance.now()),
    setpoints[1].grasp.holdProgress(performance.now()),
  );
  el<HTMLDivElement>("hold-progress").style.width = `${Math.round(hold * 100)}%`;
  el<HTMLSpanElement>("latency").textContent =
    lastFeedbackLatencyMs === null ? "—" : `${lastFeedbackLatencyMs.toFixed(0)} ms`;
  drawView(el<HTMLCanvasElement>("view-top"), "top");
  drawView(el<HTMLCanvasElement>("view-side"), "side");
  renderFeedback();
  renderCameras();
  el<HTMLUListElement>("episodes").innerHTML = state.episodes
    .map((e) => `<li>${e}</li>`)
    .join("");
  requestAnimationFrame(render);
}

buildSliders();
setInterval(sendSetpoints, SEND_INTERVAL_MS);
requestAnimationFrame(render);
