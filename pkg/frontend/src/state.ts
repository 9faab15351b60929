/** Latest-value store decoupling message ingestion from the render loop. */

import type {
  ArmStateJson,
  BridgeMessage,
  CameraFramePayload,
  FeedbackPayload,
} from "./protocol.js";

export const SESSION_STATE_NAMES = [
  "Idle",
  "Ready",
  "Arming",
  "Transit",
  "Following",
  "Disarming",
  "Stopping",
];

export const EVENT_EPISODE_START = 1;
export const EVENT_EPISODE_STOP = 2;
export const EVENT_STATE_CHANGED = 3;

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface ConsoleState {
  connection: ConnectionStatus;
  sessionState: number; // StateKind ordinal; banner always shows the last StateChanged
  lastEpisodeId: number | null;
  followers: ArmStateJson[] | null;
  commands: { position: number[]; gripper: number }[] | null;
  feedback: FeedbackPayload | null;
  cameras: Map<number, CameraFramePayload>;
  episodes: string[];
  malformed: number;
}

export function initialState(): ConsoleState {
  return {
    connection: "connecting",
    sessionState: 0,
    lastEpisodeId: null,
    followers: null,
    commands: null,
    feedback: null,
    cameras: new Map(),
    episodes: [],
    malformed: 0,
  };
}

export function sessionStateName(state: ConsoleState): string {
  return SESSION_STATE_NAMES[state.sessionState] ?? `state ${state.sessionState}`;
}

/** Fold one parsed bridge message into the store (mutates in place). */
export function applyMessage(state: ConsoleState, msg: BridgeMessage): void {
  const p = msg.payload;
  switch (p.kind) {
    case "joint_state":
      state.followers = p.arms;
      break;
    case "joint_command":
      state.commands = p.arms;
      break;
    case "feedback":
      state.feedback = p;
      break;
    case "session_event":
      if (p.code === EVENT_STATE_CHANGED && p.value !== null) {
        state.sessionState = p.value;
      } else if (p.code === EVENT_EPISODE_START) {
        state.lastEpisodeId = p.value;
      }
      break;
    case "camera_frame":
      state.cameras.set(p.camera_id, p);
      break;
    case "episodes":
      state.episodes = p.episodes;
      break;
  }
}

/** Hold-to-grasp control for one arm's gripper button.
 *
 * While held, the emitted gripper aperture is 0 (grasped); released, 1.
 * `holdProgress` exposes how far the hold is toward the rig's 1 s gesture
 * so the banner can show an arming progress bar.
 */
export class GraspControl {
  private heldSince: number | null = null;

  constructor(private holdDurationMs = 1000) {}

  press(nowMs: number): void {
    if (this.heldSince === null) this.heldSince = nowMs;
  }

  release(): void {
    this.heldSince = null;
  }

  get held(): boolean {
    return this.heldSince !== null;
  }

  /** Aperture to send: hold-to-grasp maps held -> closed (0), idle -> open (1). */
  gripper(): number {
    return this.heldSince === null ? 1.0 : 0.0;
  }

  /** Fraction of the gesture hold completed, in [0, 1]. */
  holdProgress(nowMs: number): number {
    if (this.heldSince === null) return 0;
    return Math.min(1, (nowMs - this.heldSince) / this.holdDurationMs);
  }
}
