/** Websocket JSON protocol shared with the bridge: message parsing,
 * client-side clamping, and leader setpoint encoding. */

export const NUM_JOINTS = 7;

export interface ArmStateJson {
  position: number[];
  velocity: number[];
  effort: number[];
  gripper: number;
}

export interface JointStatePayload {
  kind: "joint_state";
  arms: ArmStateJson[];
}

export interface JointCommandPayload {
  kind: "joint_command";
  arms: { position: number[]; gripper: number }[];
}

export interface FeedbackPayload {
  kind: "feedback";
  cause: number;
  magnitudes: number[][];
}

export interface SessionEventPayload {
  kind: "session_event";
  code: number;
  value: number | null;
}

export interface CameraFramePayload {
  kind: "camera_frame";
  camera_id: number;
  frame_index: number;
  width: number;
  height: number;
  pixels_b64: string;
}

export interface EpisodesPayload {
  kind: "episodes";
  episodes: string[];
}

export type Payload =
  | JointStatePayload
  | JointCommandPayload
  | FeedbackPayload
  | SessionEventPayload
  | CameraFramePayload
  | EpisodesPayload;

export interface BridgeMessage {
  topic: string;
  stamp: number;
  seq: number;
  payload: Payload;
}

export const FEEDBACK_CAUSES = ["None", "Collision", "JointLimit", "TrackingLag"];

function isNumberArray(x: unknown, length?: number): x is number[] {
  return (
    Array.isArray(x) &&
    (length === undefined || x.length === length) &&
    x.every((v) => typeof v === "number" && Number.isFinite(v))
  );
}

function validArmState(a: unknown): a is ArmStateJson {
  const arm = a as ArmStateJson;
  return (
    !!arm &&
    isNumberArray(arm.position, NUM_JOINTS) &&
    isNumberArray(arm.velocity, NUM_JOINTS) &&
    isNumberArray(arm.effort, NUM_JOINTS) &&
    typeof arm.gripper === "number"
  );
}

function validPayload(p: unknown): p is Payload {
  const payload = p as { kind?: unknown };
  if (!payload || typeof payload.kind !== "string") return false;
  switch (payload.kind) {
    case "joint_state": {
      const js = p as JointStatePayload;
      return Array.isArray(js.arms) && js.arms.length === 2 && js.arms.every(validArmState);
    }
    case "joint_command": {
      const jc = p as JointCommandPayload;
      return (
        Array.isArray(jc.arms) &&
        jc.arms.length === 2 &&
        jc.arms.every(
          (a) => isNumberArray(a.position, NUM_JOINTS) && typeof a.gripper === "number",
        )
      );
    }
    case "feedback": {
      const fb = p as FeedbackPayload;
      return (
        typeof fb.cause === "number" &&
        Array.isArray(fb.magnitudes) &&
        fb.magnitudes.length === 2 &&
        fb.magnitudes.every((row) => isNumberArray(row, NUM_JOINTS))
      );
    }
    case "session_event": {
      const ev = p as SessionEventPayload;
      return typeof ev.code === "number" && (ev.value === null || typeof ev.value === "number");
    }
    case "camera_frame": {
      const cf = p as CameraFramePayload;
      return (
        typeof cf.camera_id === "number" &&
        typeof cf.frame_index === "number" &&
        typeof cf.width === "number" &&
        typeof cf.height === "number" &&
        typeof cf.pixels_b64 === "string"
      );
    }
    case "episodes": {
      const ep = p as EpisodesPayload;
      return Array.isArray(ep.episodes) && ep.episodes.every((e) => typeof e === "string");
    }
    default:
      return false;
  }
}

/** Parse one websocket text frame; malformed frames yield null. */
export function parseMessage(text: string): BridgeMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch {
    return null;
  }
  const msg = data as BridgeMessage;
  if (
    !msg ||
    typeof msg.topic !== "string" ||
    typeof msg.stamp !== "number" ||
    typeof msg.seq !== "number" ||
    !validPayload(msg.payload)
  ) {
    return null;
  }
  return msg;
}

export type JointLimits = [number, number][]; // [lower, upper] per joint

export function clampAngles(angles: number[], limits: JointLimits): number[] {
  return angles.map((a, i) => Math.min(limits[i][1], Math.max(limits[i][0], a)));
}

export function clampGripper(g: number): number {
  return Math.min(1, Math.max(0, g));
}

/** Leader setpoint frame, clamped client-side before it leaves the console. */
export function encodeLeaderSet(
  arm: 0 | 1,
  angles: number[],
  gripper: number,
  limits: JointLimits,
): string {
  if (angles.length !== NUM_JOINTS) {
    throw new Error(`expected ${NUM_JOINTS} joint angles, got ${angles.length}`);
  }
  return JSON.stringify({
    type: "leader_set",
    arm,
    angles: clampAngles(angles, limits),
    gripper: clampGripper(gripper),
  });
}
