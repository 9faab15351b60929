/** Client-side copy of the default rig's kinematic constants, used for
 * slider limits and the skeleton visualization. Kept in sync with the
 * shipped rig description (configs/default_rig.yaml). */

import type { JointLimits } from "./protocol.js";

export type Vec3 = [number, number, number];

export interface LinkDef {
  translation: Vec3;
  axis: Vec3;
}

export const CHAIN: LinkDef[] = [
  { translation: [0.0, 0.0, 0.1], axis: [0, 0, 1] },
  { translation: [0.0, 0.0, 0.05], axis: [0, 1, 0] },
  { translation: [0.15, 0.0, 0.0], axis: [1, 0, 0] },
  { translation: [0.15, 0.0, 0.0], axis: [0, 1, 0] },
  { translation: [0.13, 0.0, 0.0], axis: [1, 0, 0] },
  { translation: [0.12, 0.0, 0.0], axis: [0, 1, 0] },
  { translation: [0.094, 0.0, 0.0], axis: [1, 0, 0] },
];

export const JOINT_LIMITS: JointLimits = [
  [-Math.PI, Math.PI],
  [-Math.PI, Math.PI],
  [-Math.PI, Math.PI],
  [-2.6, 2.6],
  [-Math.PI, Math.PI],
  [-Math.PI, Math.PI],
  [-Math.PI, Math.PI],
];

export const LEADER_SCALE = 0.8;

export const MOUNTS: { left: Vec3; right: Vec3 } = {
  left: [0.0, 0.25, 0.0],
  right: [0.0, -0.25, 0.0],
};

/** Summed link translation magnitudes: the follower's reach in meters. */
export const FOLLOWER_REACH = CHAIN.reduce(
  (acc, link) => acc + Math.hypot(...link.translation),
  0,
);
