/** Quaternion forward kinematics for the skeleton view: joint positions of
 * one arm given its angles, mount translation and uniform scale. */

import { CHAIN, Vec3 } from "./rigmodel.js";

export type Quat = [number, number, number, number]; // (w, x, y, z)

export function quatMultiply(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function quatFromAxisAngle(axis: Vec3, angle: number): Quat {
  const half = angle / 2;
  const s = Math.sin(half);
  return [Math.cos(half), s * axis[0], s * axis[1], s * axis[2]];
}

export function quatRotate(q: Quat, v: Vec3): Vec3 {
  // v' = v + 2 u x (u x v + w v)
  const [w, x, y, z] = q;
  const [vx, vy, vz] = v;
  const cx = y * vz - z * vy + w * vx;
  const cy = z * vx - x * vz + w * vy;
  const cz = x * vy - y * vx + w * vz;
  return [
    vx + 2 * (y * cz - z * cy),
    vy + 2 * (z * cx - x * cz),
    vz + 2 * (x * cy - y * cx),
  ];
}

function normalize(q: Quat): Quat {
  const n = Math.hypot(...q);
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

/** World positions of the mount plus each joint frame origin (8 points). */
export function fkPoints(angles: number[], mount: Vec3, scale = 1): Vec3[] {
  if (angles.length !== CHAIN.length) {
    throw new Error(`expected ${CHAIN.length} angles, got ${angles.length}`);
  }
  let p: Vec3 = [...mount];
  let q: Quat = [1, 0, 0, 0];
  const points: Vec3[] = [[...p]];
  for (let i = 0; i < CHAIN.length; i++) {
    const t: Vec3 = [
      CHAIN[i].translation[0] * scale,
      CHAIN[i].translation[1] * scale,
      CHAIN[i].translation[2] * scale,
    ];
    const d = quatRotate(q, t);
    p = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
    q = normalize(quatMultiply(q, quatFromAxisAngle(CHAIN[i].axis, angles[i])));
    points.push([...p]);
  }
  return points;
}
