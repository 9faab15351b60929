/** 2D orthographic projections of the dual-arm skeleton (top and side). */

import type { Vec3 } from "./rigmodel.js";

export type View = "top" | "side";

export interface Viewport {
  width: number;
  height: number;
  /** World half-extent mapped to the smaller viewport half-dimension. */
  worldHalfExtent: number;
}

/** Project one 3D point: top view is (x, y), side view is (x, z). */
export function projectPoint(p: Vec3, view: View): [number, number] {
  return view === "top" ? [p[0], p[1]] : [p[0], p[2]];
}

/** Map world coordinates to pixel coordinates, y-up to y-down, centered. */
export function toPixels(
  [u, v]: [number, number],
  vp: Viewport,
): [number, number] {
  const s = Math.min(vp.width, vp.height) / (2 * vp.worldHalfExtent);
  return [vp.width / 2 + u * s, vp.height / 2 - v * s];
}

/** Polyline of pixel points for one arm in one view. */
export function skeletonPolyline(
  points: Vec3[],
  view: View,
  vp: Viewport,
): [number, number][] {
  return points.map((p) => toPixels(projectPoint(p, view), vp));
}
