import { describe, expect, it } from "vitest";

import { projectPoint, skeletonPolyline, toPixels, Viewport } from "../src/skeleton.js";

const vp: Viewport = { width: 400, height: 300, worldHalfExtent: 1.0 };

describe("projectPoint", () => {
  it("drops z in the top view and y in the side view", () => {
    expect(projectPoint([0.1, 0.2, 0.3], "top")).toEqual([0.1, 0.2]);
    expect(projectPoint([0.1, 0.2, 0.3], "side")).toEqual([0.1, 0.3]);
  });
});

describe("toPixels", () => {
  it("maps the world origin to the viewport center", () => {
    expect(toPixels([0, 0], vp)).toEqual([200, 150]);
  });

  it("scales by the smaller viewport dimension and flips y", () => {
    // half-extent 1.0 maps to 150 px on the 300 px axis
    expect(toPixels([1, 0], vp)).toEqual([350, 150]);
    expect(toPixels([0, 1], vp)).toEqual([200, 0]);
    expect(toPixels([0, -1], vp)).toEqual([200, 300]);
  });

  it("keeps the aspect ratio square across both axes", () => {
    const [x0] = toPixels([0, 0], vp);
    const [x1] = toPixels([0.5, 0], vp);
    const [, y0] = toPixels([0, 0], vp);
    const [, y1] = toPixels([0, 0.5], vp);
    expect(x1 - x0).toBeCloseTo(y0 - y1, 12);
  });
});

describe("skeletonPolyline", () => {
  it("projects every chain point in order", () => {
    const points: [number, number, number][] = [
      [0, 0, 0],
      [0, 0, 0.5],
      [0.5, 0, 0.5],
    ];
    const side = skeletonPolyline(points, "side", vp);
    expect(side).toEqual([
      [200, 150],
      [200, 75],
      [275, 75],
    ]);
    const top = skeletonPolyline(points, "top", vp);
    expect(top).toEqual([
      [200, 150],
      [200, 150],
      [275, 150],
    ]);
  });
});
