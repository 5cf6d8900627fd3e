import { describe, expect, it } from "vitest";
import type { Point3 } from "../src/types";
import {
  defaultCamera,
  fitCamera,
  polylineSegments,
  project,
  unprojectDelta,
} from "../src/viewport";

describe("viewport projection", () => {
  it("puts the look-at point at the screen center", () => {
    const cam = { ...defaultCamera(400, 300), center: [5, -2, 7] as Point3 };
    const [p] = project([[5, -2, 7]], cam);
    expect(p.x).toBeCloseTo(200, 9);
    expect(p.y).toBeCloseTo(150, 9);
  });

  it("is a rigid screen map at zero angles", () => {
    const cam = { yaw: 0, pitch: 0, zoom: 10, center: [0, 0, 0] as Point3, screen: { width: 200, height: 200 } };
    const [p] = project([[3, 2, -5]], cam);
    expect(p.x).toBeCloseTo(100 + 30, 9);
    expect(p.y).toBeCloseTo(100 - 20, 9);
    expect(p.depth).toBeCloseTo(-5, 9);
  });

  it("fit camera centers the bounding box", () => {
    const pts: Point3[] = [[0, 0, 0], [10, 20, 30]];
    const cam = fitCamera(pts, 400, 400);
    expect(cam.center).toEqual([5, 10, 15]);
    const projected = project(pts, cam);
    for (const p of projected) {
      expect(p.x).toBeGreaterThan(0);
      expect(p.x).toBeLessThan(400);
    }
  });

  it("unprojectDelta inverts the screen basis of the projection", () => {
    const cam = { ...defaultCamera(300, 300), yaw: 0.7, pitch: 0.3, zoom: 4 };
    const world = unprojectDelta(24, -10, cam);
    const [origin, moved] = project([[0, 0, 0], world], cam);
    expect(moved.x - origin.x).toBeCloseTo(24, 6);
    expect(moved.y - origin.y).toBeCloseTo(-10, 6);
  });

  it("emits one depth-tinted segment per polyline edge", () => {
    const cam = defaultCamera(100, 100);
    const projected = project([[0, 0, 0], [1, 0, 0], [2, 1, 0]], cam);
    const segments = polylineSegments(projected, "HHL");
    expect(segments).toHaveLength(2);
    expect(segments[0].color).toMatch(/^hsl\(/);
    // helix and loop labels pick different hues
    expect(segments[0].color).not.toBe(segments[1].color);
  });
});
