// Minimal 3D viewport math: orbit camera, orthographic projection, and
// depth-tinted polyline segments for a 2D canvas. Pure functions only; the
// DOM drawing lives in app.ts. This is presentation math — the 3D geometry
// itself always comes from the service.

import type { Point3 } from "./types";

export interface Camera {
  yaw: number; // radians about the world y axis
  pitch: number; // radians about the camera x axis
  zoom: number; // pixels per Angstrom
  center: Point3; // world-space look-at point
  screen: { width: number; height: number };
}

export interface ProjectedPoint {
  x: number;
  y: number;
  depth: number; // camera-space z, larger = nearer
}

export function defaultCamera(width: number, height: number): Camera {
  return { yaw: 0.6, pitch: 0.4, zoom: 6, center: [0, 0, 0], screen: { width, height } };
}

export function project(points: readonly Point3[], cam: Camera): ProjectedPoint[] {
  const cy = Math.cos(cam.yaw);
  const sy = Math.sin(cam.yaw);
  const cp = Math.cos(cam.pitch);
  const sp = Math.sin(cam.pitch);
  const out: ProjectedPoint[] = [];
  for (const [px, py, pz] of points) {
    const x0 = px - cam.center[0];
    const y0 = py - cam.center[1];
    const z0 = pz - cam.center[2];
    // yaw about y, then pitch about x
    const x1 = cy * x0 + sy * z0;
    const z1 = -sy * x0 + cy * z0;
    const y2 = cp * y0 - sp * z1;
    const z2 = sp * y0 + cp * z1;
    out.push({
      x: cam.screen.width / 2 + cam.zoom * x1,
      y: cam.screen.height / 2 - cam.zoom * y2,
      depth: z2,
    });
  }
  return out;
}

export function fitCamera(points: readonly Point3[], width: number, height: number): Camera {
  const cam = defaultCamera(width, height);
  if (points.length === 0) {
    return cam;
  }
  const lo: Point3 = [Infinity, Infinity, Infinity];
  const hi: Point3 = [-Infinity, -Infinity, -Infinity];
  for (const p of points) {
    for (let k = 0; k < 3; k++) {
      lo[k] = Math.min(lo[k], p[k]);
      hi[k] = Math.max(hi[k], p[k]);
    }
  }
  const center: Point3 = [(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2];
  const span = Math.max(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2], 1);
  const zoom = (0.8 * Math.min(width, height)) / span;
  return { ...cam, center, zoom };
}

export interface Segment {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  color: string;
}

const SSE_HUES: Record<string, number> = { H: 210, E: 30, L: 120 };

/** Polyline segments with depth contributing lightness and the SSE label
 * (when present) contributing hue. */
export function polylineSegments(
  projected: ProjectedPoint[],
  labels: string | null,
  baseHue = 210,
): Segment[] {
  if (projected.length < 2) {
    return [];
  }
  let dLo = Infinity;
  let dHi = -Infinity;
  for (const p of projected) {
    dLo = Math.min(dLo, p.depth);
    dHi = Math.max(dHi, p.depth);
  }
  const range = Math.max(dHi - dLo, 1e-9);
  const segments: Segment[] = [];
  for (let i = 0; i + 1 < projected.length; i++) {
    const a = projected[i];
    const b = projected[i + 1];
    const near = ((a.depth + b.depth) / 2 - dLo) / range;
    const hue = labels ? SSE_HUES[labels[i]] ?? baseHue : baseHue;
    const light = 25 + 45 * near;
    segments.push({ x1: a.x, y1: a.y, x2: b.x, y2: b.y, color: `hsl(${hue} 70% ${light}%)` });
  }
  return segments;
}

/** Screen-space delta to a world-space displacement in the camera plane
 * (used to turn an anchor drag gesture into a drag-op displacement). */
export function unprojectDelta(dx: number, dy: number, cam: Camera): Point3 {
  const cy = Math.cos(cam.yaw);
  const sy = Math.sin(cam.yaw);
  const cp = Math.cos(cam.pitch);
  const sp = Math.sin(cam.pitch);
  const sx = dx / cam.zoom;
  const syy = -dy / cam.zoom;
  // inverse of the projection rotation applied to (sx, syy, 0)
  const x1 = sx;
  const y2 = syy;
  const y0 = cp * y2;
  const z1 = -sp * y2;
  const x0 = cy * x1 - sy * z1;
  const z0 = sy * x1 + cy * z1;
  return [x0, y0, z0];
}
