// Douglas-Peucker stroke simplification. Raw pointer samples come in dense
// and jittery; 2px tolerance keeps curves editable while staying faithful.

import type { Point2 } from "./types";

export const DEFAULT_TOLERANCE_PX = 2;

function perpendicularDistance(p: Point2, a: Point2, b: Point2): number {
  const dx = b.x - a.x;
  const dy = b.y - a.y;
  const lenSq = dx * dx + dy * dy;
  if (lenSq === 0) {
    return Math.hypot(p.x - a.x, p.y - a.y);
  }
  const t = Math.max(0, Math.min(1, ((p.x - a.x) * dx + (p.y - a.y) * dy) / lenSq));
  return Math.hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

function douglasPeucker(points: Point2[], first: number, last: number, tol: number, keep: boolean[]): void {
  let maxDist = 0;
  let index = -1;
  for (let i = first + 1; i < last; i++) {
    const d = perpendicularDistance(points[i], points[first], points[last]);
    if (d > maxDist) {
      maxDist = d;
      index = i;
    }
  }
  if (maxDist > tol && index > 0) {
    keep[index] = true;
    douglasPeucker(points, first, index, tol, keep);
    douglasPeucker(points, index, last, tol, keep);
  }
}

/**
 * Simplify a raw stroke. Returns an empty array for strokes that collapse
 * below two points (the caller ignores those).
 */
export function simplifyStroke(raw: Point2[], tolerance: number = DEFAULT_TOLERANCE_PX): Point2[] {
  // drop exact consecutive duplicates first
  const pts: Point2[] = [];
  for (const p of raw) {
    const prev = pts[pts.length - 1];
    if (!prev || prev.x !== p.x || prev.y !== p.y) {
      pts.push(p);
    }
  }
  if (pts.length < 2) {
    return [];
  }
  if (pts.length === 2) {
    return pts;
  }
  const keep = new Array<boolean>(pts.length).fill(false);
  keep[0] = true;
  keep[pts.length - 1] = true;
  douglasPeucker(pts, 0, pts.length - 1, tolerance, keep);
  return pts.filter((_, i) => keep[i]);
}
