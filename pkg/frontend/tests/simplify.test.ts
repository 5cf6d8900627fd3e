import { describe, expect, it } from "vitest";
import { simplifyStroke } from "../src/simplify";
import type { Point2 } from "../src/types";

describe("stroke simplification", () => {
  it("reduces a straight drag to its two endpoints", () => {
    const raw: Point2[] = Array.from({ length: 60 }, (_, i) => ({ x: i * 3, y: 42 }));
    const out = simplifyStroke(raw);
    expect(out).toHaveLength(2);
    expect(out[0]).toEqual({ x: 0, y: 42 });
    expect(out[1]).toEqual({ x: 177, y: 42 });
  });

  it("ignores strokes that collapse below two points", () => {
    expect(simplifyStroke([])).toHaveLength(0);
    expect(simplifyStroke([{ x: 5, y: 5 }])).toHaveLength(0);
    expect(simplifyStroke([{ x: 5, y: 5 }, { x: 5, y: 5 }])).toHaveLength(0);
  });

  it("keeps a 500-sample noisy stroke under 100 points at default tolerance", () => {
    // smooth sweep with deterministic sub-pixel hand jitter
    const raw: Point2[] = Array.from({ length: 500 }, (_, i) => ({
      x: i * 0.8 + Math.sin(i * 12.9898) * 0.7,
      y: 200 + 80 * Math.sin(i / 60) + Math.cos(i * 78.233) * 0.7,
    }));
    const out = simplifyStroke(raw);
    expect(out.length).toBeGreaterThanOrEqual(2);
    expect(out.length).toBeLessThanOrEqual(100);
  });

  it("preserves corners beyond the tolerance", () => {
    const raw: Point2[] = [
      { x: 0, y: 0 },
      { x: 50, y: 0 },
      { x: 50, y: 50 },
    ];
    expect(simplifyStroke(raw)).toEqual(raw);
  });
});
