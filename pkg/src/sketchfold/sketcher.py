"""Sketch synthesis: realize an SSE-annotated curve as explicit Calpha positions.

Helix segments become residues wound around the curve on a 2.3 A radius using
rotation-minimizing frames: 1.5 A of axial rise per residue and 100 degrees of
winding (3.6 residues per turn, 5.4 A pitch).  Loop and strand segments are
sampled directly on the curve at 3.8 A spacing.  The sketch is the guidance
signal for diffusion sampling and is itself a backbone-shaped object.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backbone import Backbone, run_segments
from .errors import PreconditionError
from .geometry import Curve, _freeze, arc_lengths, parallel_transport_frames

HELIX_RADIUS = 2.3          # Calpha distance from the helix axis
HELIX_RISE = 1.5            # axial rise per residue
RESIDUES_PER_TURN = 3.6     # so the pitch is 3.6 * 1.5 = 5.4 A
LOOP_SPACING = 3.8          # Calpha virtual bond length on loops/strands

MAX_CONSECUTIVE_DIST = 4.5

# dense guide resolution (A between interpolated guide points)
_GUIDE_STEP = 0.15


@dataclass(frozen=True)
class Sketch:
    """Per-residue coordinates + SSE labels realizing a curve's plan."""

    coords: np.ndarray
    labels: str
    source_curve_id: str = ""
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 3 or len(coords) < 1:
            raise PreconditionError(f"sketch coords must be (n, 3), got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise PreconditionError("sketch coordinates must be finite")
        if len(self.labels) != len(coords):
            raise PreconditionError("sketch labels must match coordinate count")
        if len(coords) > 1:
            step = np.linalg.norm(np.diff(coords, axis=0), axis=1)
            worst = float(step.max())
            if worst > MAX_CONSECUTIVE_DIST:
                raise PreconditionError(
                    f"consecutive sketch residues {worst:.2f} A apart (limit {MAX_CONSECUTIVE_DIST})"
                )
        object.__setattr__(self, "coords", _freeze(coords))

    def __len__(self) -> int:
        return len(self.coords)

    def to_backbone(self) -> Backbone:
        return Backbone.from_coords(self.coords, labels=self.labels, id=self.source_curve_id)

    def to_json(self) -> str:
        return self.to_backbone().to_json()


def _arc_positions(length: float, spacing: float, round_up_count: bool) -> tuple[np.ndarray, bool]:
    """Arc offsets for residues on a segment of the given arc length.

    Helix counts follow round(length / rise); loop/strand counts include both
    endpoints (round(length / spacing) + 1).  Returns the offsets and a flag
    for segments too short to hold more than a single residue.
    """
    if round_up_count:
        count = int(round(length / spacing)) + 1
    else:
        count = int(round(length / spacing))
    if count <= 1:
        return np.array([length / 2.0]), True
    step = min(spacing, length / (count - 1))
    start = (length - (count - 1) * step) / 2.0
    return start + step * np.arange(count), False


def sketch_from_curve(curve: Curve) -> Sketch:
    """Build the naive sketch realizing a labeled curve.

    Every maximal run of identical labels becomes one segment (label
    transitions split the boundary edge at its midpoint): helices are wound
    about the run's arc, loops and strands are sampled on it.  Segments are
    concatenated in curve order.  Deterministic and, for curves with any
    bend, equivariant under rigid transforms.
    """
    if curve.labels is None:
        raise PreconditionError("sketch_from_curve needs a labeled curve")

    knot_arcs = arc_lengths(curve.points)
    total = float(knot_arcs[-1])

    # the guide: the interpolating spline evaluated on a fine per-interval
    # grid (each interval subdivides independently, so the grid is stable
    # under rigid transforms of the curve)
    grid = [0.0]
    for i in range(len(curve) - 1):
        span = knot_arcs[i + 1] - knot_arcs[i]
        k = max(1, int(math.ceil(span / _GUIDE_STEP)))
        grid.extend(np.linspace(knot_arcs[i], knot_arcs[i + 1], k + 1)[1:].tolist())
    grid = np.asarray(grid)
    if len(curve) >= 4:
        from scipy.interpolate import CubicSpline

        spline = CubicSpline(knot_arcs, curve.points, axis=0, bc_type="natural")
        guide_points = spline(grid)

        def eval_guide(arc: np.ndarray) -> np.ndarray:
            return spline(arc)

    else:
        guide_points = np.stack(
            [np.interp(grid, knot_arcs, curve.points[:, k]) for k in range(3)], axis=1
        )

        def eval_guide(arc: np.ndarray) -> np.ndarray:
            return np.stack(
                [np.interp(arc, knot_arcs, curve.points[:, k]) for k in range(3)], axis=1
            )

    frames = parallel_transport_frames(guide_points)

    coords: list[np.ndarray] = []
    labels: list[str] = []
    warnings: list[str] = []
    turn = 2.0 * math.pi / RESIDUES_PER_TURN

    for lab, s, e in run_segments(curve.labels):
        seg_start = 0.0 if s == 0 else 0.5 * (knot_arcs[s - 1] + knot_arcs[s])
        seg_end = total if e == len(curve) else 0.5 * (knot_arcs[e - 1] + knot_arcs[e])
        seg_len = seg_end - seg_start
        spacing = HELIX_RISE if lab == "H" else LOOP_SPACING
        offsets, short = _arc_positions(seg_len, spacing, round_up_count=(lab != "H"))
        if short:
            warnings.append(f"{lab} segment at arc {seg_start:.1f} shorter than one {spacing} A step")
        arcs = seg_start + offsets
        points = eval_guide(arcs)
        if lab == "H":
            nearest = np.searchsorted(grid, arcs)
            nearest = np.clip(nearest, 0, len(grid) - 1)
            left = np.clip(nearest - 1, 0, len(grid) - 1)
            use_left = np.abs(grid[left] - arcs) < np.abs(grid[nearest] - arcs)
            idx = np.where(use_left, left, nearest)
            for k, (p, i) in enumerate(zip(points, idx)):
                theta = k * turn
                radial = math.cos(theta) * frames.normal[i] + math.sin(theta) * frames.binormal[i]
                coords.append(p + HELIX_RADIUS * radial)
                labels.append("H")
        else:
            coords.extend(points)
            labels.extend(lab * len(points))

    return Sketch(
        np.asarray(coords),
        "".join(labels),
        source_curve_id=curve.id,
        warnings=tuple(warnings),
    )


def resample_sketch(sketch: Sketch, n: int) -> Sketch:
    """Resample a sketch chain to exactly ``n`` residues by arc length.

    Used to mediate length mismatches between a sketch and a denoiser whose
    model length is fixed; labels follow by nearest arc position.
    """
    if n == len(sketch):
        return sketch
    if n < 2:
        raise PreconditionError(f"cannot resample a sketch to {n} residues")
    cum = arc_lengths(sketch.coords)
    targets = np.linspace(0.0, cum[-1], n)
    pts = np.empty((n, 3))
    for k in range(3):
        pts[:, k] = np.interp(targets, cum, sketch.coords[:, k])
    nearest = np.abs(cum[None, :] - targets[:, None]).argmin(axis=1)
    labels = "".join(sketch.labels[j] for j in nearest)
    return Sketch(pts, labels, source_curve_id=sketch.source_curve_id, warnings=sketch.warnings)
