"""Interactive curve editing and synthesis.

Drag reshapes a curve with a Gaussian arc-length falloff around an anchor.
Joint welds two curves end-to-start at a requested angle.  SSE edits relabel
a range without touching geometry.  Lifting turns a 2D stroke into a 3D curve
by assigning a smooth sinusoidal depth plus bounded high-frequency noise.
Sphere perturbation jitters points uniformly inside a ball (drawing-noise
simulation), and hotspot search finds target residues near a binder curve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .backbone import Backbone
from .errors import DegenerateShapeError, PreconditionError
from .geometry import Curve, arc_lengths, parallel_transport_frames, _rotate_about

DEFAULT_HOTSPOT_CUTOFF = 8.0


@dataclass(frozen=True)
class DragSpec:
    """Anchor-point drag: displacement with a Gaussian arc-length falloff."""

    anchor: int
    displacement: tuple[float, float, float]
    falloff: float = 8.0

    def __post_init__(self):
        if self.falloff <= 0:
            raise PreconditionError(f"falloff radius must be positive, got {self.falloff}")


@dataclass(frozen=True)
class LiftSpec:
    """2D-to-3D lift: sinusoidal depth plus smooth bounded noise."""

    amplitude: float = 6.0
    period: int = 24
    noise_amplitude: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.amplitude < 0 or self.noise_amplitude < 0:
            raise PreconditionError("lift amplitudes must be non-negative")
        if self.period < 4:
            raise PreconditionError(f"lift period must be >= 4 points, got {self.period}")


def drag(curve: Curve, spec: DragSpec) -> Curve:
    """Move the anchor by the displacement; neighbors follow with Gaussian decay
    in arc-length distance.  Labels are untouched."""
    n = len(curve)
    if not 0 <= spec.anchor < n:
        raise IndexError(f"anchor {spec.anchor} outside 0..{n - 1}")
    cum = arc_lengths(curve.points)
    d = np.abs(cum - cum[spec.anchor])
    w = np.exp(-(d**2) / (2.0 * spec.falloff**2))
    w[spec.anchor] = 1.0
    pts = curve.points + np.outer(w, np.asarray(spec.displacement, dtype=float))
    return Curve(pts, labels=curve.labels, id=curve.id)


def joint(a: Curve, b: Curve, angle_deg: float) -> Curve:
    """Weld curve ``b`` onto the end of curve ``a`` at the given junction angle.

    ``b`` is rigidly rotated so its first tangent leaves ``a``'s last tangent
    at ``angle_deg`` (measured between the incoming and outgoing directions,
    180 means straight continuation) within the plane spanned by ``a``'s end
    tangent and end normal, then translated so the endpoints coincide.  The
    duplicate junction point is dropped; labels concatenate.
    """
    frames = parallel_transport_frames(a.points)
    t_a = frames.tangent[-1]
    n_a = frames.normal[-1]
    phi = np.pi - np.deg2rad(angle_deg)
    t_target = np.cos(phi) * t_a + np.sin(phi) * n_a

    t_b = b.points[1] - b.points[0]
    norm = np.linalg.norm(t_b)
    if norm < 1e-9:
        raise DegenerateShapeError("curve b has a degenerate start tangent")
    t_b = t_b / norm

    axis = np.cross(t_b, t_target)
    s = np.linalg.norm(axis)
    c = float(np.dot(t_b, t_target))
    shifted = b.points - b.points[0]
    if s < 1e-12:
        if c > 0:
            rotated = shifted
        else:
            # antiparallel: rotate half a turn about any perpendicular axis
            perp = np.cross(t_b, n_a)
            if np.linalg.norm(perp) < 1e-9:
                perp = np.cross(t_b, frames.binormal[-1])
            perp = perp / np.linalg.norm(perp)
            rotated = np.stack([_rotate_about(p, perp, -1.0, 0.0) for p in shifted])
    else:
        axis = axis / s
        rotated = np.stack([_rotate_about(p, axis, c, s) for p in shifted])

    pts = np.concatenate([a.points, rotated[1:] + a.points[-1]])
    labels = None
    if a.labels is not None and b.labels is not None:
        labels = a.labels + b.labels[1:]
    return Curve(pts, labels=labels, id=a.id or b.id)


def edit_sse(curve: Curve, start: int, stop: int, label: str) -> Curve:
    """Replace labels on the half-open range [start, stop); geometry unchanged.

    Curves without labels start from all-loop.
    """
    if label not in "HEL" or len(label) != 1:
        raise PreconditionError(f"label must be one of H/E/L, got {label!r}")
    n = len(curve)
    if not (0 <= start <= stop <= n):
        raise IndexError(f"range [{start}, {stop}) outside 0..{n}")
    base = curve.labels if curve.labels is not None else "L" * n
    labels = base[:start] + label * (stop - start) + base[stop:]
    return Curve(curve.points, labels=labels, id=curve.id)


def _smooth_unit_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """Smoothed Gaussian noise, rescaled to unit variance and clipped to [-3, 3]."""
    raw = rng.standard_normal(n)
    sm = gaussian_filter1d(raw, sigma=2.0, mode="nearest")
    std = sm.std()
    if std > 1e-12:
        sm = sm / std
    return np.clip(sm, -3.0, 3.0)


def lift_2d_to_3d(points_2d: np.ndarray, spec: LiftSpec) -> Curve:
    """Lift a 2D polyline into 3D with smoothly varying depth.

    depth(i) = amplitude * sin(2 pi i / period + phase) + noise_amplitude *
    smooth_noise(i), with |smooth_noise| <= 3; x and y are preserved.
    Deterministic per seed.
    """
    pts2 = np.asarray(points_2d, dtype=float)
    if pts2.ndim != 2 or pts2.shape[1] != 2 or len(pts2) < 2:
        raise PreconditionError(f"need an (n, 2) stroke with n >= 2, got {pts2.shape}")
    rng = np.random.default_rng(spec.seed)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    i = np.arange(len(pts2))
    depth = spec.amplitude * np.sin(2.0 * np.pi * i / spec.period + phase)
    if spec.noise_amplitude > 0:
        depth = depth + spec.noise_amplitude * _smooth_unit_noise(len(pts2), rng)
    pts = np.column_stack([pts2, depth])
    return Curve(pts, id=f"lift-{spec.seed}")


def perturb_sphere(curve: Curve, radius: float, seed: int) -> Curve:
    """Displace every point by an independent uniform draw from a ball.

    Simulates hand-drawing noise; deterministic per seed.
    """
    if radius < 0:
        raise PreconditionError(f"radius must be >= 0, got {radius}")
    if radius == 0:
        return curve
    rng = np.random.default_rng(seed)
    n = len(curve)
    direction = rng.standard_normal((n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / 3.0)
    return Curve(curve.points + direction * r[:, None], labels=curve.labels, id=curve.id)


def find_hotspots(curve: Curve, target: Backbone, cutoff: float = DEFAULT_HOTSPOT_CUTOFF) -> list[int]:
    """Indices of target residues whose Calpha lies within ``cutoff`` of the curve."""
    if cutoff <= 0:
        raise PreconditionError(f"cutoff must be positive, got {cutoff}")
    diff = target.coords[:, None, :] - curve.points[None, :, :]
    dmin = np.sqrt((diff**2).sum(axis=2)).min(axis=1)
    return [int(i) for i in np.where(dmin <= cutoff)[0]]
