"""Curve and point-set geometry.

Curves are ordered 3D polylines (coordinates in Angstrom) with optional
per-point secondary-structure labels over the alphabet H/E/L.  This module
provides arc-length resampling, cubic-spline densification, curvature,
rotation-minimizing frames, and rigid/similarity superposition.  Everything
here is a pure function of its inputs; returned arrays are write-protected.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    DegenerateShapeError,
    DimensionError,
    InvalidCurveError,
)

SSE_ALPHABET = "HEL"

_MIN_POINT_SEPARATION = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Curve:
    """Ordered 3D polyline with optional per-point SSE labels.

    Invariants: at least 2 points, consecutive points distinct, labels (when
    present) are one character from "HEL" per point.
    """

    points: np.ndarray
    labels: str | None = None
    id: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidCurveError(f"points must be (n, 3), got {pts.shape}")
        if len(pts) < 2:
            raise InvalidCurveError("a curve needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise InvalidCurveError("curve contains non-finite coordinates")
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(seg <= _MIN_POINT_SEPARATION):
            raise InvalidCurveError("consecutive curve points must be distinct")
        if self.labels is not None:
            if len(self.labels) != len(pts):
                raise InvalidCurveError(
                    f"labels length {len(self.labels)} != point count {len(pts)}"
                )
            if any(c not in SSE_ALPHABET for c in self.labels):
                raise InvalidCurveError("labels must be over the alphabet HEL")
        object.__setattr__(self, "points", _freeze(pts))

    def __len__(self) -> int:
        return len(self.points)

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "Curve":
        """Rigidly transformed copy: R @ p + t for every point."""
        pts = self.points @ np.asarray(rotation).T + np.asarray(translation)
        return Curve(pts, labels=self.labels, id=self.id)

    def to_json(self) -> str:
        doc = {"id": self.id, "points": self.points.tolist()}
        if self.labels is not None:
            doc["labels"] = self.labels
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str | bytes) -> "Curve":
        doc = json.loads(text)
        return Curve(
            np.asarray(doc["points"], dtype=float),
            labels=doc.get("labels"),
            id=doc.get("id", ""),
        )


@dataclass(frozen=True)
class FrameField:
    """Per-point orthonormal right-handed triads along a polyline."""

    tangent: np.ndarray
    normal: np.ndarray
    binormal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tangent", _freeze(self.tangent))
        object.__setattr__(self, "normal", _freeze(self.normal))
        object.__setattr__(self, "binormal", _freeze(self.binormal))

    def __len__(self) -> int:
        return len(self.tangent)


@dataclass(frozen=True)
class Superposition:
    """Similarity transform c * R @ x + t with its RMSD residual."""

    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0
    residual: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rotation", _freeze(self.rotation))
        object.__setattr__(self, "translation", _freeze(self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * (np.asarray(points, dtype=float) @ self.rotation.T) + self.translation


@dataclass(frozen=True)
class SplineResult:
    """Dense polyline from spline densification.

    ``knot_indices[i]`` locates input point i inside the dense arrays, so the
    dense polyline passes through every input point exactly.  ``linear``
    flags the piecewise-linear fallback used for short inputs.
    """

    points: np.ndarray
    params: np.ndarray
    knot_indices: np.ndarray
    linear: bool = False

    def __post_init__(self):
        object.__setattr__(self, "points", _freeze(self.points))
        object.__setattr__(self, "params", _freeze(self.params))
        ki = np.ascontiguousarray(self.knot_indices, dtype=int)
        ki.setflags(write=False)
        object.__setattr__(self, "knot_indices", ki)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class CurvatureResult:
    """Per-point curvature with a mask of degenerate (zeroed) points."""

    kappa: np.ndarray
    degenerate: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kappa", _freeze(self.kappa))
        dg = np.ascontiguousarray(self.degenerate, dtype=bool)
        dg.setflags(write=False)
        object.__setattr__(self, "degenerate", dg)


def arc_lengths(points: np.ndarray) -> np.ndarray:
    """Cumulative arc length along a polyline, starting at 0."""
    points = np.asarray(points, dtype=float)
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def _interp_along(points: np.ndarray, cum: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Linear interpolation of polyline coordinates at arc-length positions."""
    out = np.empty((len(targets), 3))
    for k in range(3):
        out[:, k] = np.interp(targets, cum, points[:, k])
    return out


def resample_curve(curve: Curve, n: int) -> Curve:
    """Resample to exactly ``n`` points equally spaced by arc length.

    Endpoints are preserved; labels (if present) are carried by
    nearest-arc-length assignment.
    """
    if n < 2:
        raise InvalidCurveError(f"resample target must be >= 2, got {n}")
    cum = arc_lengths(curve.points)
    targets = np.linspace(0.0, cum[-1], n)
    pts = _interp_along(curve.points, cum, targets)
    pts[0] = curve.points[0]
    pts[-1] = curve.points[-1]
    labels = None
    if curve.labels is not None:
        nearest = np.abs(cum[None, :] - targets[:, None]).argmin(axis=1)
        labels = "".join(curve.labels[j] for j in nearest)
    return Curve(pts, labels=labels, id=curve.id)


def _allocate_dense_params(knots: np.ndarray, total: int) -> tuple[np.ndarray, np.ndarray]:
    """Strictly increasing parameter grid of size ``total`` containing every knot.

    Extra points are distributed across the knot intervals proportionally to
    interval length (largest-remainder rounding).  Returns (params, indices of
    the knots inside params).
    """
    n = len(knots)
    extra = total - n
    if extra < 0:
        raise ValueError("total must be >= number of knots")
    spans = np.diff(knots)
    share = spans / spans.sum() * extra
    counts = np.floor(share).astype(int)
    remainder = extra - counts.sum()
    if remainder > 0:
        # quantize before ranking so float jitter (rigid transforms of the
        # curve) cannot reorder near-tied remainders; ties break by index
        order = np.lexsort((np.arange(len(spans)), -np.round(share - counts, 9)))
        counts[order[:remainder]] += 1
    params = []
    knot_idx = []
    for i in range(n - 1):
        knot_idx.append(len(params))
        params.append(knots[i])
        k = counts[i]
        if k:
            inner = np.linspace(knots[i], knots[i + 1], k + 2)[1:-1]
            params.extend(inner.tolist())
    knot_idx.append(len(params))
    params.append(knots[-1])
    return np.asarray(params), np.asarray(knot_idx, dtype=int)


def spline_interpolate(curve: Curve, factor: float) -> SplineResult:
    """Densify a curve with a natural cubic spline over the chord-length parameter.

    Output length is round(factor * input length) and the dense polyline
    contains every input point.  Inputs with fewer than 4 points fall back to
    piecewise-linear densification (flagged in the result).
    """
    if factor < 1:
        raise InvalidCurveError(f"densification factor must be >= 1, got {factor}")
    knots = arc_lengths(curve.points)
    total = max(len(curve), int(round(factor * len(curve))))
    params, knot_idx = _allocate_dense_params(knots, total)
    if len(curve) < 4:
        pts = _interp_along(curve.points, knots, params)
        pts[knot_idx] = curve.points
        return SplineResult(pts, params, knot_idx, linear=True)
    spline = CubicSpline(knots, curve.points, axis=0, bc_type="natural")
    pts = spline(params)
    pts[knot_idx] = curve.points
    return SplineResult(pts, params, knot_idx, linear=False)


def curvature(points: np.ndarray, params: np.ndarray | None = None) -> CurvatureResult:
    """Curvature kappa = |r' x r''| / |r'|^3 along a dense polyline.

    Derivatives come from a natural cubic spline refit over ``params`` (chord
    length when omitted).  Points where |r'|^3 falls below 1e-12 are flagged
    and their curvature set to 0.
    """
    points = np.asarray(points, dtype=float)
    if len(points) < 3:
        raise InvalidCurveError("curvature needs at least 3 points")
    if params is None:
        params = arc_lengths(points)
    params = np.asarray(params, dtype=float)
    if np.any(np.diff(params) <= 0):
        raise InvalidCurveError("parameters must be strictly increasing")
    spline = CubicSpline(params, points, axis=0, bc_type="natural")
    d1 = spline(params, 1)
    d2 = spline(params, 2)
    cross = np.cross(d1, d2)
    speed3 = np.linalg.norm(d1, axis=1) ** 3
    degenerate = speed3 < 1e-12
    kappa = np.zeros(len(points))
    ok = ~degenerate
    kappa[ok] = np.linalg.norm(cross[ok], axis=1) / speed3[ok]
    return CurvatureResult(kappa, degenerate)


def _tangents(points: np.ndarray) -> np.ndarray:
    """Unit tangents from averaged chord directions (chords at the ends)."""
    edges = np.diff(points, axis=0)
    norms = np.linalg.norm(edges, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    edges = edges / norms
    t = np.empty_like(points)
    t[0] = edges[0]
    t[-1] = edges[-1]
    if len(points) > 2:
        mid = edges[:-1] + edges[1:]
        mn = np.linalg.norm(mid, axis=1, keepdims=True)
        # opposing chords (cusp): fall back to the incoming edge
        bad = (mn[:, 0] < 1e-12)
        mid[bad] = edges[:-1][bad]
        mn[bad] = 1.0
        t[1:-1] = mid / mn
    return t


def _initial_normal(points: np.ndarray, t0: np.ndarray) -> np.ndarray:
    """Unit vector orthogonal to t0, chosen equivariantly from the curve itself.

    Uses the first point whose offset from the start has a usable component
    orthogonal to t0.  Perfectly straight curves fall back to a fixed world
    axis (any normal is as good as another there).
    """
    scale = max(np.linalg.norm(points[-1] - points[0]), 1.0)
    for j in range(1, len(points)):
        off = points[j] - points[0]
        perp = off - np.dot(off, t0) * t0
        norm = np.linalg.norm(perp)
        if norm > 1e-7 * scale:
            return perp / norm
    axis = np.zeros(3)
    axis[np.argmin(np.abs(t0))] = 1.0
    perp = axis - np.dot(axis, t0) * t0
    return perp / np.linalg.norm(perp)


def _rotate_about(v: np.ndarray, axis: np.ndarray, cos_a: float, sin_a: float) -> np.ndarray:
    """Rodrigues rotation of v about a unit axis."""
    return (
        v * cos_a
        + np.cross(axis, v) * sin_a
        + axis * np.dot(axis, v) * (1.0 - cos_a)
    )


def parallel_transport_frames(points: np.ndarray) -> FrameField:
    """Rotation-minimizing frames along a polyline.

    Each successive normal is obtained by the minimal rotation that maps one
    tangent onto the next, so the frame never twists about the tangent.
    """
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        raise InvalidCurveError("frames need at least 2 points")
    t = _tangents(points)
    n = np.empty_like(t)
    n[0] = _initial_normal(points, t[0])
    for i in range(len(points) - 1):
        axis = np.cross(t[i], t[i + 1])
        s = np.linalg.norm(axis)
        c = float(np.dot(t[i], t[i + 1]))
        if s < 1e-12:
            n[i + 1] = n[i]
        else:
            n[i + 1] = _rotate_about(n[i], axis / s, c, s)
        # re-orthonormalize against drift
        n[i + 1] -= np.dot(n[i + 1], t[i + 1]) * t[i + 1]
        n[i + 1] /= np.linalg.norm(n[i + 1])
    b = np.cross(t, n)
    return FrameField(t, n, b)


def kabsch_superpose(
    mobile: np.ndarray, target: np.ndarray, with_scale: bool = False
) -> Superposition:
    """Least-squares superposition of ``mobile`` onto ``target``.

    Returns the proper rotation (reflections excluded), translation, and
    optionally the optimal uniform scale, minimizing the RMSD of
    ``scale * R @ mobile + t`` against ``target``.
    """
    mobile = np.asarray(mobile, dtype=float)
    target = np.asarray(target, dtype=float)
    if mobile.shape != target.shape:
        raise DimensionError(f"point sets differ: {mobile.shape} vs {target.shape}")
    if mobile.ndim != 2 or mobile.shape[1] != 3 or len(mobile) < 3:
        raise DimensionError("superposition needs two (n, 3) sets with n >= 3")
    cm = mobile.mean(axis=0)
    ct = target.mean(axis=0)
    a = mobile - cm
    b = target - ct
    for name, m in (("mobile", a), ("target", b)):
        sv = np.linalg.svd(m, compute_uv=False)
        if sv[1] <= 1e-9 * max(sv[0], 1e-30):
            raise DegenerateShapeError(f"{name} point set is rank-deficient (rank <= 1)")
    h = a.T @ b
    u, s, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    flip = np.array([1.0, 1.0, d])
    rotation = (vt.T * flip) @ u.T
    if with_scale:
        scale = float((s * flip).sum() / (a * a).sum())
    else:
        scale = 1.0
    translation = ct - scale * rotation @ cm
    moved = scale * a @ rotation.T + ct
    residual = float(np.sqrt(np.mean(np.sum((moved - target) ** 2, axis=1))))
    return Superposition(rotation, translation, scale, residual)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random proper rotation matrix."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
