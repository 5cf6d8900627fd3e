"""Synthetic helix-bundle corpus.

Generates random up-down bundle guide curves (gently bowed helices joined by
tight loops, with occasional straight strand segments), realizes them with the
sketcher, and extracts curve/label pairs at several sampling granularities.
Used as the training and benchmark corpus at desk scale.
"""
from __future__ import annotations

import numpy as np

from .backbone import Backbone, extract_curve
from .geometry import Curve
from .sketcher import sketch_from_curve

GRANULARITY_RATES = (0.4, 0.8, 1.2)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _perp_of(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    raw = rng.standard_normal(3)
    p = raw - np.dot(raw, v) * v
    n = np.linalg.norm(p)
    if n < 1e-9:
        p = np.cross(v, [1.0, 0.0, 0.0])
        n = np.linalg.norm(p)
    return p / n


def _segment_points(start: np.ndarray, direction: np.ndarray, length: float,
                    bow: float, perp: np.ndarray, spacing: float) -> np.ndarray:
    """Points along a gently bowed segment (sinusoidal deflection)."""
    count = max(3, int(round(length / spacing)) + 1)
    s = np.linspace(0.0, length, count)
    pts = start[None, :] + np.outer(s, direction)
    if bow > 0:
        pts = pts + np.outer(bow * np.sin(np.pi * s / length), perp)
    return pts


def _bezier(p0, c0, c1, p1, count) -> np.ndarray:
    t = np.linspace(0.0, 1.0, count)[:, None]
    return ((1 - t) ** 3 * p0 + 3 * (1 - t) ** 2 * t * c0
            + 3 * (1 - t) * t**2 * c1 + t**3 * p1)


def random_bundle_curve(
    rng: np.random.Generator,
    n_segments: int | None = None,
    strand_prob: float = 0.18,
    id: str = "",
) -> Curve:
    """Random labeled bundle guide curve.

    Helical segments run up-down between two z-planes on a packing circle and
    are connected by tight Bezier loops; a segment is occasionally a short,
    dead-straight strand instead.
    """
    n_seg = int(n_segments) if n_segments else int(rng.integers(2, 5))
    spread = rng.uniform(5.0, 9.0)
    half_height = rng.uniform(9.0, 16.0)

    pts: list[np.ndarray] = []
    labels: list[str] = []
    prev_end = None
    prev_tan = None

    for k in range(n_seg):
        is_strand = (k > 0) and (rng.random() < strand_prob)
        ang = 2.0 * np.pi * k / n_seg + rng.normal(0.0, 0.15)
        base = np.array([spread * np.cos(ang), spread * np.sin(ang), 0.0])
        going_up = k % 2 == 0
        tilt = rng.normal(0.0, 0.10, size=2)
        direction = _unit(np.array([tilt[0], tilt[1], 1.0 if going_up else -1.0]))
        length = rng.uniform(8.0, 13.0) if is_strand else 2.0 * half_height * rng.uniform(0.85, 1.15)
        start = base - direction * (length / 2.0)
        perp = _perp_of(direction, rng)
        bow = 0.0 if is_strand else rng.uniform(0.3, 1.8)
        seg = _segment_points(start, direction, length, bow, perp, spacing=2.0)

        if prev_end is not None:
            gap = np.linalg.norm(seg[0] - prev_end)
            reach = max(3.0, 0.4 * gap)
            into = _unit(seg[1] - seg[0])
            loop = _bezier(
                prev_end,
                prev_end + prev_tan * reach,
                seg[0] - into * reach,
                seg[0],
                count=max(4, int(round(gap / 1.5)) + 2),
            )
            body = loop[1:-1]
            pts.extend(body)
            labels.extend("L" * len(body))

        pts.extend(seg)
        labels.extend(("E" if is_strand else "H") * len(seg))
        prev_end = seg[-1]
        prev_tan = _unit(seg[-1] - seg[-2])

    return Curve(np.asarray(pts), labels="".join(labels), id=id)


def random_bundle_backbone(rng: np.random.Generator, id: str = "", **kwargs) -> Backbone:
    """Random bundle backbone built by sketching a random guide curve."""
    curve = random_bundle_curve(rng, id=id, **kwargs)
    sketch = sketch_from_curve(curve)
    backbone = sketch.to_backbone()
    return Backbone(backbone.coords, backbone.chain_ids, backbone.residue_numbers,
                    backbone.labels, id=id)


def bundle_corpus(n: int, seed: int, **kwargs) -> list[Backbone]:
    """Deterministic corpus of ``n`` synthetic bundle backbones."""
    rng = np.random.default_rng(seed)
    return [random_bundle_backbone(rng, id=f"bundle-{seed}-{i:04d}", **kwargs) for i in range(n)]


def labeled_curve_pairs(n: int, seed: int, rates=GRANULARITY_RATES) -> list[tuple[Curve, "SseLabels"]]:
    """``n`` (curve, labels) pairs for SSE training, cycling over granularities.

    Bundles come from the sketcher; curves are extracted at 40/80/120 percent
    of the residue count, and the labels ride along from construction.
    """
    from .backbone import SseLabels

    rng = np.random.default_rng(seed)
    pairs: list[tuple[Curve, SseLabels]] = []
    i = 0
    while len(pairs) < n:
        backbone = random_bundle_backbone(rng, id=f"sse-{seed}-{i:04d}")
        for rate in rates:
            if len(pairs) >= n:
                break
            curve = extract_curve(backbone, rate=rate)
            pairs.append((curve, SseLabels(curve.labels)))
        i += 1
    return pairs
