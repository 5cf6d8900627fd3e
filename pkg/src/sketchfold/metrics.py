"""Shape-comparison metrics: Topology Fitness, sequential TM-score, classical MDS.

Topology Fitness (TF) compares two curves as shapes: both are resampled to a
common point count, centered, scaled to unit Frobenius norm, and superposed by
a similarity Procrustes fit (proper rotations only).  TF = 1 - disparity where
disparity is the remaining sum of squared point distances, so TF = 1 exactly
when the curves agree up to a similarity transform.  Scores above 0.7 indicate
a shared topology and above 0.8 a close match.
"""
from __future__ import annotations

import numpy as np

from .errors import ChainTooShortError, DegenerateShapeError, DimensionError
from .geometry import Curve, kabsch_superpose, resample_curve

# interpretation cutoffs for TF-based scores
TF_FAIR_CUTOFF = 0.7
TF_GOOD_CUTOFF = 0.8

# TF resampling never goes below this point count
TF_MIN_POINTS = 32


def _standardize(points: np.ndarray) -> np.ndarray:
    """Center and scale to unit Frobenius norm."""
    centered = points - points.mean(axis=0)
    norm = np.linalg.norm(centered)
    if norm < 1e-12:
        raise DegenerateShapeError("all points coincide")
    return centered / norm


def topology_fitness(a: Curve, b: Curve) -> float:
    """Topology Fitness between two curves, in (-inf, 1], 1 iff same shape.

    Symmetric in its arguments and invariant to similarity transforms of
    either curve.
    """
    m = max(len(a), len(b), TF_MIN_POINTS)
    pa = _standardize(resample_curve(a, m).points)
    pb = _standardize(resample_curve(b, m).points)
    sup = kabsch_superpose(pb, pa, with_scale=True)
    disparity = float(np.sum((sup.apply(pb) - pa) ** 2))
    return 1.0 - disparity


def tm_d0(length: int) -> float:
    """Length-normalization distance for the TM-score."""
    if length < 16:
        raise ChainTooShortError(f"TM-score undefined below 16 residues, got {length}")
    return 1.24 * (length - 15) ** (1.0 / 3.0) - 1.8


def _tm_from_distances(d: np.ndarray, d0: float) -> float:
    return float(np.mean(1.0 / (1.0 + (d / d0) ** 2)))


def tm_score_sequential(a: np.ndarray, b: np.ndarray) -> float:
    """TM-score between two equal-length chains under sequential correspondence.

    Maximized over iterative superposition refinement: seed fragments of
    several lengths are superposed, residues within a distance cutoff are
    kept, and the fit is repeated until the inclusion set stabilizes.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"chains differ in shape: {a.shape} vs {b.shape}")
    n = len(a)
    d0 = tm_d0(n)
    cutoff = max(d0, 4.5)

    best = 0.0
    seeds: list[np.ndarray] = []
    frag = n
    while frag >= 4:
        for start in range(0, n - frag + 1, max(frag // 2, 1)):
            seeds.append(np.arange(start, start + frag))
        frag //= 2

    for idx in seeds:
        for _ in range(20):
            try:
                sup = kabsch_superpose(a[idx], b[idx])
            except DegenerateShapeError:
                break
            d = np.linalg.norm(sup.apply(a) - b, axis=1)
            best = max(best, _tm_from_distances(d, d0))
            cut = cutoff
            new_idx = np.where(d < cut)[0]
            while len(new_idx) < 4:
                cut += 0.5
                new_idx = np.where(d < cut)[0]
            if len(new_idx) == len(idx) and np.array_equal(new_idx, idx):
                break
            idx = new_idx
    return best


def mds_embed(distances: np.ndarray, out_dim: int = 2) -> np.ndarray:
    """Classical MDS embedding of a symmetric distance matrix.

    Double-centers the squared distances and projects on the top eigenvectors.
    Each output axis is oriented so its largest-magnitude coordinate is
    positive, making the embedding deterministic.
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DimensionError(f"distance matrix must be square, got {d.shape}")
    if not np.allclose(d, d.T, atol=1e-9):
        raise DimensionError("distance matrix must be symmetric")
    if not np.allclose(np.diag(d), 0.0, atol=1e-9):
        raise DimensionError("distance matrix must have a zero diagonal")
    if np.any(d < -1e-12):
        raise DimensionError("distances must be non-negative")
    n = len(d)
    j = np.eye(n) - np.ones((n, n)) / n
    bmat = -0.5 * j @ (d**2) @ j
    evals, evecs = np.linalg.eigh(bmat)
    order = np.argsort(evals)[::-1]
    coords = np.zeros((n, out_dim))
    for k in range(min(out_dim, n)):
        lam = evals[order[k]]
        if lam <= 0:
            break
        axis = evecs[:, order[k]] * np.sqrt(lam)
        if axis[np.argmax(np.abs(axis))] < 0:
            axis = -axis
        coords[:, k] = axis
    return coords
