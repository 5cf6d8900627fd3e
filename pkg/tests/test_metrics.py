"""Topology Fitness, TM-score, and classical MDS."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sketchfold.errors import ChainTooShortError, DegenerateShapeError, DimensionError
from sketchfold.geometry import Curve, random_rotation, resample_curve
from sketchfold.metrics import mds_embed, tm_d0, tm_score_sequential, topology_fitness

from conftest import smooth_random_curve


def _tf_eigen_oracle(a: Curve, b: Curve) -> float:
    """Independent TF: with unit-norm standardized sets, the optimal
    similarity Procrustes leaves disparity 1 - s^2 where s is the sum of
    singular values of the cross matrix (smallest one sign-flipped for
    proper rotations), so TF = s^2."""
    m = max(len(a), len(b), 32)
    pa = resample_curve(a, m).points
    pb = resample_curve(b, m).points
    pa = (pa - pa.mean(0)) / np.linalg.norm(pa - pa.mean(0))
    pb = (pb - pb.mean(0)) / np.linalg.norm(pb - pb.mean(0))
    h = pb.T @ pa
    sv = np.linalg.svd(h, compute_uv=False)
    s = sv[0] + sv[1] + (sv[2] if np.linalg.det(h) >= 0 else -sv[2])
    return float(s**2)


# ----------------------------------------------------------- topology fitness

def test_tf_self_identity(rng):
    c = smooth_random_curve(rng, 20)
    assert abs(topology_fitness(c, c) - 1.0) < 1e-9


def test_tf_similarity_invariance(rng):
    c = smooth_random_curve(rng, 22)
    R = random_rotation(rng)
    t = rng.uniform(-30, 30, 3)
    g = Curve(2.5 * (c.points @ R.T) + t)
    assert abs(topology_fitness(c, g) - 1.0) < 1e-6


def test_tf_matches_eigen_oracle(rng):
    for _ in range(10):
        a = smooth_random_curve(rng, 18)
        b = smooth_random_curve(rng, 27)
        assert abs(topology_fitness(a, b) - _tf_eigen_oracle(a, b)) < 1e-8


def test_tf_thresholds_order_similar_vs_dissimilar(rng):
    # curves of the same family score above the fit cutoffs; a curve against
    # its own mild perturbation clears 0.8, wildly different shapes fall low
    base = smooth_random_curve(rng, 30)
    wiggle = Curve(base.points + rng.normal(0, 0.25, base.points.shape))
    assert topology_fitness(base, wiggle) > 0.8
    other = smooth_random_curve(np.random.default_rng(999), 30)
    assert topology_fitness(base, other) < topology_fitness(base, wiggle)


@settings(max_examples=20, deadline=None)
@given(s1=st.integers(0, 10_000), s2=st.integers(0, 10_000))
def test_tf_symmetric(s1, s2):
    a = smooth_random_curve(np.random.default_rng(s1), 16)
    b = smooth_random_curve(np.random.default_rng(s2), 21)
    assert abs(topology_fitness(a, b) - topology_fitness(b, a)) < 1e-9


def test_tf_rejects_degenerate_line():
    line = Curve(np.stack([np.linspace(0, 9, 10), np.zeros(10), np.zeros(10)], axis=1))
    blob = Curve(np.random.default_rng(0).standard_normal((10, 3)))
    with pytest.raises(DegenerateShapeError):
        topology_fitness(line, blob)


# ------------------------------------------------------------------ TM-score

def test_tm_identical_chains(rng):
    coords = np.cumsum(rng.standard_normal((40, 3)) * 2, axis=0)
    assert abs(tm_score_sequential(coords, coords) - 1.0) < 1e-9


def test_tm_d0_formula():
    # arithmetic oracle: d0(100) = 1.24 * 85^(1/3) - 1.8
    expected = 1.24 * 85 ** (1.0 / 3.0) - 1.8
    assert abs(tm_d0(100) - expected) < 1e-12
    assert abs(tm_d0(100) - 3.652) < 1e-3


def test_tm_random_chains_score_low():
    def chain(seed):
        g = np.random.default_rng(seed)
        steps = g.standard_normal((100, 3))
        steps = 3.8 * steps / np.linalg.norm(steps, axis=1, keepdims=True)
        return np.cumsum(steps, axis=0)

    scores = [tm_score_sequential(chain(2 * i), chain(2 * i + 1)) for i in range(5)]
    assert max(scores) < 0.3


def test_tm_rigid_invariance(rng):
    a = np.cumsum(3.8 * rng.standard_normal((50, 3)), axis=0)
    b = a + rng.normal(0, 1.5, a.shape)
    base = tm_score_sequential(a, b)
    R = random_rotation(rng)
    t = rng.uniform(-20, 20, 3)
    assert abs(tm_score_sequential(a @ R.T + t, b) - base) < 1e-9
    assert abs(tm_score_sequential(a, b @ R.T + t) - base) < 1e-9


def test_tm_rejects_short_and_mismatched(rng):
    a = rng.standard_normal((15, 3))
    with pytest.raises(ChainTooShortError):
        tm_score_sequential(a, a)
    b = rng.standard_normal((20, 3))
    with pytest.raises(DimensionError):
        tm_score_sequential(b, b[:19])


# ---------------------------------------------------------------------- MDS

def test_mds_equilateral_triangle():
    d = np.ones((3, 3)) - np.eye(3)
    coords = mds_embed(d)
    sides = sorted(
        np.linalg.norm(coords[i] - coords[j]) for i, j in [(0, 1), (0, 2), (1, 2)]
    )
    assert sides[-1] - sides[0] < 1e-6


def test_mds_recovers_planar_configuration(rng):
    pts = rng.standard_normal((10, 2)) * 4
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    coords = mds_embed(d)
    back = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=2)
    assert np.abs(back - d).max() < 1e-6


def test_mds_stress_matches_eigen_oracle(rng):
    # oracle: independent double-centering + eigendecomposition, same stress
    d = rng.random((10, 10))
    d = (d + d.T) / 2
    np.fill_diagonal(d, 0.0)
    coords = mds_embed(d)

    n = len(d)
    j = np.eye(n) - np.ones((n, n)) / n
    bmat = -0.5 * j @ (d**2) @ j
    evals, evecs = np.linalg.eigh(bmat)
    idx = np.argsort(evals)[::-1][:2]
    oracle = evecs[:, idx] * np.sqrt(np.maximum(evals[idx], 0.0))

    def stress(x):
        dd = np.linalg.norm(x[:, None] - x[None, :], axis=2)
        return float(((dd - d) ** 2).sum())

    assert abs(stress(coords) - stress(oracle)) < 1e-8


def test_mds_deterministic_sign_convention(rng):
    d = rng.random((6, 6))
    d = (d + d.T) / 2
    np.fill_diagonal(d, 0.0)
    a = mds_embed(d)
    b = mds_embed(d.copy())
    np.testing.assert_array_equal(a, b)
    for k in range(2):
        col = a[:, k]
        if np.any(col != 0):
            assert col[np.argmax(np.abs(col))] > 0


def test_mds_validates_input(rng):
    bad = rng.random((4, 4))
    with pytest.raises(DimensionError):
        mds_embed(bad)  # asymmetric
    sym = (bad + bad.T) / 2
    with pytest.raises(DimensionError):
        mds_embed(sym)  # nonzero diagonal
