"""Shared fixtures: random smooth curves, synthetic corpora, trained models."""
from __future__ import annotations

import numpy as np
import pytest


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    rows = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion" in nodeid:
                rows.append((nodeid.split("::")[-1], status.upper()))
    if rows:
        terminalreporter.section("acceptance criteria")
        for name, status in sorted(rows):
            terminalreporter.write_line(f"{status:<6} {name}")

from sketchfold.diffusion import make_schedule
from sketchfold.geometry import Curve
from sketchfold.synthetic import bundle_corpus, random_bundle_curve


def smooth_random_curve(rng: np.random.Generator, n: int = 24, scale: float = 12.0) -> Curve:
    """Random non-degenerate smooth open curve (low-frequency Fourier series)."""
    t = np.linspace(0.0, 2.0 * np.pi, n)
    pts = np.zeros((n, 3))
    for k in range(1, 4):
        amp = rng.uniform(0.4, 1.0, 3) * scale / k**3
        phase = rng.uniform(0, 2 * np.pi, 3)
        pts += amp * np.sin(k * t[:, None] / 2.0 + phase)
    pts[:, 0] += t * scale / 6.0  # gentle drift so the curve never closes on itself
    return Curve(pts)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240810)


@pytest.fixture(scope="session")
def schedule():
    return make_schedule()


@pytest.fixture(scope="session")
def small_corpus():
    return bundle_corpus(12, seed=101)


@pytest.fixture(scope="session")
def bundle_curves():
    gen = np.random.default_rng(77)
    return [random_bundle_curve(gen, id=f"bc-{i}") for i in range(10)]


@pytest.fixture(scope="session")
def toy_denoiser(schedule, small_corpus):
    from sketchfold.denoisers import ToyDenoiserConfig, train_toy_denoiser

    corpus = bundle_corpus(40, seed=313)
    return train_toy_denoiser(corpus, schedule, ToyDenoiserConfig(steps=1200, seed=7))


@pytest.fixture(scope="session")
def trained_encoder():
    """Small but competent encoder shared by the module tests."""
    from sketchfold.encoder import TrainingConfig, generate_synthetic_sse_dataset, train_encoder

    data = generate_synthetic_sse_dataset(36, seed=555)
    model, history = train_encoder(
        data, TrainingConfig(learning_rate=3e-3, epochs=30, mask_fraction=0.1, seed=3)
    )
    return model
