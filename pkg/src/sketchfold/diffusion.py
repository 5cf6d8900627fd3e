"""Sketch-guided DDPM over Calpha translations.

The forward process follows the standard variance-schedule Gaussian noising;
the reverse process substitutes a pluggable denoiser's clean-structure
prediction into the posterior mean.  Guidance mixes a rigid-aligned sketch
into the posterior with weight lambda, scaled per step by a helix-gated factor
F: while the denoiser's helix fraction trails the sketch's, guidance is kept
at F = gamma * (deficit) + eta (confidential phase); once it catches up, F = 1
(controllable phase) and the trajectory latches there.

Rotations are not diffused: the sampler operates on translations only.  The
sampling loop keeps the latent's centroid pinned to the initial noise centroid
(zero-CoM convention), which makes full trajectories commute exactly with
rigid transforms of sketch, denoiser, and noise.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Protocol

import numpy as np

from .backbone import Backbone, SseLabels, helix_fraction
from .errors import ConfigError, DimensionError, PreconditionError, SamplingAborted
from .geometry import _freeze, kabsch_superpose
from .sketcher import Sketch, resample_sketch

DEFAULT_T = 50
DEFAULT_BETA_MIN = 1e-4
DEFAULT_BETA_MAX = 0.2

PHASE_CONFIDENTIAL = "confidential"
PHASE_CONTROLLABLE = "controllable"

# default switch step when helix gating is disabled
FIXED_SWITCH_DEFAULT = 10


@dataclass(frozen=True)
class DiffusionSchedule:
    """Variance schedule beta_t with derived alpha_t and alpha_bar_t.

    Arrays are indexed by step: entry 0 is the t=0 convention (beta_0 = 0,
    alpha_bar_0 = 1) and entries 1..T are the diffusion steps.
    """

    beta: np.ndarray
    alpha: np.ndarray = field(init=False)
    alpha_bar: np.ndarray = field(init=False)
    one_minus_alpha_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta[0] != 0.0:
            raise ConfigError("beta[0] must be 0 (t=0 convention)")
        if np.any(beta[1:] <= 0) or np.any(beta[1:] >= 1):
            raise ConfigError("beta_t must lie in (0, 1)")
        alpha = 1.0 - beta
        alpha_bar = np.cumprod(alpha)
        # 1 - abar via the cancellation-free recurrence
        # 1 - abar_t = beta_t + alpha_t * (1 - abar_{t-1}); in particular
        # 1 - abar_1 == beta_1 exactly, making the t=1 posterior collapse exact
        omab = np.zeros_like(beta)
        for t in range(1, len(beta)):
            omab[t] = beta[t] + alpha[t] * omab[t - 1]
        if np.any(np.diff(omab) <= 0):
            raise ConfigError("alpha_bar must be strictly decreasing")
        object.__setattr__(self, "beta", _freeze(beta))
        object.__setattr__(self, "alpha", _freeze(alpha))
        object.__setattr__(self, "alpha_bar", _freeze(alpha_bar))
        object.__setattr__(self, "one_minus_alpha_bar", _freeze(omab))

    @property
    def T(self) -> int:
        return len(self.beta) - 1

    def beta_tilde(self, t: int) -> float:
        """Posterior variance coefficient (1-abar_{t-1})/(1-abar_t) * beta_t."""
        self._check_t(t)
        return float(self.one_minus_alpha_bar[t - 1] / self.one_minus_alpha_bar[t] * self.beta[t])

    def posterior_coefficients(self, t: int) -> tuple[float, float]:
        """(coefficient of z0_hat, coefficient of z_t) in the posterior mean."""
        self._check_t(t)
        denom = self.one_minus_alpha_bar[t]
        c0 = float(np.sqrt(self.alpha_bar[t - 1]) * self.beta[t] / denom)
        ct = float(np.sqrt(self.alpha[t]) * self.one_minus_alpha_bar[t - 1] / denom)
        return c0, ct

    def _check_t(self, t: int):
        if not 1 <= t <= self.T:
            raise PreconditionError(f"step t={t} outside 1..{self.T}")


def make_schedule(
    T: int = DEFAULT_T,
    beta_min: float = DEFAULT_BETA_MIN,
    beta_max: float = DEFAULT_BETA_MAX,
    shape: str = "linear",
) -> DiffusionSchedule:
    """Build a variance schedule of the given shape over T steps."""
    if T < 2:
        raise ConfigError(f"need at least 2 steps, got T={T}")
    if not (0 < beta_min <= beta_max < 1):
        raise ConfigError(f"require 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]")
    if shape == "linear":
        beta = np.linspace(beta_min, beta_max, T)
    elif shape == "cosine":
        s = 0.008
        steps = np.arange(T + 1)
        f = np.cos((steps / T + s) / (1 + s) * np.pi / 2.0) ** 2
        abar = f / f[0]
        beta = np.clip(1.0 - abar[1:] / abar[:-1], beta_min, beta_max)
    else:
        raise ConfigError(f"unknown schedule shape {shape!r}")
    return DiffusionSchedule(np.concatenate([[0.0], beta]))


@dataclass(frozen=True)
class SamplerConfig:
    """Hyperparameters of a sampling run.

    ``guidance`` is the sketch mixing weight lambda in [0, 1); ``gate_gamma``
    and ``gate_eta`` parametrize the confidential-phase scale.  When
    ``fixed_phase_switch`` is set, helix gating is disabled and the phase
    flips at that step instead.
    """

    guidance: float = 2.0 / 3.0
    gate_gamma: float = 0.2
    gate_eta: float = 0.7
    fixed_phase_switch: int | None = None
    seed: int = 0
    mode: str = "guided"  # guided | unconditional | motif-guided

    def __post_init__(self):
        if not 0.0 <= self.guidance < 1.0:
            raise ConfigError(f"guidance must be in [0, 1), got {self.guidance}")
        if self.gate_gamma < 0:
            raise ConfigError(f"gate_gamma must be >= 0, got {self.gate_gamma}")
        if not 0.0 < self.gate_eta <= 1.0:
            raise ConfigError(f"gate_eta must be in (0, 1], got {self.gate_eta}")
        if self.mode not in ("guided", "unconditional", "motif-guided"):
            raise ConfigError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class Motif:
    """Fixed substructure: residue indices and their coordinates."""

    indices: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        coords = np.asarray(self.coords, dtype=float)
        if idx.ndim != 1 or coords.shape != (len(idx), 3):
            raise DimensionError("motif needs matching (k,) indices and (k, 3) coords")
        if len(np.unique(idx)) != len(idx):
            raise IndexError("motif indices must not repeat")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "coords", _freeze(coords))

    def validate_for(self, length: int):
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= length):
            raise IndexError(f"motif indices outside 0..{length - 1}")


class Denoiser(Protocol):
    """Clean-structure predictor plugged into the reverse process."""

    @property
    def length(self) -> int | None:
        """Fixed model length, or None when any length is accepted."""
        ...

    def predict_z0(
        self, z_t: np.ndarray, t: int, motif: Motif | None = None
    ) -> tuple[np.ndarray, str]:
        """Predict clean coordinates and their SSE labels from a noisy state."""
        ...


@dataclass(frozen=True)
class StepRecord:
    """One reverse step: the latent entering the step and what it produced."""

    t: int
    z_t: np.ndarray
    z0_hat: np.ndarray
    phase: str
    gate: float
    rmsd_to_sketch: float


@dataclass(frozen=True)
class Trajectory:
    """Full record of a sampling run, final backbone included."""

    steps: tuple[StepRecord, ...]
    final: Backbone

    def __post_init__(self):
        ts = [s.t for s in self.steps]
        if any(b >= a for a, b in zip(ts, ts[1:])):
            raise PreconditionError("trajectory steps must be strictly decreasing in t")
        phases = [s.phase for s in self.steps]
        switched = False
        for a, b in zip(phases, phases[1:]):
            if a == PHASE_CONTROLLABLE and b == PHASE_CONFIDENTIAL:
                raise PreconditionError("phase may not fall back to confidential")
            if a != b:
                if switched:
                    raise PreconditionError("phase may switch at most once")
                switched = True

    @property
    def phase_switch_step(self) -> int | None:
        """Step t at which the controllable phase began, if it did."""
        for s in self.steps:
            if s.phase == PHASE_CONTROLLABLE:
                return s.t
        return None

    def export_jsonl(self, include_coords: bool = False) -> str:
        """One JSON record per step; coordinates only when asked (size)."""
        import json

        lines = []
        for s in self.steps:
            rec = {"t": s.t, "phase": s.phase, "F": s.gate, "rmsd_to_sketch": s.rmsd_to_sketch}
            if include_coords:
                rec["z_t"] = s.z_t.tolist()
                rec["z0_hat"] = s.z0_hat.tolist()
            lines.append(json.dumps(rec, sort_keys=True))
        return "\n".join(lines) + "\n"


def forward_noise(
    z0: np.ndarray, t: int, schedule: DiffusionSchedule, rng: np.random.Generator
) -> np.ndarray:
    """Closed-form forward noising z_t = sqrt(abar_t) z0 + sqrt(1-abar_t) eps."""
    if not 0 <= t <= schedule.T:
        raise PreconditionError(f"step t={t} outside 0..{schedule.T}")
    z0 = np.asarray(z0, dtype=float)
    if t == 0:
        return z0.copy()
    abar = schedule.alpha_bar[t]
    eps = rng.standard_normal(z0.shape)
    return np.sqrt(abar) * z0 + np.sqrt(schedule.one_minus_alpha_bar[t]) * eps


def forward_noise_step(
    z_prev: np.ndarray, t: int, schedule: DiffusionSchedule, rng: np.random.Generator
) -> np.ndarray:
    """Single Markov forward step z_t = sqrt(1-beta_t) z_{t-1} + sqrt(beta_t) eps."""
    schedule._check_t(t)
    beta = schedule.beta[t]
    eps = rng.standard_normal(np.shape(z_prev))
    return np.sqrt(1.0 - beta) * np.asarray(z_prev, dtype=float) + np.sqrt(beta) * eps


def posterior_mean(
    z_t: np.ndarray, z0_hat: np.ndarray, t: int, schedule: DiffusionSchedule
) -> np.ndarray:
    """Posterior mean with the denoiser prediction substituted for z0."""
    c0, ct = schedule.posterior_coefficients(t)
    return c0 * np.asarray(z0_hat, dtype=float) + ct * np.asarray(z_t, dtype=float)


def unconditional_step(
    z_t: np.ndarray,
    z0_hat: np.ndarray,
    t: int,
    schedule: DiffusionSchedule,
    rng: np.random.Generator,
) -> np.ndarray:
    """One reverse DDPM step; the final step (t=1) is noise-free."""
    mean = posterior_mean(z_t, z0_hat, t, schedule)
    if t > 1:
        mean = mean + np.sqrt(schedule.beta_tilde(t)) * rng.standard_normal(np.shape(z_t))
    return mean


def filter_phi(z: np.ndarray, guidance: float) -> np.ndarray:
    """Frame filter: scale translation coordinates by the guidance factor."""
    if not 0.0 <= guidance < 1.0:
        raise ConfigError(f"guidance must be in [0, 1), got {guidance}")
    return guidance * np.asarray(z, dtype=float)


def helix_gate(
    z0_labels: SseLabels | str,
    sketch_labels: SseLabels | str,
    gamma: float,
    eta: float,
) -> tuple[float, str]:
    """Gate value F and phase from the helix percentages of prediction and sketch.

    Controllable phase (F = 1) when the prediction's helix fraction has
    reached the sketch's; otherwise confidential with
    F = gamma * (sketch fraction - predicted fraction) + eta.
    """
    o = helix_fraction(z0_labels)
    o_y = helix_fraction(sketch_labels)
    if o >= o_y:
        return 1.0, PHASE_CONTROLLABLE
    return gamma * (o_y - o) + eta, PHASE_CONFIDENTIAL


def _gate_for_step(
    cfg: SamplerConfig,
    t: int,
    z0_labels: str,
    sketch_labels: str,
    latched: bool,
) -> tuple[float, str]:
    if latched:
        return 1.0, PHASE_CONTROLLABLE
    if cfg.fixed_phase_switch is not None:
        if t <= cfg.fixed_phase_switch:
            return 1.0, PHASE_CONTROLLABLE
        return cfg.gate_eta, PHASE_CONFIDENTIAL
    return helix_gate(z0_labels, sketch_labels, cfg.gate_gamma, cfg.gate_eta)


def guided_step(
    z_t: np.ndarray,
    z0_hat: np.ndarray,
    z0_labels: str,
    sketch: Sketch,
    t: int,
    schedule: DiffusionSchedule,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    force_controllable: bool = False,
) -> tuple[np.ndarray, str, float]:
    """One sketch-guided reverse step.

    The sketch is rigid-aligned to the prediction before mixing, then blended
    into the posterior with weight lambda and gate F; the stochastic term is
    added for t > 1.  With lambda = 0 this reduces bitwise to the
    unconditional step under a shared rng stream.
    """
    z_t = np.asarray(z_t, dtype=float)
    if sketch.coords.shape != z_t.shape:
        raise DimensionError(
            f"sketch has {len(sketch)} residues but the latent has {len(z_t)}"
        )
    gate, phase = _gate_for_step(cfg, t, z0_labels, sketch.labels, force_controllable)
    lam = cfg.guidance
    if lam == 0.0:
        return unconditional_step(z_t, z0_hat, t, schedule, rng), phase, gate

    c0, ct = schedule.posterior_coefficients(t)
    aligned = kabsch_superpose(sketch.coords, z0_hat).apply(sketch.coords)
    y_prev = ct * gate * aligned
    z_prev = c0 * np.asarray(z0_hat, dtype=float) + ct * (1.0 - lam) * z_t + lam * y_prev
    if t > 1:
        z_prev = z_prev + np.sqrt(schedule.beta_tilde(t)) * rng.standard_normal(z_t.shape)
    return z_prev, phase, gate


NoiseSource = Callable[[int, tuple[int, ...]], np.ndarray]


def _rng_noise(rng: np.random.Generator) -> NoiseSource:
    def draw(t: int, shape: tuple[int, ...]) -> np.ndarray:
        return rng.standard_normal(shape)

    return draw


def sample(
    denoiser: Denoiser,
    sketch: Sketch,
    cfg: SamplerConfig,
    schedule: DiffusionSchedule,
    motif: Motif | None = None,
    noise: NoiseSource | None = None,
    progress: Callable[[int], None] | None = None,
    length: int | None = None,
) -> Trajectory:
    """Run a full reverse trajectory from pure noise down to a backbone.

    The latent's centroid stays pinned to the initial noise centroid
    throughout (zero-CoM convention), so the whole run commutes with rigid
    transforms applied consistently to sketch, denoiser, and noise.  A noise
    source may be injected for conjugation tests; by default all randomness
    comes from a generator seeded by ``cfg.seed``, making runs bit-reproducible.
    """
    if cfg.mode == "motif-guided" and motif is None:
        raise ConfigError("motif-guided mode needs a motif")
    if motif is not None and len(motif.indices) == 0:
        motif = None

    if denoiser.length is not None:
        if length is not None and length != denoiser.length:
            raise DimensionError(
                f"requested length {length} conflicts with the denoiser's {denoiser.length}"
            )
        length = denoiser.length
    elif length is None:
        length = len(sketch)
    if len(sketch) != length:
        sketch = resample_sketch(sketch, length)
    if motif is not None:
        motif.validate_for(length)

    rng = np.random.default_rng(cfg.seed)
    draw = noise if noise is not None else _rng_noise(rng)

    z = np.asarray(draw(schedule.T + 1, (length, 3)), dtype=float).copy()
    center = z.mean(axis=0)
    if motif is not None:
        z[motif.indices] = motif.coords

    steps: list[StepRecord] = []
    latched = False
    guided = cfg.mode != "unconditional"

    for t in range(schedule.T, 0, -1):
        try:
            z0_hat, labels = denoiser.predict_z0(z, t, motif=motif)
        except Exception as exc:  # noqa: BLE001 - aborted trajectories carry the step
            raise SamplingAborted(t, exc) from exc
        z0_hat = np.asarray(z0_hat, dtype=float)
        if z0_hat.shape != z.shape or len(labels) != length:
            raise SamplingAborted(
                t, DimensionError("denoiser output shape does not match the latent")
            )

        rmsd = kabsch_superpose(sketch.coords, z).residual
        eps = draw(t, (length, 3)) if t > 1 else None

        if guided:
            gate, phase = _gate_for_step(cfg, t, labels, sketch.labels, latched)
            lam = cfg.guidance
        else:
            gate, phase, lam = 1.0, PHASE_CONTROLLABLE, 0.0

        c0, ct = schedule.posterior_coefficients(t)
        if lam == 0.0:
            z_next = c0 * z0_hat + ct * z
        else:
            aligned = kabsch_superpose(sketch.coords, z0_hat).apply(sketch.coords)
            z_next = c0 * z0_hat + ct * (1.0 - lam) * z + lam * (ct * gate * aligned)
        if t > 1:
            z_next = z_next + np.sqrt(schedule.beta_tilde(t)) * eps

        if motif is None:
            # zero-CoM convention: keep the centroid where the run started
            z_next = z_next - z_next.mean(axis=0) + center
        else:
            # the motif anchors the frame; its coordinates never move
            z_next[motif.indices] = motif.coords

        steps.append(StepRecord(t, _freeze(z.copy()), _freeze(z0_hat), phase, gate, rmsd))
        latched = latched or phase == PHASE_CONTROLLABLE
        z = z_next
        if progress is not None:
            progress(t)

    final = Backbone.from_coords(z, labels=labels, id=sketch.source_curve_id)
    return Trajectory(tuple(steps), final)


def sample_with_motif(
    denoiser: Denoiser,
    sketch: Sketch,
    motif: Motif,
    cfg: SamplerConfig,
    schedule: DiffusionSchedule,
    noise: NoiseSource | None = None,
    progress: Callable[[int], None] | None = None,
) -> Trajectory:
    """Motif-scaffolding run: motif coordinates are held fixed at every step
    while the scaffold diffuses around them."""
    if cfg.mode == "guided":
        cfg = replace(cfg, mode="motif-guided")
    return sample(denoiser, sketch, cfg, schedule, motif=motif, noise=noise, progress=progress)
