"""Denoisers plugged into the reverse diffusion process.

The oracle denoiser returns a fixed target structure rigid-aligned to the
current latent; it bounds what guided sampling can achieve.  The toy denoiser
is a small learned sequence regressor (1D convolutions over the chain plus an
analytic linear-shrinkage skip) trained with the standard reconstruction
objective: predict the clean coordinates from a noised state and the step.
Both report SSE labels with their predictions so the helix gate can run.

Torch computations are pinned to one thread: models here are tiny and single
threading keeps runs bit-reproducible.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .backbone import Backbone, assign_sse_geometric
from .diffusion import DiffusionSchedule, Motif
from .errors import DimensionError, TrainingError
from .geometry import kabsch_superpose

_TOY_FORMAT_VERSION = 1


def _single_thread():
    if torch.get_num_threads() != 1:
        torch.set_num_threads(1)


class OracleDenoiser:
    """Returns the target structure aligned to the latent, at every step.

    When a motif is provided the alignment uses the motif rows (exact template
    registration) and the motif coordinates are reproduced verbatim.
    """

    def __init__(self, target: Backbone):
        if target.labels is None:
            raise DimensionError("oracle target must carry SSE labels")
        self._coords = np.asarray(target.coords, dtype=float)
        self._labels = target.labels

    @property
    def length(self) -> int | None:
        return len(self._coords)

    def predict_z0(
        self, z_t: np.ndarray, t: int, motif: Motif | None = None
    ) -> tuple[np.ndarray, str]:
        z_t = np.asarray(z_t, dtype=float)
        if z_t.shape != self._coords.shape:
            raise DimensionError(
                f"latent has shape {z_t.shape}, oracle target {self._coords.shape}"
            )
        if motif is not None and len(motif.indices) >= 3:
            sup = kabsch_superpose(self._coords[motif.indices], motif.coords)
        else:
            sup = kabsch_superpose(self._coords, z_t)
        pred = sup.apply(self._coords)
        if motif is not None:
            pred[motif.indices] = motif.coords
        return pred, self._labels


def oracle_denoiser(target: Backbone) -> OracleDenoiser:
    """Denoiser that always predicts ``target`` (aligned to the latent)."""
    return OracleDenoiser(target)


def _time_embedding(t: int, total: int, dim: int = 8) -> torch.Tensor:
    """Sinusoidal embedding of the step fraction t/total."""
    frac = t / max(total, 1)
    freqs = torch.arange(dim // 2, dtype=torch.float32)
    ang = frac * (2.0 ** freqs) * math.pi
    return torch.cat([torch.sin(ang), torch.cos(ang)])


class _ToyNet(nn.Module):
    """Conv1d refinement on top of a linear-shrinkage skip."""

    def __init__(self, hidden: int = 64, kernel: int = 5, t_dim: int = 8):
        super().__init__()
        self.t_dim = t_dim
        pad = kernel // 2
        self.net = nn.Sequential(
            nn.Conv1d(3 + t_dim, hidden, kernel, padding=pad),
            nn.SiLU(),
            nn.Conv1d(hidden, hidden, kernel, padding=pad),
            nn.SiLU(),
            nn.Conv1d(hidden, 3, kernel, padding=pad),
        )
        # start as the pure shrinkage estimator
        nn.init.zeros_(self.net[-1].weight)
        nn.init.zeros_(self.net[-1].bias)

    def forward(self, z_centered: torch.Tensor, t: int, total: int,
                abar_t: float, sigma0_sq: float) -> torch.Tensor:
        # optimal linear shrinkage toward the clean scale
        denom = abar_t * sigma0_sq + (1.0 - abar_t)
        skip = (math.sqrt(abar_t) * sigma0_sq / denom) * z_centered
        scale = math.sqrt(denom)
        feats = (z_centered / scale).T.unsqueeze(0)  # (1, 3, L)
        temb = _time_embedding(t, total, self.t_dim).to(z_centered.dtype)
        temb = temb[None, :, None].expand(1, self.t_dim, feats.shape[-1])
        out = self.net(torch.cat([feats, temb], dim=1))[0].T  # (L, 3)
        return skip + out


@dataclass(frozen=True)
class ToyDenoiserConfig:
    steps: int = 1500
    lr: float = 1e-3
    hidden: int = 64
    kernel: int = 5
    seed: int = 0


class ToyDenoiser:
    """Learned point-sequence regressor; accepts chains of any length."""

    def __init__(self, net: _ToyNet, schedule_T: int, sigma0_sq: float,
                 cfg: ToyDenoiserConfig, loss_history: list[float]):
        self._net = net
        self._net.eval()
        self._T = schedule_T
        self._sigma0_sq = float(sigma0_sq)
        self.config = cfg
        self.loss_history = list(loss_history)
        self._abar: np.ndarray | None = None

    def bind_schedule(self, schedule: DiffusionSchedule):
        """Remember the schedule so predictions can read alpha_bar_t."""
        self._abar = np.asarray(schedule.alpha_bar, dtype=float)
        return self

    @property
    def length(self) -> int | None:
        return None

    def predict_z0(
        self, z_t: np.ndarray, t: int, motif: Motif | None = None
    ) -> tuple[np.ndarray, str]:
        if self._abar is None:
            raise TrainingError("toy denoiser is not bound to a schedule")
        _single_thread()
        z_t = np.asarray(z_t, dtype=float)
        center = z_t.mean(axis=0)
        zt = torch.from_numpy((z_t - center).astype(np.float32))
        with torch.no_grad():
            pred = self._net(zt, t, self._T, float(self._abar[t]), self._sigma0_sq)
        out = pred.double().numpy() + center
        if motif is not None:
            out[motif.indices] = motif.coords
        labels = assign_sse_geometric(out).sequence
        return out, labels

    def save(self, path):
        state = {k: v.detach().numpy() for k, v in self._net.state_dict().items()}
        manifest = {
            "format_version": _TOY_FORMAT_VERSION,
            "kind": "toy-denoiser",
            "schedule_T": self._T,
            "sigma0_sq": self._sigma0_sq,
            "config": {
                "steps": self.config.steps,
                "lr": self.config.lr,
                "hidden": self.config.hidden,
                "kernel": self.config.kernel,
                "seed": self.config.seed,
            },
            "shapes": {k: list(v.shape) for k, v in state.items()},
        }
        np.savez(path, __manifest__=np.frombuffer(json.dumps(manifest).encode(), dtype=np.uint8),
                 **state)

    @staticmethod
    def load(path) -> "ToyDenoiser":
        data = np.load(path)
        manifest = json.loads(bytes(data["__manifest__"]).decode())
        if manifest.get("format_version") != _TOY_FORMAT_VERSION or manifest.get("kind") != "toy-denoiser":
            raise TrainingError(f"unrecognized toy denoiser file {path}")
        cfg = ToyDenoiserConfig(**manifest["config"])
        net = _ToyNet(hidden=cfg.hidden, kernel=cfg.kernel)
        state = {}
        for k, shape in manifest["shapes"].items():
            arr = data[k]
            if list(arr.shape) != shape:
                raise TrainingError(f"shape mismatch for {k}: {arr.shape} vs manifest {shape}")
            state[k] = torch.from_numpy(arr)
        net.load_state_dict(state)
        return ToyDenoiser(net, manifest["schedule_T"], manifest["sigma0_sq"], cfg, [])


def train_toy_denoiser(
    backbones: list[Backbone],
    schedule: DiffusionSchedule,
    cfg: ToyDenoiserConfig = ToyDenoiserConfig(),
) -> ToyDenoiser:
    """Fit the toy denoiser on a backbone corpus with the DDPM objective."""
    if not backbones:
        raise TrainingError("toy denoiser needs a non-empty training set")
    _single_thread()
    torch.manual_seed(cfg.seed)
    net = _ToyNet(hidden=cfg.hidden, kernel=cfg.kernel)
    gen = torch.Generator().manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)

    clean = []
    for bb in backbones:
        c = np.asarray(bb.coords, dtype=float)
        clean.append(torch.from_numpy((c - c.mean(axis=0)).astype(np.float32)))
    sigma0_sq = float(np.mean([float(c.var()) for c in clean]))

    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    abar = schedule.alpha_bar
    history: list[float] = []
    for step in range(cfg.steps):
        z0 = clean[int(rng.integers(len(clean)))]
        t = int(rng.integers(1, schedule.T + 1))
        eps = torch.randn(z0.shape, generator=gen)
        z_t = math.sqrt(abar[t]) * z0 + math.sqrt(1.0 - abar[t]) * eps
        pred = net(z_t, t, schedule.T, float(abar[t]), sigma0_sq)
        loss = torch.mean((pred - z0) ** 2)
        if not torch.isfinite(loss):
            raise TrainingError(f"toy denoiser loss diverged at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        history.append(float(loss.detach()))

    toy = ToyDenoiser(net, schedule.T, sigma0_sq, cfg, history)
    return toy.bind_schedule(schedule)
