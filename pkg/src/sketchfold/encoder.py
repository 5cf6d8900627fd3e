"""SSE prediction on curves from local geometry.

Three equivariant graph convolution layers run over the chain graph of a
densified curve with curvature as the input node feature; a parallel 1D
convolution stack reads the curvature profile directly.  The two tracks are
fused by multi-head attention (EGCL features query the convolution features)
and a linear head emits H/E/L logits per point.  Coordinates only ever enter
through pairwise distances, so predictions are invariant under rigid motion
of the input curve.

Training is deliberately small-scale: curves come from the synthetic bundle
corpus at three sampling granularities, and labels may be partially masked
out of the loss for robustness.  All torch work is single-threaded so runs
are bit-reproducible.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .backbone import SseLabels
from .errors import ConfigError, DimensionError, PreconditionError, TrainingError
from .geometry import Curve, curvature, spline_interpolate
from .synthetic import labeled_curve_pairs

_ENCODER_FORMAT_VERSION = 1

CLASS_ORDER = "HEL"
DENSE_FACTOR = 3.0
HIDDEN = 32
HEADS = 4
CNN_KERNEL = 15
MIN_CURVE_POINTS = 8


def _single_thread():
    if torch.get_num_threads() != 1:
        torch.set_num_threads(1)


def _mlp(in_dim: int, out_dim: int, hidden: int, dtype) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(in_dim, hidden, dtype=dtype),
        nn.SiLU(),
        nn.Linear(hidden, out_dim, dtype=dtype),
    )


class EGCL(nn.Module):
    """Equivariant graph convolution layer over an explicit edge list.

    Messages are built from node features and squared pairwise distances;
    coordinates are updated along difference vectors with inverse-degree
    aggregation; features are updated from the summed messages.
    """

    def __init__(self, in_dim: int, out_dim: int, hidden: int = HIDDEN, dtype=torch.float32):
        super().__init__()
        self.phi_e = _mlp(2 * in_dim + 2, hidden, hidden, dtype)
        self.phi_x = _mlp(hidden, 1, hidden, dtype)
        self.phi_h = _mlp(in_dim + hidden, out_dim, hidden, dtype)
        self.hidden = hidden

    def forward(
        self, h: torch.Tensor, x: torch.Tensor, edges: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        n = h.shape[0]
        if x.shape[0] != n:
            raise DimensionError(f"feature rows {n} != coordinate rows {x.shape[0]}")
        if edges.numel() == 0:
            m_sum = torch.zeros(n, self.hidden, dtype=h.dtype)
            return self.phi_h(torch.cat([h, m_sum], dim=-1)), x
        src, dst = edges[:, 0], edges[:, 1]
        if int(edges.max()) >= n or int(edges.min()) < 0:
            raise DimensionError("edge indices reference missing nodes")
        diff = x[src] - x[dst]
        dist_sq = (diff * diff).sum(dim=-1, keepdim=True)
        attr = torch.ones_like(dist_sq)
        m = self.phi_e(torch.cat([h[src], h[dst], dist_sq, attr], dim=-1))
        m_sum = torch.zeros(n, self.hidden, dtype=h.dtype)
        m_sum.index_add_(0, src, m)
        deg = torch.zeros(n, 1, dtype=h.dtype)
        deg.index_add_(0, src, torch.ones(len(src), 1, dtype=h.dtype))
        deg = deg.clamp(min=1.0)
        shift = torch.zeros_like(x)
        shift.index_add_(0, src, diff * self.phi_x(m))
        x_out = x + shift / deg
        h_out = self.phi_h(torch.cat([h, m_sum], dim=-1))
        return h_out, x_out


def egcl_forward(
    h: np.ndarray, x: np.ndarray, edges: np.ndarray, layer: EGCL
) -> tuple[np.ndarray, np.ndarray]:
    """Run one EGCL on numpy inputs (edge pairs may be empty)."""
    dtype = next(layer.parameters()).dtype
    ht = torch.as_tensor(np.atleast_2d(h), dtype=dtype)
    xt = torch.as_tensor(x, dtype=dtype)
    et = torch.as_tensor(np.asarray(edges, dtype=np.int64).reshape(-1, 2))
    with torch.no_grad():
        ho, xo = layer(ht, xt, et)
    return ho.numpy(), xo.numpy()


def chain_edges(n: int) -> torch.Tensor:
    """Directed edge list of the chain graph: |i - j| = 1, both directions."""
    fwd = torch.stack([torch.arange(n - 1), torch.arange(1, n)], dim=1)
    return torch.cat([fwd, fwd.flip(dims=[1])], dim=0)


class CurveEncoderModel(nn.Module):
    """Three EGCLs + curvature CNN fused by attention into H/E/L logits."""

    def __init__(self, hidden: int = HIDDEN, heads: int = HEADS,
                 cnn_kernel: int = CNN_KERNEL, dtype=torch.float32):
        super().__init__()
        self.hidden = hidden
        self.heads = heads
        self.cnn_kernel = cnn_kernel
        self.egcls = nn.ModuleList(
            [
                EGCL(1, hidden, hidden, dtype),
                EGCL(hidden, hidden, hidden, dtype),
                EGCL(hidden, hidden, hidden, dtype),
            ]
        )
        pad = cnn_kernel // 2
        self.cnn = nn.Sequential(
            nn.Conv1d(1, hidden, cnn_kernel, padding=pad, dtype=dtype),
            nn.SiLU(),
            nn.Conv1d(hidden, hidden, cnn_kernel, padding=pad, dtype=dtype),
        )
        self.attn = nn.MultiheadAttention(hidden, heads, batch_first=True, dtype=dtype)
        self.head = nn.Linear(hidden, 3, dtype=dtype)

    def forward(self, kappa: torch.Tensor, coords: torch.Tensor) -> torch.Tensor:
        n = kappa.shape[0]
        edges = chain_edges(n)
        h = kappa.unsqueeze(-1)
        x = coords
        for layer in self.egcls:
            h, x = layer(h, x, edges)
        hc = self.cnn(kappa[None, None, :])[0].T  # (n, hidden)
        # attention integrates the CNN track into the EGCL track; the residual
        # keeps the per-point features (cross-attention alone is position-blind)
        attended, _ = self.attn(h[None], hc[None], hc[None])
        fused = h + hc + attended[0]
        return self.head(fused)


@dataclass(frozen=True)
class TrainingConfig:
    """Encoder training hyperparameters."""

    learning_rate: float = 1e-4
    epochs: int = 100
    batch_size: int = 1
    mask_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if not 0.0 <= self.mask_fraction <= 0.5:
            raise ConfigError("mask fraction must be in [0, 0.5]")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch size must be >= 1")


@dataclass
class TrainingHistory:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    holdout_accuracy: list[float] = field(default_factory=list)


def _curve_features(curve: Curve):
    dense = spline_interpolate(curve, DENSE_FACTOR)
    kappa = curvature(dense.points, dense.params).kappa
    return (
        torch.from_numpy(kappa.astype(np.float32)),
        torch.from_numpy(dense.points.astype(np.float32)),
        torch.from_numpy(dense.knot_indices.astype(np.int64)),
    )


def encode_curve(model: CurveEncoderModel, curve: Curve) -> np.ndarray:
    """Per-point H/E/L probabilities for a curve (rows sum to 1)."""
    if len(curve) < MIN_CURVE_POINTS:
        raise PreconditionError(
            f"encoding needs >= {MIN_CURVE_POINTS} points, got {len(curve)}"
        )
    _single_thread()
    kappa, coords, knots = _curve_features(curve)
    dtype = next(model.parameters()).dtype
    model.eval()
    with torch.no_grad():
        logits = model(kappa.to(dtype), coords.to(dtype))
        probs = torch.softmax(logits[knots], dim=-1)
    return probs.double().numpy()


def labels_from_probabilities(probs: np.ndarray) -> SseLabels:
    """Argmax decode of encoder output into an SSE label string."""
    return SseLabels("".join(CLASS_ORDER[int(k)] for k in np.argmax(probs, axis=1)))


def train_encoder(
    dataset: list[tuple[Curve, SseLabels]],
    cfg: TrainingConfig = TrainingConfig(),
    holdout: list[tuple[Curve, SseLabels]] | None = None,
) -> tuple[CurveEncoderModel, TrainingHistory]:
    """Train the encoder with cross-entropy under random partial label masking.

    Deterministic for a given seed.  Returns the model and the loss/accuracy
    trace (holdout accuracy included when a holdout split is supplied).
    """
    if not dataset:
        raise TrainingError("empty training set")
    _single_thread()
    torch.manual_seed(cfg.seed)
    model = CurveEncoderModel()

    prepared = []
    for curve, labels in dataset:
        seq = labels.sequence if isinstance(labels, SseLabels) else str(labels)
        if len(seq) != len(curve):
            raise TrainingError(
                f"labels ({len(seq)}) misaligned with curve points ({len(curve)})"
            )
        kappa, coords, knots = _curve_features(curve)
        target = torch.tensor([CLASS_ORDER.index(c) for c in seq], dtype=torch.int64)
        prepared.append((kappa, coords, knots, target))

    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    rng = np.random.default_rng(cfg.seed)
    history = TrainingHistory()

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(prepared))
        total_loss = 0.0
        hits = 0
        count = 0
        pending = 0
        opt.zero_grad()
        for pos, idx in enumerate(order):
            kappa, coords, knots, target = prepared[idx]
            keep = torch.from_numpy(rng.random(len(target)) >= cfg.mask_fraction)
            if not bool(keep.any()):
                keep[int(rng.integers(len(target)))] = True
            logits = model(kappa, coords)[knots]
            loss = loss_fn(logits[keep], target[keep])
            if not torch.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}")
            loss.backward()
            pending += 1
            if pending == cfg.batch_size or pos == len(order) - 1:
                opt.step()
                opt.zero_grad()
                pending = 0
            total_loss += float(loss.detach())
            hits += int((logits.argmax(dim=-1) == target).sum())
            count += len(target)
        history.train_loss.append(total_loss / len(prepared))
        history.train_accuracy.append(hits / count)
        if holdout:
            history.holdout_accuracy.append(evaluate_encoder(model, holdout))
    return model, history


def evaluate_encoder(
    model: CurveEncoderModel, dataset: list[tuple[Curve, SseLabels]]
) -> float:
    """Mean per-point label accuracy over a dataset."""
    hits = 0
    count = 0
    for curve, labels in dataset:
        seq = labels.sequence if isinstance(labels, SseLabels) else str(labels)
        pred = labels_from_probabilities(encode_curve(model, curve)).sequence
        hits += sum(1 for a, b in zip(pred, seq) if a == b)
        count += len(seq)
    return hits / count


def generate_synthetic_sse_dataset(n: int, seed: int) -> list[tuple[Curve, SseLabels]]:
    """Deterministic synthetic (curve, labels) corpus at three granularities."""
    if n < 1:
        raise ConfigError("dataset size must be >= 1")
    return labeled_curve_pairs(n, seed)


def save_encoder(model: CurveEncoderModel, path) -> None:
    """Write the parameter dump with a shape manifest."""
    state = {k: v.detach().numpy() for k, v in model.state_dict().items()}
    manifest = {
        "format_version": _ENCODER_FORMAT_VERSION,
        "kind": "curve-encoder",
        "hidden": model.hidden,
        "heads": model.heads,
        "cnn_kernel": model.cnn_kernel,
        "shapes": {k: list(v.shape) for k, v in state.items()},
    }
    np.savez(path, __manifest__=np.frombuffer(json.dumps(manifest).encode(), dtype=np.uint8),
             **state)


def load_encoder(path) -> CurveEncoderModel:
    """Load a parameter dump, validating every shape against the manifest."""
    data = np.load(path)
    manifest = json.loads(bytes(data["__manifest__"]).decode())
    if manifest.get("format_version") != _ENCODER_FORMAT_VERSION or manifest.get("kind") != "curve-encoder":
        raise TrainingError(f"unrecognized encoder file {path}")
    model = CurveEncoderModel(
        hidden=manifest["hidden"], heads=manifest["heads"], cnn_kernel=manifest["cnn_kernel"]
    )
    state = {}
    for k, shape in manifest["shapes"].items():
        arr = data[k]
        if list(arr.shape) != shape:
            raise TrainingError(f"shape mismatch for {k}: {arr.shape} vs manifest {shape}")
        state[k] = torch.from_numpy(arr)
    model.load_state_dict(state)
    return model
