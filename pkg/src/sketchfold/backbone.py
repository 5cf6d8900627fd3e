"""Backbone ingestion and curve extraction.

A Backbone is an ordered list of residues (chain id, residue number, Calpha
coordinate) with per-residue SSE labels.  This module parses Calpha traces
out of PDB text, assigns H/E/L labels from Calpha geometry alone, reduces a
labeled backbone to its topology curve, and computes the helix-percentage
operator used by the guidance gate.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyStructureError,
    InvalidCurveError,
    PdbParseError,
    PreconditionError,
)
from .geometry import Curve, arc_lengths, _freeze, _interp_along

# contiguous Calpha-Calpha distance window; out-of-window steps are flagged
# as chain breaks, never rejected
CA_DIST_MIN = 2.0
CA_DIST_MAX = 4.5

# Calpha-trace helix bands: i->i+3 and i->i+4 distances (Angstrom).
# Nominal alpha-helix values are ~5.1 and ~6.2; the lower edges are relaxed
# so that helices wound around curved axes still land inside the bands.
HELIX_D13 = (4.6, 6.0)
HELIX_D14 = (5.5, 6.7)
HELIX_MIN_RUN = 5
# strand: long i->i+3 span over nearly straight local geometry
STRAND_D13_MIN = 9.0
STRAND_STRAIGHTNESS = 0.97
STRAND_MIN_RUN = 3

DEFAULT_CURVE_RATE = 0.4


@dataclass(frozen=True)
class SseLabels:
    """Per-residue SSE sequence over {H, E, L} with a run-length view."""

    sequence: str
    flagged: bool = False

    def __post_init__(self):
        if any(c not in "HEL" for c in self.sequence):
            raise PreconditionError("SSE labels must be over the alphabet HEL")

    def __len__(self) -> int:
        return len(self.sequence)

    def __str__(self) -> str:
        return self.sequence

    @property
    def segments(self) -> list[tuple[str, int, int]]:
        """Maximal runs as (label, start, stop) with half-open indices."""
        return run_segments(self.sequence)


def run_segments(labels: str) -> list[tuple[str, int, int]]:
    """Run-length segmentation of a label string into (label, start, stop)."""
    out = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            out.append((labels[start], start, i))
            start = i
    return out


def helix_fraction(labels: SseLabels | str) -> float:
    """Fraction of residues labeled H (the helix-percentage operator)."""
    seq = labels.sequence if isinstance(labels, SseLabels) else labels
    if not seq:
        raise PreconditionError("helix fraction of empty labels")
    return seq.count("H") / len(seq)


@dataclass(frozen=True)
class Backbone:
    """Calpha trace: per-residue chain id, residue number, and coordinate.

    Labels are optional (None means the backbone has not been annotated yet);
    chain breaks are recorded, not rejected.
    """

    coords: np.ndarray
    chain_ids: tuple[str, ...]
    residue_numbers: tuple[int, ...]
    labels: str | None = None
    id: str = ""

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise PreconditionError(f"coords must be (n, 3), got {coords.shape}")
        n = len(coords)
        if n == 0:
            raise EmptyStructureError("backbone has no residues")
        if len(self.chain_ids) != n or len(self.residue_numbers) != n:
            raise PreconditionError("chain ids / residue numbers must match coords")
        if self.labels is not None:
            if len(self.labels) != n:
                raise PreconditionError("labels length must equal residue count")
            if any(c not in "HEL" for c in self.labels):
                raise PreconditionError("labels must be over the alphabet HEL")
        object.__setattr__(self, "coords", _freeze(coords))
        object.__setattr__(self, "chain_ids", tuple(self.chain_ids))
        object.__setattr__(self, "residue_numbers", tuple(int(r) for r in self.residue_numbers))

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def chain_breaks(self) -> list[int]:
        """Indices i where the step i -> i+1 is not a contiguous chain bond."""
        breaks = []
        d = np.linalg.norm(np.diff(self.coords, axis=0), axis=1)
        for i in range(len(self) - 1):
            same_chain = self.chain_ids[i] == self.chain_ids[i + 1]
            if not same_chain or not (CA_DIST_MIN <= d[i] <= CA_DIST_MAX):
                breaks.append(i)
        return breaks

    def with_labels(self, labels: SseLabels | str) -> "Backbone":
        seq = labels.sequence if isinstance(labels, SseLabels) else labels
        return Backbone(self.coords, self.chain_ids, self.residue_numbers, seq, self.id)

    @staticmethod
    def from_coords(coords: np.ndarray, labels: str | None = None, id: str = "") -> "Backbone":
        """Single-chain backbone from bare coordinates (chain A, numbered from 1)."""
        n = len(coords)
        return Backbone(coords, ("A",) * n, tuple(range(1, n + 1)), labels, id)

    def to_json(self) -> str:
        doc = {
            "residues": [
                [self.chain_ids[i], self.residue_numbers[i], *self.coords[i].tolist()]
                for i in range(len(self))
            ]
        }
        if self.labels is not None:
            doc["labels"] = self.labels
        if self.id:
            doc["id"] = self.id
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str | bytes) -> "Backbone":
        doc = json.loads(text)
        residues = doc["residues"]
        coords = np.asarray([[r[2], r[3], r[4]] for r in residues], dtype=float)
        chains = tuple(str(r[0]) for r in residues)
        numbers = tuple(int(r[1]) for r in residues)
        return Backbone(coords, chains, numbers, doc.get("labels"), doc.get("id", ""))


def parse_pdb_calpha(data: bytes | str) -> Backbone:
    """Extract the Calpha trace from PDB text (ATOM records, v3.3 columns).

    Keeps the first altloc seen per residue, orders residues by
    (chain, residue number, insertion code), and initializes labels to all-L.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    seen: dict[tuple, tuple] = {}
    order: list[tuple] = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.startswith("ATOM"):
            continue
        name = line[12:16].strip()
        if name != "CA":
            continue
        chain = line[21:22]
        try:
            resseq = int(line[22:26])
        except ValueError:
            raise PdbParseError(f"unreadable residue number {line[22:26]!r}", lineno)
        icode = line[26:27]
        key = (chain, resseq, icode)
        if key in seen:
            continue  # later altloc (or duplicate) of a residue already kept
        try:
            xyz = (float(line[30:38]), float(line[38:46]), float(line[46:54]))
        except ValueError:
            raise PdbParseError(f"unreadable coordinates {line[30:54]!r}", lineno)
        seen[key] = xyz
        order.append(key)
    if not seen:
        raise EmptyStructureError("no CA ATOM records found")
    order.sort(key=lambda k: (k[0], k[1], k[2]))
    coords = np.asarray([seen[k] for k in order], dtype=float)
    chains = tuple(k[0] for k in order)
    numbers = tuple(k[1] for k in order)
    return Backbone(coords, chains, numbers, "L" * len(order))


def _mark_runs(cand: np.ndarray, min_run: int, extend: int, out: list[str], label: str):
    """Write ``label`` over candidate runs of length >= min_run, extended by
    ``extend`` positions (the window a candidate attests to)."""
    n = len(cand)
    i = 0
    while i < n:
        if not cand[i]:
            i += 1
            continue
        j = i
        while j < n and cand[j]:
            j += 1
        if j - i >= min_run:
            for k in range(i, min(j + extend, len(out))):
                if out[k] == "L":
                    out[k] = label
        i = j


def assign_sse_geometric(backbone: Backbone | np.ndarray) -> SseLabels:
    """Assign H/E/L labels from Calpha geometry alone.

    Residue i is a helix candidate when its i->i+3 and i->i+4 distances sit in
    the alpha-helix bands; candidate runs of >= 5 become helices (the window a
    candidate attests to extends the run by 4).  Strand candidates need a long
    i->i+3 span over near-straight local geometry, runs of >= 3.  Everything
    else is loop.  Chains shorter than 5 residues come back all-L, flagged.
    """
    coords = backbone.coords if isinstance(backbone, Backbone) else np.asarray(backbone, dtype=float)
    n = len(coords)
    if n < 5:
        return SseLabels("L" * n, flagged=True)
    out = ["L"] * n

    d13 = np.linalg.norm(coords[3:] - coords[:-3], axis=1)
    d14 = np.linalg.norm(coords[4:] - coords[:-4], axis=1)
    helix_cand = np.zeros(n, dtype=bool)
    helix_cand[: n - 4] = (
        (d13[: n - 4] >= HELIX_D13[0])
        & (d13[: n - 4] <= HELIX_D13[1])
        & (d14 >= HELIX_D14[0])
        & (d14 <= HELIX_D14[1])
    )
    _mark_runs(helix_cand, HELIX_MIN_RUN, 4, out, "H")

    step = np.linalg.norm(np.diff(coords, axis=0), axis=1)
    path3 = step[:-2] + step[1:-1] + step[2:]
    strand_cand = np.zeros(n, dtype=bool)
    strand_cand[: n - 3] = (d13 > STRAND_D13_MIN) & (d13 / path3 > STRAND_STRAIGHTNESS)
    _mark_runs(strand_cand, STRAND_MIN_RUN, 3, out, "E")

    return SseLabels("".join(out))


def _segment_axis_points(coords: np.ndarray) -> np.ndarray:
    """Project segment Calphas onto their least-squares (principal) axis.

    The axis is oriented along the segment (first to last residue) so the
    construction is equivariant under rigid transforms.
    """
    center = coords.mean(axis=0)
    centered = coords - center
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    axis = vt[0]
    if np.dot(axis, coords[-1] - coords[0]) < 0:
        axis = -axis
    proj = centered @ axis
    return center + np.outer(proj, axis)


def _smooth_once(points: np.ndarray) -> np.ndarray:
    """One pass of a 3-point moving average; endpoints untouched."""
    out = points.copy()
    if len(points) > 2:
        out[1:-1] = (points[:-2] + points[1:-1] + points[2:]) / 3.0
    return out


def _vote_labels(labels: str, positions: np.ndarray, window: float) -> str:
    """Label each resampled position by majority vote over the nearby residues.

    Ties go to the label of the nearest residue.
    """
    n = len(labels)
    out = []
    for f in positions:
        lo = max(0, int(np.floor(f - window)))
        hi = min(n - 1, int(np.ceil(f + window)))
        votes = labels[lo : hi + 1]
        nearest = labels[int(round(min(max(f, 0.0), n - 1)))]
        counts = {c: votes.count(c) for c in "HEL"}
        top = max(counts.values())
        tied = [c for c, k in counts.items() if k == top]
        out.append(nearest if nearest in tied else tied[0])
    return "".join(out)


def extract_curve(backbone: Backbone, rate: float = DEFAULT_CURVE_RATE) -> Curve:
    """Reduce a labeled backbone to its topology curve.

    Helix and strand segments are replaced by points on the segment's
    least-squares axis; loops keep their Calpha coordinates.  The result is
    resampled to round(rate * residue count) points, lightly smoothed, and
    labeled by averaging the labels of the nearest residues.  Chains are
    processed independently and concatenated in chain order.
    """
    if backbone.labels is None:
        raise PreconditionError("extract_curve needs a labeled backbone")
    if not (0 < rate <= 1.5):
        raise PreconditionError(f"rate must be in (0, 1.5], got {rate}")

    pieces = []
    start = 0
    chains = backbone.chain_ids
    for i in range(1, len(backbone) + 1):
        if i == len(backbone) or chains[i] != chains[start]:
            pieces.append((start, i))
            start = i

    skeleton = np.empty_like(backbone.coords)
    for lo, hi in pieces:
        labels = backbone.labels[lo:hi]
        coords = backbone.coords[lo:hi]
        for lab, s, e in run_segments(labels):
            seg = coords[s:e]
            if lab in "HE" and e - s >= 3:
                skeleton[lo + s : lo + e] = _segment_axis_points(seg)
            else:
                skeleton[lo + s : lo + e] = seg

    n_res = len(backbone)
    m = int(round(rate * n_res))
    if m < 2:
        raise InvalidCurveError(f"rate {rate} over {n_res} residues yields < 2 curve points")

    cum = arc_lengths(skeleton)
    targets = np.linspace(0.0, cum[-1], m)
    pts = _interp_along(skeleton, cum, targets)
    pts = _smooth_once(pts)

    # fractional residue position of each curve point, for label averaging
    frac = np.interp(targets, cum, np.arange(n_res, dtype=float))
    window = max(1.0, n_res / (2.0 * m))
    labels = _vote_labels(backbone.labels, frac, window)
    return Curve(pts, labels=labels, id=backbone.id)
