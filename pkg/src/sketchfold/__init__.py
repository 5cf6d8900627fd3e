"""Curve-conditioned protein backbone design toolkit.

Pipeline: abstract backbones to 3D curves, predict SSE annotations on curves,
synthesize parametric sketches, run sketch-guided denoising diffusion with
helix-gated scheduling, edit curves interactively, and benchmark topology
fitness with a Procrustes-based metric.
"""

from .backbone import Backbone, SseLabels, assign_sse_geometric, extract_curve, helix_fraction, parse_pdb_calpha
from .geometry import Curve, FrameField, Superposition, kabsch_superpose, resample_curve, spline_interpolate
from .metrics import mds_embed, tm_score_sequential, topology_fitness
from .sketcher import Sketch, sketch_from_curve

__version__ = "0.1.0"

__all__ = [
    "Backbone",
    "Curve",
    "FrameField",
    "Sketch",
    "SseLabels",
    "Superposition",
    "assign_sse_geometric",
    "extract_curve",
    "helix_fraction",
    "kabsch_superpose",
    "mds_embed",
    "parse_pdb_calpha",
    "resample_curve",
    "sketch_from_curve",
    "spline_interpolate",
    "tm_score_sequential",
    "topology_fitness",
]
