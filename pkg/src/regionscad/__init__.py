"""Region-selecting penalized image-on-scalar regression (SCAD2TV) with ADMM."""

from .core import (CoefficientField, Dataset, FitResult, GridShape, Image, PenaltyKind,
                   SolverConfig, devectorize, vectorize)
from .diffops import DiffOperator, build_diff_operator, gradient, tv_norm
from .penalty import ScadParams, scad_derivative, scad_prox, scad_value, soft_threshold
from .solver import SolverDivergence, assemble, extract_sparse_beta, fit, predict
from .dnc import Tiling, fit_tiled, make_tiling
from .synth import SynthConfig, default_truth, gaussian_random_field, generate

__version__ = "0.1.0"
