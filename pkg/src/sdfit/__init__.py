"""Superpixel-guided deterministic two-view multi-model fitting."""

from .errors import (DegenerateInput, FitError, InsufficientData, InvalidArgument, InvalidSpec,
                     LengthMismatch, ModelDeficit, NoHypotheses, OutOfBounds, SingularModel)
from .geometry import Correspondence, CorrespondenceSet, Hypothesis, ModelKind
from .pipeline import FitResult, PipelineConfig, fit, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "Correspondence", "CorrespondenceSet", "DegenerateInput", "FitError", "FitResult",
    "Hypothesis", "InsufficientData", "InvalidArgument", "InvalidSpec", "LengthMismatch",
    "ModelDeficit", "ModelKind", "NoHypotheses", "OutOfBounds", "PipelineConfig",
    "SingularModel", "fit", "run_pipeline",
]
