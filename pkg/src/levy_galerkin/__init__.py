"""Galerkin approximations of parabolic SPDEs driven by additive pure-jump
Levy noise, with exact (time-step free) solution evaluation and weak/strong
convergence experiments."""
from .config import ExperimentConfig, default_config, load_config
from .fem import FemMesh, SpectralTruncation
from .levy import LevyMeasureSpec, sample_path, substream
from .mild import ModelSpec, solve_mild

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "FemMesh",
    "LevyMeasureSpec",
    "ModelSpec",
    "SpectralTruncation",
    "default_config",
    "load_config",
    "sample_path",
    "solve_mild",
    "substream",
]
