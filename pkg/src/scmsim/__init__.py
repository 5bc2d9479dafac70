"""Superposition coded modulation simulator for two-receiver broadcast channels."""

__version__ = "0.1.0"

from .config import RunConfig, load_config
from .constellation import make_square_qam, min_distance, superpose
from .data import HierSpec, bayes_reference, generate
from .errors import ConfigError, ContractError, ScmsimError, ShapeError
from .pipeline import (Metrics, evaluate, forward_deepscm, paf_sweep, psnr,
                       rate, rate_sweep, run_experiment, snr_sweep)
from .tensor import Tensor

__all__ = [
    "__version__",
    "RunConfig", "load_config",
    "make_square_qam", "min_distance", "superpose",
    "HierSpec", "bayes_reference", "generate",
    "ConfigError", "ContractError", "ScmsimError", "ShapeError",
    "Metrics", "evaluate", "forward_deepscm", "paf_sweep", "psnr",
    "rate", "rate_sweep", "run_experiment", "snr_sweep",
    "Tensor",
]
