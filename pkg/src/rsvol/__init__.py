"""Bayesian realized stochastic volatility models with skew-t innovations."""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, NumericalError, RsvolError
from .innovations import Family, InnovationSpec, draw_innovation, standardized_pdf
from .model import Dataset, ModelParams, ModelSpec, PriorSpec, log_joint, parse_model, simulate
from .samplers import ChainConfig, PosteriorDraws, run_chain, run_chain_azst, run_chain_fsst
from .forecast import predict_one_step, var_es

__all__ = [
    "ChainConfig",
    "ConfigError",
    "DataError",
    "Dataset",
    "Family",
    "InnovationSpec",
    "ModelParams",
    "ModelSpec",
    "NumericalError",
    "PosteriorDraws",
    "PriorSpec",
    "RsvolError",
    "draw_innovation",
    "log_joint",
    "parse_model",
    "predict_one_step",
    "run_chain",
    "run_chain_azst",
    "run_chain_fsst",
    "simulate",
    "standardized_pdf",
    "var_es",
    "__version__",
]
