"""Tri-transformer Hawkes process toolkit."""

from .attention import ModelConfig, TriThpModel
from .encodings import EventSequence, temporal_encoding
from .estimator import TriThpEstimator, check_sequences
from .evaluator import EvalReport, evaluate
from .hawkes import HawkesParams, analytic_loglik, simulate_thinning
from .tensor import Tensor, grad_check
from .trainer import TrainConfig, train

__all__ = [
    "EvalReport",
    "EventSequence",
    "HawkesParams",
    "ModelConfig",
    "Tensor",
    "TrainConfig",
    "TriThpEstimator",
    "TriThpModel",
    "analytic_loglik",
    "check_sequences",
    "evaluate",
    "grad_check",
    "simulate_thinning",
    "temporal_encoding",
    "train",
]
