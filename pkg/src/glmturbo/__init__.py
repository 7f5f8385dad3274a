"""Unified turbo framework for generalized linear models.

Sparse recovery from nonlinear (e.g. 1-bit) measurements is reduced to a
sequence of standard linear problems, each handled by AMP, VAMP or SBL.
"""
from .channels import AwgnChannel, ProbitChannel, pseudo_data
from .glm import GlmLoopConfig, GlmProblem, GlmTrace, Solver, dnmse, run
from .messages import ContractError, GaussianBelief, combine, extrinsic
from .priors import BernoulliGaussianPrior, GaussianPrior, denoise, denoiser_divergence

__version__ = "0.1.0"

__all__ = [
    "AwgnChannel", "ProbitChannel", "pseudo_data",
    "GlmLoopConfig", "GlmProblem", "GlmTrace", "Solver", "dnmse", "run",
    "ContractError", "GaussianBelief", "combine", "extrinsic",
    "BernoulliGaussianPrior", "GaussianPrior", "denoise", "denoiser_divergence",
]
