"""Gaussian message algebra for the turbo loop.

Messages are diagonal Gaussians stored as (mean, variance) pairs. The two
operations are the Gaussian product (``combine``) and the Gaussian division
that removes an incoming message from a posterior (``extrinsic``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VAR_MIN = 1e-11
VAR_MAX = 1e11


class ContractError(ValueError):
    """Raised when an input violates a documented precondition."""


@dataclass(frozen=True)
class GaussianBelief:
    """Per-component Gaussian message N(mean_i, variance_i)."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        var = np.asarray(self.variance, dtype=float)
        if var.ndim == 0:
            var = np.full(mean.shape, float(var))
        var = np.atleast_1d(var)
        if mean.shape != var.shape:
            raise ContractError(
                f"mean and variance shapes differ: {mean.shape} vs {var.shape}")
        if not np.all(np.isfinite(mean)):
            raise ContractError("non-finite mean in Gaussian message")
        if not np.all(np.isfinite(var)):
            raise ContractError("non-finite variance in Gaussian message")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", np.clip(var, VAR_MIN, VAR_MAX))

    def __len__(self):
        return self.mean.shape[0]

    @property
    def precision(self) -> np.ndarray:
        return 1.0 / self.variance


def _check_pair(a: GaussianBelief, b: GaussianBelief):
    if a.mean.shape != b.mean.shape:
        raise ContractError(
            f"message length mismatch: {a.mean.shape} vs {b.mean.shape}")


def extrinsic(posterior: GaussianBelief, prior: GaussianBelief) -> GaussianBelief:
    """Divide ``prior`` out of ``posterior``.

    Components whose precision difference is not positive carry no usable
    information; they are returned with variance ``VAR_MAX`` and the
    posterior mean.
    """
    _check_pair(posterior, prior)
    prec = 1.0 / posterior.variance - 1.0 / prior.variance
    ok = prec > 0
    var = np.clip(1.0 / np.where(ok, prec, 1.0), VAR_MIN, VAR_MAX)
    mean = var * (posterior.mean / posterior.variance - prior.mean / prior.variance)
    var = np.where(ok, var, VAR_MAX)
    mean = np.where(ok, mean, posterior.mean)
    return GaussianBelief(mean, var)


def combine(a: GaussianBelief, b: GaussianBelief) -> GaussianBelief:
    """Gaussian product of two messages (precision-weighted average)."""
    _check_pair(a, b)
    var = np.clip(1.0 / (1.0 / a.variance + 1.0 / b.variance), VAR_MIN, VAR_MAX)
    mean = var * (a.mean / a.variance + b.mean / b.variance)
    return GaussianBelief(mean, var)
