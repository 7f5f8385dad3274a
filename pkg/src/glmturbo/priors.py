"""Scalar MMSE denoisers for separable signal priors.

``denoise`` returns the mean and variance of x under
q(x) ~ p0(x) N(x; r, sigma2), component-wise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .messages import ContractError


@dataclass(frozen=True)
class BernoulliGaussianPrior:
    """Spike-and-slab prior (1 - rho) delta(x) + rho N(x; 0, slab_var).

    ``slab_var`` defaults to 1/rho, which gives unit average energy per
    component.
    """

    rho: float
    slab_var: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ContractError(f"rho must lie in (0, 1], got {self.rho}")
        if self.slab_var is None:
            object.__setattr__(self, "slab_var", 1.0 / self.rho)
        if not self.slab_var > 0:
            raise ContractError(f"slab_var must be positive, got {self.slab_var}")

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def var(self) -> float:
        return self.rho * self.slab_var

    def posterior(self, r, sigma2):
        v0 = self.slab_var
        # slab-only posterior
        v_slab = v0 * sigma2 / (v0 + sigma2)
        m_slab = r * v0 / (v0 + sigma2)
        if self.rho == 1.0:
            return m_slab, v_slab
        # log of (1-rho)/rho * N(r;0,sigma2) / N(r;0,sigma2+v0)
        log_odds = (np.log1p(-self.rho) - np.log(self.rho)
                    + 0.5 * np.log1p(v0 / sigma2)
                    - 0.5 * r * r * v0 / (sigma2 * (sigma2 + v0)))
        pi = expit(-log_odds)
        x_hat = pi * m_slab
        tau = pi * v_slab + pi * expit(log_odds) * m_slab * m_slab
        return x_hat, tau


@dataclass(frozen=True)
class GaussianPrior:
    mean: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        if not self.var > 0:
            raise ContractError(f"var must be positive, got {self.var}")

    def posterior(self, r, sigma2):
        tau = self.var * sigma2 / (self.var + sigma2)
        x_hat = tau * (self.mean / self.var + r / sigma2)
        return x_hat, tau * np.ones_like(x_hat)


def _check(r, sigma2):
    r = np.asarray(r, dtype=float)
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), r.shape)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(sigma2))):
        raise ContractError("non-finite denoiser input")
    if np.any(sigma2 <= 0):
        raise ContractError("denoiser variance must be positive")
    return r, sigma2


def denoise(prior, r, sigma2):
    """Posterior mean and variance of x given r = x + N(0, sigma2)."""
    r, sigma2 = _check(r, sigma2)
    return prior.posterior(r, sigma2)


def denoiser_divergence(prior, r, sigma2):
    """Derivative of the posterior mean with respect to r.

    Uses d E[x|r] / dr = Var[x|r] / sigma2, which holds for any prior when
    the pseudo-likelihood is Gaussian.
    """
    r, sigma2 = _check(r, sigma2)
    _, tau = prior.posterior(r, sigma2)
    return tau / sigma2
