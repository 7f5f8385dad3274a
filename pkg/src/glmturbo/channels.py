"""Output channels p(y_a | z_a) and the component-wise MMSE stage.

A channel only has to provide ``posterior_moments``: the mean and variance
of z under p(y|z) N(z; m, v). ``pseudo_data`` turns those moments into the
equivalent additive-Gaussian observation (y_tilde, sigma2_tilde) that the
linear solvers consume.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx

from .messages import ContractError, GaussianBelief, extrinsic

PROBIT_STD_FLOOR = 1e-10

# Below u = -_CF_SWITCH both terms cancel catastrophically in closed form
# and are taken from the Laplace continued fraction instead.
_CF_SWITCH = 3.0
_CF_DEPTH = 100


def _truncated_normal_terms(u):
    """Return ``(R + u, 1 - R (u + R))`` with R the Gaussian hazard phi/Phi.

    The second value is the variance of a standard normal truncated to
    (-u, inf). For u < -3, with x = -u, the Mills-ratio continued fraction
    gives R = x + D_1 where D_k = k / (x + D_{k+1}); then R + u = D_1 and
    1 - R (u + R) = D_1 (D_2 - D_1), both free of cancellation.
    """
    u = np.asarray(u, dtype=float)
    hazard = np.sqrt(2.0 / np.pi) / erfcx(-u / np.sqrt(2.0))
    shift = hazard + u
    varfac = 1.0 - hazard * shift

    far = u < -_CF_SWITCH
    if np.any(far):
        x = -u[far]
        d = np.zeros_like(x)
        for k in range(_CF_DEPTH, 1, -1):
            d = k / (x + d)
        d1 = 1.0 / (x + d)
        shift = np.where(far, 0.0, shift)
        varfac = np.where(far, 0.0, varfac)
        shift[far] = d1
        varfac[far] = d1 * (d - d1)
    return shift, np.clip(varfac, 0.0, 1.0)


@dataclass(frozen=True)
class ProbitChannel:
    """1-bit channel y = sign(z + w), w ~ N(0, noise_std^2)."""

    noise_std: float

    def __post_init__(self):
        if not np.isfinite(self.noise_std) or self.noise_std < 0:
            raise ContractError(f"invalid probit noise_std {self.noise_std}")
        object.__setattr__(self, "noise_std",
                           max(float(self.noise_std), PROBIT_STD_FLOOR))

    def check_observation(self, y):
        y = np.asarray(y, dtype=float)
        if not np.all((y == 1.0) | (y == -1.0)):
            raise ContractError("probit observations must be exactly +1 or -1")
        return y

    def posterior_moments(self, y, prior: GaussianBelief) -> GaussianBelief:
        y = self.check_observation(y)
        m, v = prior.mean, prior.variance
        s2 = self.noise_std ** 2
        c2 = v + s2
        c = np.sqrt(c2)
        u = y * m / c
        shift, varfac = _truncated_normal_terms(u)
        # m + y v R / c rewritten so that both terms are cancellation free
        mean = m * (s2 / c2) + y * (v / c) * shift
        var = v * (s2 / c2) + (v * v / c2) * varfac
        # exact in real arithmetic; guards a one-ulp overshoot when saturated
        var = np.minimum(var, v)
        return GaussianBelief(mean, var)


@dataclass(frozen=True)
class AwgnChannel:
    """Additive Gaussian noise channel y = z + w, w ~ N(0, noise_var)."""

    noise_var: float

    def __post_init__(self):
        if not np.isfinite(self.noise_var) or self.noise_var <= 0:
            raise ContractError(f"invalid AWGN noise_var {self.noise_var}")

    def check_observation(self, y):
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise ContractError("non-finite observation")
        return y

    def posterior_moments(self, y, prior: GaussianBelief) -> GaussianBelief:
        y = self.check_observation(y)
        m, v = prior.mean, prior.variance
        var = v * self.noise_var / (v + self.noise_var)
        mean = var * (m / v + y / self.noise_var)
        return GaussianBelief(mean, var)

    def likelihood_message(self, y) -> GaussianBelief:
        # a Gaussian likelihood is its own extrinsic message
        y = self.check_observation(y)
        return GaussianBelief(y.copy(), np.full(y.shape, float(self.noise_var)))


def posterior_moments(channel, y, prior: GaussianBelief) -> GaussianBelief:
    y = np.asarray(y, dtype=float)
    if y.shape != prior.mean.shape:
        raise ContractError(
            f"observation length {y.shape} does not match prior {prior.mean.shape}")
    return channel.posterior_moments(y, prior)


def pseudo_data(channel, y, prior_from_A: GaussianBelief,
                average_variance=False) -> GaussianBelief:
    """Pseudo observation (y_tilde, sigma2_tilde) of the equivalent linear model.

    Returned as a GaussianBelief whose mean is y_tilde and whose variance is
    the per-component pseudo noise variance. With ``average_variance`` the
    posterior variances are replaced by their mean before the division, for
    inner solvers that work with a single scalar precision.

    Channels with a Gaussian likelihood skip the division and return it as is.
    """
    if hasattr(channel, "likelihood_message"):
        if np.shape(y) != prior_from_A.mean.shape:
            raise ContractError(f"y has shape {np.shape(y)}, prior has {prior_from_A.mean.shape}")
        return channel.likelihood_message(y)
    post = posterior_moments(channel, y, prior_from_A)
    if average_variance:
        post = GaussianBelief(post.mean, np.full(post.variance.shape, np.mean(post.variance)))
    return extrinsic(post, prior_from_A)
