"""VAMP (MMSE form) for the standard linear model with diagonal noise.

One iteration is a denoising half (separable prior) followed by an LMMSE
half; each half hands the other an extrinsic (r, gamma) pair.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .amp import DivergenceError
from .messages import GaussianBelief, extrinsic
from .priors import denoise, denoiser_divergence

GAMMA_MIN = 1e-11


class SolverError(DivergenceError):
    """A linear system in the LMMSE step could not be factorized."""


@dataclass
class VampState:
    r1: np.ndarray
    gamma1: float
    x_hat1: np.ndarray = None
    x_hat2: np.ndarray = None
    C2: np.ndarray = None
    alpha2: float = None


def init_vamp_state(N, prior) -> VampState:
    """r1 = 0 and gamma1 equal to the prior precision."""
    return VampState(r1=np.zeros(N), gamma1=1.0 / prior.var)


def vamp_denoise_half(state: VampState, prior):
    """Denoise r1 and return ``(x_hat1, alpha1, r2, gamma2)``."""
    gamma1 = state.gamma1
    if not gamma1 > 0:
        raise DivergenceError(f"gamma1 must be positive, got {gamma1}")
    sigma2 = np.full(state.r1.shape, 1.0 / gamma1)
    x_hat1, _ = denoise(prior, state.r1, sigma2)
    alpha1 = float(np.mean(denoiser_divergence(prior, state.r1, sigma2)))
    if not (np.isfinite(alpha1) and alpha1 > 0):
        raise DivergenceError(f"denoiser divergence out of range: {alpha1}")
    eta1 = gamma1 / alpha1
    gamma2 = eta1 - gamma1
    if gamma2 <= 0:
        # mixture posteriors can be wider than the pseudo-likelihood
        gamma2 = GAMMA_MIN
    r2 = (eta1 * x_hat1 - gamma1 * state.r1) / gamma2
    return x_hat1, alpha1, r2, gamma2


def _factor(P):
    try:
        return linalg.cho_factor(P, lower=False, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(P) if np.all(np.isfinite(P)) else np.inf
        raise SolverError(f"LMMSE system not positive definite (cond ~ {cond:.3e})") from exc


def lmmse_posterior(A, y, sigma2, prior_precision, prior_mean=None):
    """Posterior of x under N(y; A x, diag(sigma2)) and N(x; prior_mean, diag(1/prior_precision)).

    ``prior_precision`` is a scalar or length-N vector. Returns
    ``(x_hat, C, AtDA)``.
    """
    A = np.asarray(A, dtype=float)
    N = A.shape[1]
    d = 1.0 / np.asarray(sigma2, dtype=float)
    AtDA = A.T @ (d[:, None] * A)
    P = AtDA + np.diag(np.broadcast_to(prior_precision, (N,)))
    cho = _factor(P)
    C = linalg.cho_solve(cho, np.eye(N))
    C = 0.5 * (C + C.T)
    rhs = A.T @ (d * y)
    if prior_mean is not None:
        rhs = rhs + np.broadcast_to(prior_precision, (N,)) * prior_mean
    x_hat = linalg.cho_solve(cho, rhs)
    return x_hat, C, AtDA


def vamp_lmmse_half(r2, gamma2, A, y, sigma2):
    """LMMSE half; returns ``(x_hat2, C2, alpha2, r1_next, gamma1_next)``."""
    if not gamma2 > 0:
        raise DivergenceError(f"gamma2 must be positive, got {gamma2}")
    A = np.asarray(A, dtype=float)
    N = A.shape[1]
    x_hat2, C2, AtDA = lmmse_posterior(A, y, sigma2, gamma2, prior_mean=r2)
    tr_C = np.trace(C2)
    alpha2 = gamma2 * tr_C / N
    # eta2 - gamma2 == tr(C AtDA) / tr(C), without the subtraction
    gamma1_next = max(float(np.sum(C2 * AtDA) / tr_C), GAMMA_MIN)
    r1_next = x_hat2 + (gamma2 / gamma1_next) * (x_hat2 - r2)
    if not (np.all(np.isfinite(x_hat2)) and np.all(np.isfinite(r1_next))):
        raise DivergenceError("non-finite VAMP LMMSE output")
    return x_hat2, C2, alpha2, r1_next, gamma1_next


def z_posterior(x_hat2, C2, A, gram=None, per_component=False):
    """Posterior mean of z = A x and its variance (averaged by default)."""
    A = np.asarray(A, dtype=float)
    z_post = A @ x_hat2
    if per_component:
        return z_post, np.einsum("ij,ij->i", A @ C2, A)
    if gram is None:
        gram = A.T @ A
    v_post = float(np.sum(C2 * gram)) / A.shape[0]
    return z_post, v_post


def vamp_z_posterior(x_hat2, C2, A, gram=None):
    return z_posterior(x_hat2, C2, A, gram=gram)


class VampSolver:
    """VAMP inner solver keeping (r1, gamma1) between calls."""

    def __init__(self, A, prior, state: VampState = None):
        self.A = np.asarray(A, dtype=float)
        self.gram = self.A.T @ self.A
        self.prior = prior
        self.state = state if state is not None else init_vamp_state(self.A.shape[1], prior)

    def iterate(self, pseudo: GaussianBelief, n_iter: int = 1):
        st = self.state
        for _ in range(n_iter):
            x_hat1, _, r2, gamma2 = vamp_denoise_half(st, self.prior)
            x_hat2, C2, alpha2, r1, gamma1 = vamp_lmmse_half(
                r2, gamma2, self.A, pseudo.mean, pseudo.variance)
            st = VampState(r1, gamma1, x_hat1, x_hat2, C2, alpha2)
        self.state = st

    @property
    def x_hat(self):
        return self.state.x_hat1

    def z_extrinsic(self, pseudo: GaussianBelief) -> GaussianBelief:
        z_post, v_post = vamp_z_posterior(self.state.x_hat2, self.state.C2, self.A, self.gram)
        return extrinsic(GaussianBelief(z_post, v_post), pseudo)


def vamp(A, y, sigma2, prior, n_iter, state: VampState = None):
    """Plain VAMP on an SLM; returns the list of per-iteration x_hat1."""
    solver = VampSolver(A, prior, state=state)
    pseudo = GaussianBelief(y, np.broadcast_to(np.asarray(sigma2, float), np.shape(y)))
    xs = []
    for _ in range(n_iter):
        solver.iterate(pseudo)
        xs.append(solver.x_hat.copy())
    return xs
