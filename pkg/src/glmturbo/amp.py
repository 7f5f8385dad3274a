"""Bayesian AMP for the (heteroscedastic) standard linear model, and GAMP.

``amp_step`` runs one variable-node/factor-node sweep on
y = A x + w, w ~ N(0, diag(sigma2)). ``gamp_step`` is the classical GAMP
recursion written directly in terms of a channel's posterior moments; it is
kept as an independent reference for the turbo construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .messages import ContractError, GaussianBelief
from .priors import denoise


class DivergenceError(ArithmeticError):
    """An iterative solver produced non-finite or invalid state."""


@dataclass(frozen=True)
class AmpState:
    x_hat: np.ndarray
    tau: np.ndarray
    Z: np.ndarray
    V: np.ndarray
    Sigma: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class GampState:
    x_hat: np.ndarray
    tau: np.ndarray
    Z: np.ndarray
    V: np.ndarray
    s_hat: np.ndarray
    tau_s: np.ndarray


def _check_dims(A, A_sq, y, n):
    M, N = A.shape
    if A_sq.shape != A.shape:
        raise ContractError(f"A_sq shape {A_sq.shape} != A shape {A.shape}")
    if np.shape(y) != (M,):
        raise ContractError(f"observation length {np.shape(y)} != {M}")
    if n != N:
        raise ContractError(f"state length {n} != {N}")


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DivergenceError("non-finite AMP state")


def init_amp_state(A_sq, prior, z0=None, v0=None) -> AmpState:
    """Start at the prior: x_hat = prior mean, tau = prior variance.

    Z/V default to 0 and A_sq @ tau; the turbo loop passes its initial
    extrinsic message instead so that (Z, V) and (z_ext, v_ext) coincide.
    """
    M, N = A_sq.shape
    x_hat = np.full(N, float(prior.mean))
    tau = np.full(N, float(prior.var))
    Z = np.zeros(M) if z0 is None else np.broadcast_to(np.asarray(z0, float), (M,)).copy()
    V = A_sq @ tau if v0 is None else np.broadcast_to(np.asarray(v0, float), (M,)).copy()
    return AmpState(x_hat, tau, Z, V, np.ones(N), x_hat.copy())


def amp_step(state: AmpState, A, A_sq, y, sigma2, prior, damping=1.0) -> AmpState:
    _check_dims(A, A_sq, y, state.x_hat.shape[0])
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), np.shape(y))

    denom = sigma2 + state.V
    resid = (y - state.Z) / denom
    Sigma = 1.0 / (A_sq.T @ (1.0 / denom))
    r = state.x_hat + Sigma * (A.T @ resid)
    _check_finite(Sigma, r)
    if np.any(Sigma <= 0):
        raise DivergenceError("non-positive AMP Sigma")

    x_hat, tau = denoise(prior, r, Sigma)
    V = A_sq @ tau
    # Onsager term reuses the residual scaled by the previous V
    Z = A @ x_hat - V * resid

    if damping != 1.0:
        x_hat = damping * x_hat + (1.0 - damping) * state.x_hat
        Z = damping * Z + (1.0 - damping) * state.Z
        V = damping * V + (1.0 - damping) * state.V
    _check_finite(x_hat, tau, Z, V)
    return AmpState(x_hat, tau, Z, V, Sigma, r)


def amp_extrinsic(state: AmpState) -> GaussianBelief:
    """Extrinsic message on z leaving the AMP module: exactly (Z, V)."""
    _check_finite(state.Z, state.V)
    if np.any(state.V <= 0):
        raise DivergenceError("non-positive AMP V")
    return GaussianBelief(state.Z, state.V)


def init_gamp_state(A_sq, prior, z0=0.0, v0=1e8) -> GampState:
    M, N = A_sq.shape
    return GampState(
        x_hat=np.full(N, float(prior.mean)),
        tau=np.full(N, float(prior.var)),
        Z=np.full(M, float(z0)),
        V=np.full(M, float(v0)),
        s_hat=np.zeros(M),
        tau_s=np.zeros(M),
    )


def gamp_step(state: GampState, A, A_sq, channel, y, prior, damping=1.0) -> GampState:
    _check_dims(A, A_sq, y, state.x_hat.shape[0])
    Z_old, V_old = state.Z, state.V
    post = channel.posterior_moments(np.asarray(y, float), GaussianBelief(Z_old, V_old))

    s_hat = (post.mean - Z_old) / V_old
    tau_s = (V_old - post.variance) / V_old ** 2
    Sigma = 1.0 / (A_sq.T @ tau_s)
    r = state.x_hat + Sigma * (A.T @ s_hat)
    _check_finite(Sigma, r)
    if np.any(Sigma <= 0):
        raise DivergenceError("non-positive GAMP Sigma")

    x_hat, tau = denoise(prior, r, Sigma)
    V = A_sq @ tau
    Z = A @ x_hat - V * s_hat

    if damping != 1.0:
        x_hat = damping * x_hat + (1.0 - damping) * state.x_hat
        Z = damping * Z + (1.0 - damping) * Z_old
        V = damping * V + (1.0 - damping) * V_old
    _check_finite(x_hat, tau, Z, V)
    return GampState(x_hat, tau, Z, V, s_hat, tau_s)


class AmpSolver:
    """AMP inner solver with state carried across calls (warm start)."""

    def __init__(self, A, prior, state: AmpState = None, damping=1.0):
        self.A = np.asarray(A, dtype=float)
        self.A_sq = self.A * self.A
        self.prior = prior
        self.damping = damping
        self.state = state if state is not None else init_amp_state(self.A_sq, prior)

    def iterate(self, pseudo: GaussianBelief, n_iter: int = 1):
        for _ in range(n_iter):
            self.state = amp_step(self.state, self.A, self.A_sq, pseudo.mean,
                                  pseudo.variance, self.prior, self.damping)

    @property
    def x_hat(self):
        return self.state.x_hat

    def z_extrinsic(self, pseudo: GaussianBelief) -> GaussianBelief:
        return amp_extrinsic(self.state)


def amp(A, y, sigma2, prior, n_iter, state: AmpState = None, damping=1.0):
    """Plain AMP on an SLM; returns the list of per-iteration x_hat."""
    solver = AmpSolver(A, prior, state=state, damping=damping)
    pseudo = GaussianBelief(y, np.broadcast_to(np.asarray(sigma2, float), np.shape(y)))
    xs = []
    for _ in range(n_iter):
        solver.iterate(pseudo)
        xs.append(solver.x_hat.copy())
    return xs
