"""Sparse Bayesian learning with EM hyper-parameter updates."""
from __future__ import annotations

import numpy as np

from .messages import GaussianBelief, extrinsic
from .vamp import lmmse_posterior, z_posterior

ALPHA_MIN = 1e-11
ALPHA_MAX = 1e11


def sbl_lmmse(alpha, A, y, sigma2):
    """Posterior mean and covariance of x under prod_i N(x_i; 0, 1/alpha_i)."""
    x_hat2, C2, _ = lmmse_posterior(A, y, sigma2, np.asarray(alpha, dtype=float))
    return x_hat2, C2


def sbl_em_update(x_hat2, C2, a=1e-10, b=1e-10):
    """EM update alpha_i = (1 + 2a) / (x_i^2 + C_ii + 2b), clamped."""
    second_moment = x_hat2 ** 2 + np.diag(C2) + 2.0 * b
    with np.errstate(divide="ignore"):
        alpha = (1.0 + 2.0 * a) / second_moment
    return np.clip(alpha, ALPHA_MIN, ALPHA_MAX)


def sbl_z_posterior(x_hat2, C2, A, gram=None, per_component=False):
    return z_posterior(x_hat2, C2, A, gram=gram, per_component=per_component)


class SblSolver:
    """SBL inner solver.

    alpha persists across outer iterations unless ``reset_alpha`` is set,
    in which case every call to ``iterate`` starts again from alpha = 1.
    """

    def __init__(self, A, a=1e-10, b=1e-10, per_component=False, reset_alpha=False):
        self.A = np.asarray(A, dtype=float)
        self.gram = self.A.T @ self.A
        self.a, self.b = a, b
        self.per_component = per_component
        self.reset_alpha = reset_alpha
        self.alpha = np.ones(self.A.shape[1])
        self.x_hat2 = np.zeros(self.A.shape[1])
        self.C2 = None

    def iterate(self, pseudo: GaussianBelief, n_iter: int = 1):
        if self.reset_alpha:
            self.alpha = np.ones(self.A.shape[1])
        for _ in range(n_iter):
            self.x_hat2, self.C2 = sbl_lmmse(self.alpha, self.A, pseudo.mean, pseudo.variance)
            self.alpha = sbl_em_update(self.x_hat2, self.C2, self.a, self.b)

    @property
    def x_hat(self):
        return self.x_hat2

    def z_extrinsic(self, pseudo: GaussianBelief) -> GaussianBelief:
        z_post, v_post = sbl_z_posterior(self.x_hat2, self.C2, self.A, self.gram,
                                         self.per_component)
        return extrinsic(GaussianBelief(z_post, v_post), pseudo)


def sbl(A, y, sigma2, n_iter, a=1e-10, b=1e-10):
    """Plain SBL on an SLM; returns the list of per-iteration x_hat2."""
    solver = SblSolver(A, a=a, b=b)
    pseudo = GaussianBelief(y, np.broadcast_to(np.asarray(sigma2, float), np.shape(y)))
    xs = []
    for _ in range(n_iter):
        solver.iterate(pseudo)
        xs.append(solver.x_hat.copy())
    return xs
