"""Synthetic 1-bit compressed sensing problems.

Matrices are A = U S V^T with Haar-distributed U, V and geometrically spaced
singular values hitting a target condition number. All randomness comes from
numpy ``SeedSequence`` objects, so a (master seed, kappa index, trial) triple
identifies every artifact.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channels import ProbitChannel
from .glm import GlmProblem
from .priors import BernoulliGaussianPrior


@dataclass(frozen=True)
class MatrixSpec:
    M: int
    N: int
    kappa: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ValueError("matrix dimensions must be positive")
        if not self.kappa >= 1.0:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")


@dataclass(frozen=True)
class SignalSpec:
    N: int
    rho: float = 0.1
    slab_var: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if self.slab_var is None:
            object.__setattr__(self, "slab_var", 1.0 / self.rho)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_orthogonal(n, seed=None) -> np.ndarray:
    """Haar-distributed n x n orthogonal matrix.

    QR of a Gaussian matrix, with columns rescaled by sign(diag(R)); without
    that correction the distribution is not uniform.
    """
    rng = _rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def singular_values(k, kappa, energy):
    """k geometrically spaced values from 1 down to 1/kappa, scaled so sum(s^2) = energy."""
    if k == 1:
        s = np.ones(1)
    else:
        s = float(kappa) ** (-np.arange(k) / (k - 1))
    return s * np.sqrt(energy / np.sum(s * s))


def conditioned_matrix(spec: MatrixSpec) -> np.ndarray:
    su, sv = np.random.SeedSequence(spec.seed).spawn(2)
    U = haar_orthogonal(spec.M, su)
    V = haar_orthogonal(spec.N, sv)
    k = min(spec.M, spec.N)
    s = singular_values(k, spec.kappa, spec.N)
    return (U[:, :k] * s) @ V[:, :k].T


def sample_signal(spec: SignalSpec) -> np.ndarray:
    rng = _rng(spec.seed)
    support = rng.random(spec.N) < spec.rho
    values = rng.standard_normal(spec.N) * np.sqrt(spec.slab_var)
    return np.where(support, values, 0.0)


def noise_std_for_snr(z, snr_db) -> float:
    """sigma with ||z||^2 / (M sigma^2) = 10^(snr_db/10); 0 for infinite SNR."""
    if np.isposinf(snr_db):
        return 0.0
    if not np.isfinite(snr_db):
        raise ValueError(f"invalid snr_db {snr_db}")
    return float(np.sqrt(np.dot(z, z) / (z.size * 10.0 ** (snr_db / 10.0))))


def onebit_measure(z, sigma, w_unit):
    """y = sign(z + sigma * w_unit) with sign(0) = +1."""
    return np.where(z + sigma * w_unit >= 0.0, 1.0, -1.0)


def make_onebit_problem(mspec: MatrixSpec, sspec: SignalSpec, snr_db, noise_seed=None):
    """Draw (A, x, w) and return ``(GlmProblem, x_true, sigma)``.

    ``noise_seed`` defaults to a stream derived from the two spec seeds.
    """
    if mspec.N != sspec.N:
        raise ValueError("matrix and signal specs disagree on N")
    if noise_seed is None:
        noise_seed = np.random.SeedSequence([int(mspec.seed), int(sspec.seed), 2])
    A = conditioned_matrix(mspec)
    x = sample_signal(sspec)
    z = A @ x
    bump = 0
    while not np.any(z != 0.0):
        # all-zero signal; redraw
        bump += 1
        x = sample_signal(SignalSpec(sspec.N, sspec.rho, sspec.slab_var, sspec.seed + bump))
        z = A @ x
    sigma = noise_std_for_snr(z, snr_db)
    w_unit = _rng(noise_seed).standard_normal(mspec.M)
    y = onebit_measure(z, sigma, w_unit)
    problem = GlmProblem(A, y, ProbitChannel(sigma),
                         BernoulliGaussianPrior(sspec.rho, sspec.slab_var))
    return problem, x, sigma


def trial_seeds(master_seed, kappa_index, trial):
    """Three independent 64-bit seeds (matrix, signal, noise) for one trial."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(kappa_index), int(trial)))
    return [int(s) for s in ss.generate_state(3, dtype=np.uint64)]
