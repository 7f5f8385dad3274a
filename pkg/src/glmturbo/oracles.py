"""Reference computations that share no code path with the solvers.

Everything here is slow and written for clarity: adaptive quadrature for
the scalar moments, a data-space dense solve for the LMMSE estimates, and a
scalar-loop AMP. The test suite and ``glmturbo selftest`` compare the fast
implementations against these.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate, optimize
from scipy.special import log_ndtr


def _tilted_moments(logf, center, width, breaks=()):
    """Mean and variance of the density proportional to exp(logf) on the real line.

    ``logf`` must be concave with curvature at least 1/width^2. The density
    then falls below exp(-d^2 / (2 width^2)) of its peak at distance d from
    the mode, so +-12 widths hold all but ~1e-31 of the mass. Returns
    (mean, var, log_mass).
    """
    res = optimize.minimize_scalar(lambda t: -logf(t), bracket=(center - width, center + width),
                                   tol=1e-14)
    mode = float(res.x)
    peak = logf(mode)
    lo, hi = mode - 12.0 * width, mode + 12.0 * width
    # one breakpoint per width keeps the adaptive rule from skipping the bulk
    grid = mode + width * np.arange(-11, 12)
    pts = sorted({*grid.tolist(), *(b for b in breaks if lo < b < hi)})

    def moment(k):
        f = lambda t: (t - mode) ** k * math.exp(logf(t) - peak)
        # epsrel=1e-13 sits at the roundoff limit; quad warns but the value is fine
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(f, lo, hi, points=pts, epsabs=0.0, epsrel=1e-13, limit=400)
        return val

    m0, m1, m2 = moment(0), moment(1), moment(2)
    c1 = m1 / m0
    return mode + c1, m2 / m0 - c1 * c1, peak + math.log(m0)


def probit_moments_quad(y, m, v, noise_std):
    """Posterior mean/variance of z under Phi(y z / noise_std) N(z; m, v), by quadrature.

    Integrates in the standardized variable t = (z - m)/sqrt(v); the
    integrand is log-concave with curvature >= 1 in t.
    """
    sv = math.sqrt(v)

    def logf(t):
        return float(log_ndtr(y * (m + sv * t) / noise_std)) - 0.5 * t * t

    # the likelihood switches over at z = 0 on a scale noise_std/sqrt(v),
    # which can be far below the prior width; resolve it explicitly
    step = noise_std / sv
    breaks = -m / sv + step * np.arange(-12, 13)
    mt, vt, _ = _tilted_moments(logf, 0.0, 1.0, breaks=tuple(breaks))
    return m + sv * mt, v * vt


def bg_moments_quad(r, sigma2, rho, slab_var):
    """MMSE mean/variance of x under the spike-and-slab prior and N(r; x, sigma2).

    The point mass is exact; the slab part is integrated numerically and the
    two are mixed using their log masses.
    """
    def log_gauss(x, mean, var):
        return -0.5 * (x - mean) ** 2 / var - 0.5 * math.log(2.0 * math.pi * var)

    def logf(x):
        return log_gauss(x, 0.0, slab_var) + log_gauss(r, x, sigma2)

    width = math.sqrt(min(slab_var, sigma2))
    ms, vs, log_slab = _tilted_moments(logf, r, width)
    if rho == 1.0:
        return ms, vs
    log_w1 = math.log(rho) + log_slab
    log_w0 = math.log1p(-rho) + log_gauss(r, 0.0, sigma2)
    p1 = 1.0 / (1.0 + math.exp(min(log_w0 - log_w1, 700.0)))
    return p1 * ms, p1 * vs + p1 * (1.0 - p1) * ms * ms


def fd_derivative(f, r, h):
    """Five-point central difference of a vectorized f at r, step h (array or scalar)."""
    return (-f(r + 2 * h) + 8 * f(r + h) - 8 * f(r - h) + f(r - 2 * h)) / (12.0 * h)


def dense_lmmse(A, y, sigma2, prior_precision, prior_mean=None):
    """LMMSE estimate and covariance from the data-space (M x M) form.

    x = mu + G A^T (S + A G A^T)^{-1} (y - A mu), C = G - G A^T (S + A G A^T)^{-1} A G
    with G = diag(1/prior_precision), S = diag(sigma2); solved by LU.
    """
    A = np.asarray(A, dtype=float)
    M, N = A.shape
    G = np.diag(np.broadcast_to(1.0 / np.asarray(prior_precision, float), (N,)))
    S = np.diag(np.broadcast_to(np.asarray(sigma2, float), (M,)))
    mu = np.zeros(N) if prior_mean is None else np.asarray(prior_mean, float)
    K = S + A @ G @ A.T
    GAt = G @ A.T
    x = mu + GAt @ np.linalg.solve(K, y - A @ mu)
    C = G - GAt @ np.linalg.solve(K, GAt.T)
    return x, C


def amp_loop(A, y, sigma2, denoise_fn, x0, tau0, Z0, V0, n_iter):
    """Scalar-loop AMP with per-measurement noise variance.

    ``denoise_fn(r, Sigma) -> (mean, var)`` acts on scalars. Returns the list
    of per-iteration estimates together with the final (Z, V).
    """
    A = np.asarray(A, dtype=float)
    M, N = A.shape
    x = list(map(float, x0))
    tau = list(map(float, tau0))
    Z = list(map(float, Z0))
    V = list(map(float, V0))
    s2 = list(map(float, np.broadcast_to(sigma2, (M,))))
    out = []
    for _ in range(n_iter):
        resid = [(y[a] - Z[a]) / (s2[a] + V[a]) for a in range(M)]
        x_new, tau_new = [], []
        for i in range(N):
            prec = sum(A[a, i] ** 2 / (s2[a] + V[a]) for a in range(M))
            Sig = 1.0 / prec
            r = x[i] + Sig * sum(A[a, i] * resid[a] for a in range(M))
            mi, vi = denoise_fn(r, Sig)
            x_new.append(mi)
            tau_new.append(vi)
        V_new = [sum(A[a, i] ** 2 * tau_new[i] for i in range(N)) for a in range(M)]
        Z = [sum(A[a, i] * x_new[i] for i in range(N)) - V_new[a] * resid[a] for a in range(M)]
        x, tau, V = x_new, tau_new, V_new
        out.append(np.array(x))
    return out, np.array(Z), np.array(V)
