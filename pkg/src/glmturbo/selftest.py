"""Oracle and equivalence checks, runnable without pytest.

Each ``check_*`` function returns a :class:`CheckResult` holding the worst
error seen and the tolerance it was held to. ``run_all`` runs a quick
version of every suite; the test suite calls the same functions at full size.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import oracles
from .channels import AwgnChannel, ProbitChannel, pseudo_data
from .glm import GlmLoopConfig, GlmProblem, Solver, run
from .messages import GaussianBelief, combine, extrinsic
from .priors import BernoulliGaussianPrior, denoise, denoiser_divergence
from .sbl import sbl, sbl_lmmse
from .synth import MatrixSpec, SignalSpec, conditioned_matrix, make_onebit_problem, sample_signal
from .vamp import lmmse_posterior, vamp


@dataclass
class CheckResult:
    name: str
    error: float
    tol: float
    elapsed_s: float = 0.0
    detail: str = ""

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tol)

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return (f"{status} {self.name}: err={self.error:.3e} tol={self.tol:.1e} "
                f"[{self.elapsed_s:.2f}s]{extra}")


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.elapsed_s = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _log_uniform(rng, lo, hi):
    return 10.0 ** rng.uniform(np.log10(lo), np.log10(hi))


@_timed
def check_probit_moments(n_draws=1000, seed=0, tol=1e-8):
    """Probit posterior moments against quadrature; max abs error over mean and variance."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_draws):
        v = _log_uniform(rng, 1e-4, 1e4)
        s2 = _log_uniform(rng, 1e-4, 1e4)
        m = 3.0 * np.sqrt(v) * rng.standard_normal()
        y = rng.choice([-1.0, 1.0])
        post = ProbitChannel(np.sqrt(s2)).posterior_moments(
            np.array([y]), GaussianBelief(np.array([m]), np.array([v])))
        qm, qv = oracles.probit_moments_quad(y, m, v, np.sqrt(s2))
        worst = max(worst, abs(post.mean[0] - qm), abs(post.variance[0] - qv))
    return CheckResult("probit moments vs quadrature", worst, tol, detail=f"{n_draws} draws")


@_timed
def check_bg_moments(n_draws=1000, seed=1, tol=1e-8):
    """Bernoulli-Gaussian denoiser against quadrature; max abs error."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_draws):
        rho = rng.uniform(0.01, 1.0)
        v0 = _log_uniform(rng, 1e-4, 1e4)
        s2 = _log_uniform(rng, 1e-4, 1e4)
        r = np.sqrt(v0 + s2) * rng.standard_normal()
        x_hat, tau = denoise(BernoulliGaussianPrior(rho, v0), np.array([r]), np.array([s2]))
        qm, qv = oracles.bg_moments_quad(r, s2, rho, v0)
        worst = max(worst, abs(x_hat[0] - qm), abs(tau[0] - qv))
    return CheckResult("Bernoulli-Gaussian moments vs quadrature", worst, tol,
                       detail=f"{n_draws} draws")


# below this the five-point stencil's own rounding dominates
FD_ATOL = 1e-10


@_timed
def check_divergence_fd(n_draws=1000, seed=2, tol=1e-5):
    """Denoiser divergence against a five-point finite difference.

    Error is |div - fd| / max(|fd|, FD_ATOL / tol), i.e. relative with a
    small absolute floor.
    """
    rng = np.random.default_rng(seed)
    rho = rng.uniform(0.01, 1.0, n_draws)
    v0 = _log_uniform(rng, 1e-4, 1e4)
    s2 = 10.0 ** rng.uniform(-4, 4, n_draws)
    r = np.sqrt(v0 + s2) * rng.standard_normal(n_draws)
    worst = 0.0
    for i in range(n_draws):
        prior = BernoulliGaussianPrior(rho[i], v0)
        f = lambda rr: denoise(prior, rr, np.full_like(rr, s2[i]))[0]
        h = 1e-3 * np.sqrt(s2[i])
        fd = oracles.fd_derivative(f, np.array([r[i]]), h)[0]
        div = denoiser_divergence(prior, np.array([r[i]]), np.array([s2[i]]))[0]
        worst = max(worst, abs(div - fd) / max(abs(fd), FD_ATOL / tol))
    return CheckResult("denoiser divergence vs finite differences", worst, tol,
                       detail=f"{n_draws} draws")


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


@_timed
def check_lmmse(n_cases=20, seed=3, tol=1e-10):
    """VAMP and SBL LMMSE solutions against a data-space dense solve (N <= 64)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(n_cases):
        N = int(rng.integers(4, 65))
        M = int(rng.integers(N // 2 + 1, 3 * N))
        A = conditioned_matrix(MatrixSpec(M, N, float(10 ** rng.uniform(0, 2)), seed + 100 * k))
        y = rng.standard_normal(M)
        sigma2 = 10.0 ** rng.uniform(-2, 0, M)
        # VAMP: scalar precision gamma2 around a prior mean r2
        gamma2 = 10.0 ** rng.uniform(-1, 1)
        r2 = rng.standard_normal(N)
        x_v, C_v, _ = lmmse_posterior(A, y, sigma2, gamma2, prior_mean=r2)
        x_o, C_o = oracles.dense_lmmse(A, y, sigma2, gamma2, prior_mean=r2)
        worst = max(worst, _rel(x_v, x_o), _rel(C_v, C_o))
        # SBL: per-component precisions alpha
        alpha = 10.0 ** rng.uniform(-1, 1, N)
        x_s, C_s = sbl_lmmse(alpha, A, y, sigma2)
        x_o, C_o = oracles.dense_lmmse(A, y, sigma2, alpha)
        worst = max(worst, _rel(x_s, x_o), _rel(C_s, C_o))
    return CheckResult("LMMSE vs dense data-space solve", worst, tol, detail=f"{n_cases} cases")


@_timed
def check_gamp_equivalence(n_instances=10, n_iter=20, seed=4, tol=1e-8,
                           N=32, M=128, rho=0.25, snr_db=30.0):
    """Gr-AMP with one inner iteration against the direct GAMP recursion."""
    worst = 0.0
    for k in range(n_instances):
        problem, _, _ = make_onebit_problem(MatrixSpec(M, N, 1.0, seed * 1000 + k),
                                            SignalSpec(N, rho, seed=seed * 1000 + 500 + k), snr_db)
        traces = {}
        for solver in (Solver.GrAMP, Solver.GAMP):
            cfg = GlmLoopConfig(T_max=n_iter, Iter_SLM=1, solver=solver)
            traces[solver] = run(problem, cfg)
        a, b = traces[Solver.GrAMP].records, traces[Solver.GAMP].records
        if len(a) != n_iter or len(b) != n_iter or any(r.diverged for r in a + b):
            return CheckResult("Gr-AMP vs GAMP", np.inf, tol, detail=f"instance {k} halted")
        for ra, rb in zip(a, b):
            worst = max(worst, _rel(ra.x_hat, rb.x_hat))
    return CheckResult("Gr-AMP vs GAMP", worst, tol,
                       detail=f"{n_instances} instances x {n_iter} iterations")


def awgn_problem(N, M, rho, noise_var, seed, kappa=1.0):
    A = conditioned_matrix(MatrixSpec(M, N, kappa, seed))
    x = sample_signal(SignalSpec(N, rho, seed=seed + 1))
    w = np.sqrt(noise_var) * np.random.default_rng(seed + 2).standard_normal(M)
    prior = BernoulliGaussianPrior(rho)
    return GlmProblem(A, A @ x + w, AwgnChannel(noise_var), prior), x


@_timed
def check_awgn_pseudo_data(n_cases=20, seed=5, tol=0.0):
    """Channel stage on an AWGN channel returns the observation and its noise variance."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        M = 64
        noise_var = 10.0 ** rng.uniform(-4, 1)
        y = rng.standard_normal(M)
        ext = GaussianBelief(rng.standard_normal(M), 10.0 ** rng.uniform(-2, 8, M))
        pd = pseudo_data(AwgnChannel(noise_var), y, ext)
        worst = max(worst, _rel(pd.mean, y), _rel(pd.variance, np.full(M, noise_var)))
    return CheckResult("AWGN channel stage returns (y, sigma^2)", worst, tol)


@_timed
def check_awgn_reduction(n_instances=5, n_iter=20, seed=6, tol=1e-10):
    """Gr-VAMP and Gr-SBL on an AWGN channel against bare VAMP and SBL (L-inf)."""
    worst = 0.0
    for k in range(n_instances):
        problem, _ = awgn_problem(64, 160, 0.2, 1e-3, seed * 100 + 10 * k)
        sigma2 = problem.channel.noise_var
        bare = {
            Solver.GrVAMP: vamp(problem.A, problem.y, sigma2, problem.prior, n_iter),
            Solver.GrSBL: sbl(problem.A, problem.y, sigma2, n_iter),
        }
        for solver, xs in bare.items():
            trace = run(problem, GlmLoopConfig(T_max=n_iter, solver=solver))
            if len(trace) != n_iter or trace.diverged:
                return CheckResult("AWGN reduction", np.inf, tol, detail=f"{solver.value} halted")
            for rec, x in zip(trace.records, xs):
                worst = max(worst, float(np.max(np.abs(rec.x_hat - x))))
    return CheckResult("Gr-VAMP/Gr-SBL on AWGN vs bare VAMP/SBL", worst, tol)


@_timed
def check_message_round_trip(n_draws=1000, seed=7, tol=1e-12, var_range=(1e-1, 1e1),
                             conditioned=False):
    """extrinsic(combine(a, b), b) recovers a; relative error.

    Precision subtraction loses about log10(var_a / var_b) digits, so with
    ``conditioned`` the error is divided by 1 + var_a / var_b, which allows
    wide variance ranges. Otherwise it is plain relative error.
    """
    rng = np.random.default_rng(seed)
    lo, hi = np.log10(var_range[0]), np.log10(var_range[1])
    worst = 0.0
    for _ in range(n_draws):
        n = 8
        a = GaussianBelief(rng.standard_normal(n), 10.0 ** rng.uniform(lo, hi, n))
        b = GaussianBelief(rng.standard_normal(n), 10.0 ** rng.uniform(lo, hi, n))
        back = extrinsic(combine(a, b), b)
        scale = 1.0 + a.variance / b.variance if conditioned else 1.0
        worst = max(worst,
                    float(np.max(np.abs(back.variance - a.variance) / (a.variance * scale))),
                    float(np.max(np.abs(back.mean - a.mean)
                                 / ((np.abs(a.mean) + np.sqrt(a.variance)) * scale))))
    label = "condition-scaled" if conditioned else "relative"
    return CheckResult("extrinsic/combine round trip", worst, tol,
                       detail=f"{label}, variances {var_range[0]:g}..{var_range[1]:g}")


QUICK = (
    (check_probit_moments, dict(n_draws=200)),
    (check_bg_moments, dict(n_draws=200)),
    (check_divergence_fd, dict(n_draws=200)),
    (check_lmmse, dict(n_cases=5)),
    (check_gamp_equivalence, dict(n_instances=3)),
    (check_awgn_pseudo_data, {}),
    (check_awgn_reduction, dict(n_instances=2)),
    (check_message_round_trip, dict(n_draws=200)),
    (check_message_round_trip, dict(n_draws=200, var_range=(1e-6, 1e6), conditioned=True)),
)


def run_all(out=print) -> bool:
    ok = True
    for fn, kwargs in QUICK:
        res = fn(**kwargs)
        out(res.line())
        ok &= res.ok
    out("selftest " + ("passed" if ok else "FAILED"))
    return ok
