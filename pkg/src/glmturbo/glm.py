"""Turbo outer loop reducing GLM inference to a sequence of linear problems.

Each outer iteration:

1. the channel stage turns the incoming extrinsic message on z into a
   pseudo observation (y_tilde, sigma2_tilde);
2. the chosen linear solver runs ``Iter_SLM`` iterations on
   y_tilde = A x + w, w ~ N(0, diag(sigma2_tilde));
3. the solver's extrinsic message on z is sent back to the channel stage.

``GAMP`` skips the decomposition and runs the classical recursion.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .amp import AmpSolver, DivergenceError, gamp_step, init_amp_state, init_gamp_state
from .channels import pseudo_data
from .messages import ContractError, GaussianBelief
from .sbl import SblSolver
from .vamp import VampSolver

DNMSE_FLOOR_DB = -320.0


class Solver(str, enum.Enum):
    GrAMP = "GrAMP"
    GrVAMP = "GrVAMP"
    GrSBL = "GrSBL"
    GAMP = "GAMP"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        for s in cls:
            if s.value.lower() == str(name).lower():
                return s
        raise ValueError(f"unknown solver {name!r}; choose from "
                         + ", ".join(s.value for s in cls))


@dataclass
class GlmProblem:
    A: np.ndarray
    y: np.ndarray
    channel: object
    prior: object

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim != 2:
            raise ContractError("A must be a 2-D matrix")
        self.y = self.channel.check_observation(self.y)
        if self.y.shape != (self.A.shape[0],):
            raise ContractError(
                f"y has shape {self.y.shape}, expected ({self.A.shape[0]},)")

    @property
    def shape(self):
        return self.A.shape


@dataclass
class GlmLoopConfig:
    T_max: int = 50
    Iter_SLM: int = 1
    init_z_ext_mean: float = 0.0
    init_z_ext_var: float = 1e8
    damping: float = 1.0
    solver: Solver = Solver.GrVAMP
    sbl_a: float = 1e-10
    sbl_b: float = 1e-10
    sbl_variance: str = "diagonal"
    sbl_reset_alpha: bool = False
    # "auto": average the channel-side variance iff the inner solver reports
    # a single averaged z variance (Gr-VAMP, Gr-SBL with sbl_variance="average")
    channel_variance: str = "auto"
    divergence_db: float = 50.0

    def __post_init__(self):
        self.solver = Solver.parse(self.solver)
        if self.sbl_variance not in ("average", "diagonal"):
            raise ValueError(f"sbl_variance must be 'average' or 'diagonal', got {self.sbl_variance!r}")
        if self.channel_variance not in ("auto", "average", "diagonal"):
            raise ValueError(f"invalid channel_variance {self.channel_variance!r}")
        if int(self.T_max) < 1 or int(self.Iter_SLM) < 1:
            raise ValueError("T_max and Iter_SLM must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if not self.init_z_ext_var > 0:
            raise ValueError("init_z_ext_var must be positive")


@dataclass
class IterationRecord:
    iteration: int
    x_hat: Optional[np.ndarray]
    z_ext_mean: float
    z_ext_var: float
    dnmse_db: Optional[float]
    diverged: bool
    elapsed_s: float


@dataclass
class GlmTrace:
    solver: Solver
    records: List[IterationRecord] = field(default_factory=list)

    @property
    def diverged(self) -> bool:
        return any(r.diverged for r in self.records)

    @property
    def x_hat(self):
        for r in reversed(self.records):
            if r.x_hat is not None:
                return r.x_hat
        return None

    def __len__(self):
        return len(self.records)


def dnmse(x_hat, x_true) -> float:
    """Debiased NMSE in dB: min over c of 20 log10(||c x_hat - x|| / ||x||)."""
    x_hat = np.asarray(x_hat, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    nx = np.linalg.norm(x_true)
    if nx == 0:
        raise ContractError("dNMSE undefined for a zero truth vector")
    xx = float(np.dot(x_hat, x_hat))
    if xx == 0:
        return 0.0
    c = float(np.dot(x_hat, x_true)) / xx
    ratio = np.linalg.norm(c * x_hat - x_true) / nx
    if ratio == 0:
        return DNMSE_FLOOR_DB
    return max(20.0 * np.log10(ratio), DNMSE_FLOOR_DB)


def raw_nmse(x_hat, x_true) -> float:
    """Un-debiased NMSE in dB, 20 log10(||x_hat - x|| / ||x||).

    Used only for divergence detection: the debiased value is bounded by 0 dB
    and so cannot reveal an exploding estimate.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    with np.errstate(over="ignore"):
        ratio = np.linalg.norm(x_hat - x_true) / np.linalg.norm(x_true)
    if ratio == 0:
        return DNMSE_FLOOR_DB
    return 20.0 * np.log10(ratio) if np.isfinite(ratio) else np.inf


def make_inner_solver(problem: GlmProblem, config: GlmLoopConfig, z_ext: GaussianBelief):
    if config.solver is Solver.GrAMP:
        A_sq = problem.A * problem.A
        # (Z, V) of AMP double as the extrinsic message on z
        state = init_amp_state(A_sq, problem.prior, z0=z_ext.mean, v0=z_ext.variance)
        return AmpSolver(problem.A, problem.prior, state=state, damping=config.damping)
    if config.solver is Solver.GrVAMP:
        return VampSolver(problem.A, problem.prior)
    if config.solver is Solver.GrSBL:
        return SblSolver(problem.A, a=config.sbl_a, b=config.sbl_b,
                         per_component=config.sbl_variance == "diagonal",
                         reset_alpha=config.sbl_reset_alpha)
    raise ValueError(f"{config.solver} has no inner solver")


def averages_channel_variance(config: GlmLoopConfig) -> bool:
    if config.channel_variance != "auto":
        return config.channel_variance == "average"
    if config.solver is Solver.GrVAMP:
        return True
    return config.solver is Solver.GrSBL and config.sbl_variance == "average"


_FAILURES = (DivergenceError, ContractError, np.linalg.LinAlgError, FloatingPointError)


def _record(t, x_hat, z_ext, truth, config, t0):
    d = dnmse(x_hat, truth) if truth is not None else None
    bad = truth is not None and max(d, raw_nmse(x_hat, truth)) > config.divergence_db
    return IterationRecord(t, x_hat.copy(), float(np.mean(z_ext.mean)),
                           float(np.mean(z_ext.variance)), d, bad,
                           time.perf_counter() - t0)


def _diverged(t, t0):
    return IterationRecord(t, None, float("nan"), float("nan"), None, True,
                           time.perf_counter() - t0)


def run(problem: GlmProblem, config: GlmLoopConfig = None, truth=None) -> GlmTrace:
    """Run the outer loop for ``config.T_max`` iterations.

    On solver failure the trace gets a final record flagged ``diverged`` and
    the loop stops.
    """
    config = config or GlmLoopConfig()
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        if truth.shape != (problem.A.shape[1],):
            raise ContractError("truth has the wrong length")
    if config.solver is Solver.GAMP:
        return _run_gamp(problem, config, truth)

    M = problem.A.shape[0]
    trace = GlmTrace(config.solver)
    t0 = time.perf_counter()
    z_ext = GaussianBelief(np.full(M, float(config.init_z_ext_mean)),
                           np.full(M, float(config.init_z_ext_var)))
    inner = make_inner_solver(problem, config, z_ext)
    damp_messages = config.damping != 1.0 and config.solver is not Solver.GrAMP
    average_b = averages_channel_variance(config)

    for t in range(1, config.T_max + 1):
        try:
            with np.errstate(over="ignore", under="ignore"):
                pseudo = pseudo_data(problem.channel, problem.y, z_ext, average_b)
                inner.iterate(pseudo, config.Iter_SLM)
                new = inner.z_extrinsic(pseudo)
            if damp_messages:
                b = config.damping
                new = GaussianBelief(b * new.mean + (1 - b) * z_ext.mean,
                                     b * new.variance + (1 - b) * z_ext.variance)
            z_ext = new
            if not np.all(np.isfinite(inner.x_hat)):
                raise DivergenceError("non-finite estimate")
        except _FAILURES:
            trace.records.append(_diverged(t, t0))
            break
        rec = _record(t, inner.x_hat, z_ext, truth, config, t0)
        trace.records.append(rec)
        if rec.diverged:
            break
    return trace


def _run_gamp(problem: GlmProblem, config: GlmLoopConfig, truth) -> GlmTrace:
    A = problem.A
    A_sq = A * A
    trace = GlmTrace(Solver.GAMP)
    t0 = time.perf_counter()
    state = init_gamp_state(A_sq, problem.prior, config.init_z_ext_mean, config.init_z_ext_var)
    for t in range(1, config.T_max + 1):
        try:
            with np.errstate(over="ignore", under="ignore"):
                state = gamp_step(state, A, A_sq, problem.channel, problem.y,
                                  problem.prior, config.damping)
        except _FAILURES:
            trace.records.append(_diverged(t, t0))
            break
        rec = _record(t, state.x_hat, GaussianBelief(state.Z, state.V), truth, config, t0)
        trace.records.append(rec)
        if rec.diverged:
            break
    return trace
