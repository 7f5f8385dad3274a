"""Monte Carlo harness for the 1-bit compressed sensing experiments.

Each (kappa, trial) cell draws one problem from seeds split off the master
seed; every algorithm in the config runs on that same problem. Records are
merged in (kappa, trial, algorithm) order, so the CSV does not depend on the
worker count.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence

import numpy as np

from .glm import GlmLoopConfig, Solver, run
from .synth import MatrixSpec, SignalSpec, make_onebit_problem, trial_seeds

CSV_HEADER = ["algorithm", "kappa", "trial", "iteration", "dnmse_db", "diverged", "wall_time_ms"]
ALL_DIVERGED_DB = 999.0
THREADS_ENV = "GLM_TURBO_THREADS"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    N: int = 128
    M: int = 512
    rho: float = 0.1
    snr_db: float = 50.0
    kappas: List[float] = field(default_factory=lambda: [1.0, 100.0])
    algorithms: List[Solver] = field(
        default_factory=lambda: [Solver.GrAMP, Solver.GrVAMP, Solver.GrSBL, Solver.GAMP])
    trials: int = 20
    T_max: int = 50
    Iter_SLM: int = 1
    master_seed: int = 2024
    output_path: Optional[str] = None
    damping: float = 1.0
    init_z_ext_var: float = 1e8
    average: str = "db"
    # free-form block carried through untouched (pilot thresholds, notes)
    acceptance: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        try:
            self.N, self.M = int(self.N), int(self.M)
            self.trials, self.T_max, self.Iter_SLM = int(self.trials), int(self.T_max), int(self.Iter_SLM)
            self.master_seed = int(self.master_seed)
            self.kappas = [float(k) for k in self.kappas]
            self.algorithms = [Solver.parse(a) for a in self.algorithms]
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.N < 1 or self.M < 1:
            raise ConfigError("N and M must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.kappas or any(not k >= 1 for k in self.kappas):
            raise ConfigError("kappas must be a non-empty list of values >= 1")
        if not self.algorithms:
            raise ConfigError("algorithms must be non-empty")
        if not 0 < self.rho <= 1:
            raise ConfigError("rho must lie in (0, 1]")
        if self.average not in ("db", "linear"):
            raise ConfigError("average must be 'db' or 'linear'")
        try:
            self.loop_config(self.algorithms[0])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["algorithms"] = [a.value for a in self.algorithms]
        return d

    def loop_config(self, algorithm) -> GlmLoopConfig:
        return GlmLoopConfig(T_max=self.T_max, Iter_SLM=self.Iter_SLM,
                             init_z_ext_var=self.init_z_ext_var,
                             damping=self.damping, solver=algorithm)


def load_config(path) -> ExperimentConfig:
    """Read an ExperimentConfig from JSON. OSError propagates; bad content is ConfigError."""
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


@dataclass(frozen=True)
class TrialRecord:
    algorithm: str
    kappa: float
    trial_index: int
    iteration: int
    dnmse_db: float
    diverged: bool
    wall_time_ms: float


def run_trial(config: ExperimentConfig, kappa_index: int, trial: int) -> List[TrialRecord]:
    kappa = config.kappas[kappa_index]
    m_seed, s_seed, n_seed = trial_seeds(config.master_seed, kappa_index, trial)
    problem, x, _ = make_onebit_problem(
        MatrixSpec(config.M, config.N, kappa, m_seed),
        SignalSpec(config.N, config.rho, seed=s_seed),
        config.snr_db, noise_seed=n_seed)
    out = []
    for algo in config.algorithms:
        trace = run(problem, config.loop_config(algo), truth=x)
        last_ms = 0.0
        for rec in trace.records:
            last_ms = 1e3 * rec.elapsed_s
            d = float("nan") if rec.dnmse_db is None else rec.dnmse_db
            out.append(TrialRecord(algo.value, kappa, trial, rec.iteration, d,
                                   rec.diverged, last_ms))
        # a halted run is padded so every cell has T_max rows
        for it in range(len(trace.records) + 1, config.T_max + 1):
            out.append(TrialRecord(algo.value, kappa, trial, it, float("nan"), True, last_ms))
    return out


def _run_cell(args):
    config, kappa_index, trial = args
    return kappa_index, trial, run_trial(config, kappa_index, trial)


def resolve_threads(threads=None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}")
    threads = 1 if threads is None else int(threads)
    if threads < 1:
        raise ConfigError("thread count must be >= 1")
    return threads


def run_experiment(config: ExperimentConfig, threads=None) -> List[TrialRecord]:
    threads = resolve_threads(threads)
    cells = [(config, k, t) for k in range(len(config.kappas)) for t in range(config.trials)]
    if threads == 1:
        results = [_run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_cell, cells))
    results.sort(key=lambda r: (r[0], r[1]))
    order = {a.value: i for i, a in enumerate(config.algorithms)}
    records = []
    for _, _, recs in results:
        records.extend(sorted(recs, key=lambda r: (order[r.algorithm], r.iteration)))
    return records


def _fmt(x):
    return "nan" if isinstance(x, float) and math.isnan(x) else repr(float(x))


def records_to_csv(records: Sequence[TrialRecord], with_timing=True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([r.algorithm, _fmt(r.kappa), r.trial_index, r.iteration, _fmt(r.dnmse_db),
                    int(r.diverged), f"{r.wall_time_ms:.3f}" if with_timing else "0"])
    return buf.getvalue()


def write_csv(records, path):
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))


def read_csv(path) -> List[TrialRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ConfigError(f"{path}: unexpected CSV header {reader.fieldnames}")
        return [TrialRecord(row["algorithm"], float(row["kappa"]), int(row["trial"]),
                            int(row["iteration"]), float(row["dnmse_db"]),
                            bool(int(row["diverged"])), float(row["wall_time_ms"]))
                for row in reader]


@dataclass(frozen=True)
class SummaryRow:
    algorithm: str
    kappa: float
    iteration: int
    mean_dnmse_db: float
    n_ok: int
    n_diverged: int


def summarize(records: Sequence[TrialRecord], average="db") -> List[SummaryRow]:
    """Mean dNMSE per (algorithm, kappa, iteration) over non-diverged trials.

    ``average="db"`` averages dB values; ``"linear"`` averages the linear
    NMSE and converts back. Cells where every trial diverged report
    ``ALL_DIVERGED_DB``.
    """
    if not records:
        raise ValueError("no records to summarize")
    groups: Dict[tuple, list] = {}
    for r in records:
        groups.setdefault((r.algorithm, r.kappa, r.iteration), []).append(r)
    rows = []
    for (algo, kappa, it), recs in groups.items():
        ok = [r.dnmse_db for r in recs if not r.diverged and not math.isnan(r.dnmse_db)]
        n_div = len(recs) - len(ok)
        if not ok:
            mean = ALL_DIVERGED_DB
        elif average == "linear":
            mean = 10.0 * math.log10(float(np.mean([10.0 ** (d / 10.0) for d in ok])))
        else:
            mean = float(np.mean(ok))
        rows.append(SummaryRow(algo, kappa, it, mean, len(ok), n_div))
    return rows


def final_summary(records, average="db") -> List[SummaryRow]:
    """Summary rows at each (algorithm, kappa)'s last iteration."""
    rows = summarize(records, average)
    last = {}
    for r in rows:
        key = (r.algorithm, r.kappa)
        if key not in last or r.iteration > last[key].iteration:
            last[key] = r
    return list(last.values())


def format_summary(rows: Sequence[SummaryRow]) -> str:
    lines = [f"{'algorithm':<8} {'kappa':>10} {'iter':>5} {'dNMSE[dB]':>10} {'ok':>4} {'div':>4}"]
    for r in sorted(rows, key=lambda r: (r.kappa, r.algorithm, r.iteration)):
        lines.append(f"{r.algorithm:<8} {r.kappa:>10.4g} {r.iteration:>5d} "
                     f"{r.mean_dnmse_db:>10.2f} {r.n_ok:>4d} {r.n_diverged:>4d}")
    return "\n".join(lines)


def write_matrix(path, a):
    """Text format: ``rows cols`` header, then row-major values with 17 significant digits."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_matrix(path) -> np.ndarray:
    """Inverse of ``write_matrix``; lines starting with '#' are ignored."""
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ConfigError(f"{path}: empty matrix file")
    header = lines[0].split()
    body = " ".join(lines[1:]).split()
    if len(header) != 2:
        raise ConfigError(f"{path}: first line must be 'rows cols'")
    try:
        rows, cols = int(header[0]), int(header[1])
        values = np.array([float(v) for v in body])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if values.size != rows * cols:
        raise ConfigError(f"{path}: expected {rows * cols} values, found {values.size}")
    return values.reshape(rows, cols)


def read_vector(path) -> np.ndarray:
    a = read_matrix(path)
    if 1 not in a.shape:
        raise ConfigError(f"{path}: expected a vector, got shape {a.shape}")
    return a.ravel()


def timed_experiment(config, threads=None):
    t0 = time.perf_counter()
    records = run_experiment(config, threads)
    return records, time.perf_counter() - t0
