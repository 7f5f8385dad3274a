import json
import math
from pathlib import Path

import numpy as np
import pytest

from glmturbo.bench import (ALL_DIVERGED_DB, CSV_HEADER, THREADS_ENV, ConfigError,
                            ExperimentConfig, TrialRecord, final_summary, load_config, read_csv,
                            read_matrix, read_vector, records_to_csv, resolve_threads,
                            run_experiment, summarize, write_csv, write_matrix)
from glmturbo.glm import Solver


def small(**kw):
    base = dict(N=16, M=64, kappas=[1.0], trials=2, T_max=5, rho=0.25, snr_db=30.0)
    base.update(kw)
    return ExperimentConfig(**base)


def rec(d, diverged=False, algo="GrVAMP", kappa=1.0, it=1, trial=0):
    return TrialRecord(algo, kappa, trial, it, d, diverged, 0.0)


def test_cardinality():
    cfg = small(trials=1, algorithms=["GrVAMP"])
    records = run_experiment(cfg)
    assert len(records) == cfg.T_max
    assert [r.iteration for r in records] == list(range(1, cfg.T_max + 1))


def test_csv_deterministic_without_timing():
    cfg = small(kappas=[1.0, 100.0])
    a = records_to_csv(run_experiment(cfg), with_timing=False)
    b = records_to_csv(run_experiment(cfg), with_timing=False)
    assert a == b
    assert a.splitlines()[0] == ",".join(CSV_HEADER)


def test_thread_count_does_not_change_results():
    cfg = small(kappas=[1.0, 100.0], trials=3)
    serial = records_to_csv(run_experiment(cfg, threads=1), with_timing=False)
    pooled = records_to_csv(run_experiment(cfg, threads=2), with_timing=False)
    assert serial == pooled


def test_paired_design_shares_problem():
    # GrAMP with one inner iteration and GAMP see the same instance, so their traces agree
    cfg = small(algorithms=["GrAMP", "GAMP"], trials=1, T_max=8)
    recs = run_experiment(cfg)
    a = [r.dnmse_db for r in recs if r.algorithm == "GrAMP"]
    b = [r.dnmse_db for r in recs if r.algorithm == "GAMP"]
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_env_overrides_threads(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_threads(1) == 3
    monkeypatch.setenv(THREADS_ENV, "x")
    with pytest.raises(ConfigError):
        resolve_threads()
    monkeypatch.delenv(THREADS_ENV)
    assert resolve_threads() == 1
    with pytest.raises(ConfigError):
        resolve_threads(0)


def test_summarize_examples():
    assert summarize([rec(-20.0)])[0].mean_dnmse_db == -20.0
    rows = summarize([rec(-20.0), rec(-30.0, trial=1)])
    assert rows[0].mean_dnmse_db == -25.0
    assert rows[0].n_ok == 2 and rows[0].n_diverged == 0


def test_summarize_sentinel_and_skip():
    rows = summarize([rec(float("nan"), True), rec(70.0, True, trial=1)])
    assert rows[0].mean_dnmse_db == ALL_DIVERGED_DB
    assert rows[0].n_diverged == 2
    rows = summarize([rec(-10.0), rec(float("nan"), True, trial=1)])
    assert rows[0].mean_dnmse_db == -10.0 and rows[0].n_diverged == 1
    with pytest.raises(ValueError):
        summarize([])


def test_linear_average():
    rows = summarize([rec(-10.0), rec(-30.0, trial=1)], average="linear")
    assert rows[0].mean_dnmse_db == pytest.approx(10 * math.log10((0.1 + 0.001) / 2))


def test_final_summary_picks_last_iteration():
    recs = [rec(-5.0, it=1), rec(-9.0, it=2), rec(-3.0, it=1, algo="GAMP")]
    out = {(r.algorithm, r.iteration): r.mean_dnmse_db for r in final_summary(recs)}
    assert out == {("GrVAMP", 2): -9.0, ("GAMP", 1): -3.0}


def test_halted_runs_are_padded():
    cfg = small(kappas=[1e4], algorithms=["GAMP"], trials=1, T_max=40, N=32, M=128)
    recs = run_experiment(cfg)
    assert len(recs) == 40
    assert recs[-1].diverged and math.isnan(recs[-1].dnmse_db)


def test_csv_round_trip(tmp_path):
    recs = [rec(-12.5), rec(float("nan"), True, it=2), rec(-1e-3, kappa=1e6, it=3)]
    path = tmp_path / "r.csv"
    write_csv(recs, path)
    back = read_csv(path)
    assert len(back) == 3
    assert back[0] == recs[0]
    assert math.isnan(back[1].dnmse_db) and back[1].diverged
    assert back[2].kappa == 1e6


def test_matrix_round_trip_exact(tmp_path):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((7, 3)) * 10.0 ** rng.uniform(-300, 300, (7, 3))
    write_matrix(tmp_path / "a.txt", a)
    np.testing.assert_array_equal(read_matrix(tmp_path / "a.txt"), a)
    v = rng.standard_normal(5)
    write_matrix(tmp_path / "v.txt", v)
    np.testing.assert_array_equal(read_vector(tmp_path / "v.txt"), v)
    assert (tmp_path / "v.txt").read_text().splitlines()[0] == "5 1"


@pytest.mark.parametrize("text", ["", "2 2\n1 2 3\n", "2\n1 2\n", "1 1\nabc\n"])
def test_bad_matrix_files(tmp_path, text):
    p = tmp_path / "m.txt"
    p.write_text(text)
    with pytest.raises(ConfigError):
        read_matrix(p)


def test_read_vector_rejects_matrix(tmp_path):
    write_matrix(tmp_path / "m.txt", np.ones((2, 2)))
    with pytest.raises(ConfigError):
        read_vector(tmp_path / "m.txt")


@pytest.mark.parametrize("kw", [dict(trials=0), dict(kappas=[]), dict(kappas=[0.5]),
                                dict(algorithms=[]), dict(algorithms=["ISTA"]), dict(rho=0.0),
                                dict(damping=2.0), dict(average="median"), dict(N="abc")])
def test_config_errors(kw):
    with pytest.raises(ConfigError):
        small(**kw)


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"N": 8, "M": 32, "algorithms": ["grvamp"]}))
    cfg = load_config(p)
    assert cfg.algorithms == [Solver.GrVAMP] and cfg.N == 8
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    p.write_text(json.dumps({"N": 8, "bogus": 1}))
    with pytest.raises(ConfigError, match="bogus"):
        load_config(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.json")


def test_shipped_configs_load():
    root = Path(__file__).resolve().parents[1] / "configs"
    for name in ("desk.json", "full.json", "sweep.json"):
        load_config(root / name)
    desk = load_config(root / "desk.json")
    assert (desk.N, desk.M, desk.trials, desk.rho, desk.snr_db) == (128, 512, 20, 0.1, 50.0)
