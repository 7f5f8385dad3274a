"""Command line entry point: ``glmturbo {run,sweep,solve,selftest}``.

Exit codes: 0 success, 1 configuration or usage error, 2 I/O error; a
failing selftest also exits 1.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

from . import bench
from .channels import AwgnChannel, ProbitChannel
from .glm import GlmLoopConfig, GlmProblem, Solver, run as run_glm
from .messages import ContractError
from .priors import BernoulliGaussianPrior

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2
SWEEP_KAPPAS = (1.0, 1e2, 1e4, 1e6)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _algorithms(text):
    try:
        return [Solver.parse(a.strip()) for a in text.split(",") if a.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _kappas(text):
    try:
        return [float(k) for k in text.split(",") if k.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}")
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser():
    p = _Parser(prog="glmturbo", description="Turbo GLM solvers and 1-bit CS benchmark")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required):
        sp.add_argument("--config", required=config_required, help="experiment config (JSON)")
        sp.add_argument("--seed", type=_u64, help="override master_seed")
        sp.add_argument("--out", help="CSV output path (default: config output_path)")
        sp.add_argument("--threads", type=int, help=f"worker processes ({bench.THREADS_ENV} wins)")
        sp.add_argument("--algo", type=_algorithms, help="comma-separated algorithm list")
        sp.add_argument("--trials", type=int, help="override trial count")

    common(sub.add_parser("run", help="run a full experiment from a config file"), True)
    sw = sub.add_parser("sweep", help="condition-number sweep, final-iteration summary")
    common(sw, False)
    sw.add_argument("--kappas", type=_kappas, default=list(SWEEP_KAPPAS),
                    help="comma-separated condition numbers")

    so = sub.add_parser("solve", help="solve one problem from matrix/observation files")
    so.add_argument("--matrix", required=True, help="M x N matrix in text format")
    so.add_argument("--obs", required=True, help="length-M observation vector")
    so.add_argument("--algo", type=_algorithms, default=[Solver.GrVAMP])
    so.add_argument("--channel", choices=("probit", "awgn"), default="probit")
    so.add_argument("--noise-std", type=float, default=0.0,
                    help="channel noise standard deviation")
    so.add_argument("--rho", type=float, default=0.1, help="Bernoulli-Gaussian sparsity")
    so.add_argument("--iters", type=int, default=50, help="outer iterations")
    so.add_argument("--truth", help="optional true signal, reports dNMSE per iteration")
    so.add_argument("--out", help="also write the estimate to this path")

    sub.add_parser("selftest", help="run the oracle and equivalence suites")
    return p


def _experiment_config(args, base=None):
    cfg = bench.load_config(args.config) if args.config else (base or bench.ExperimentConfig())
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.algo:
        overrides["algorithms"] = args.algo
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.out:
        overrides["output_path"] = args.out
    if getattr(args, "kappas", None) is not None and args.command == "sweep":
        overrides["kappas"] = args.kappas
    if overrides:
        try:
            cfg = dataclasses.replace(cfg, **overrides)
        except (TypeError, ValueError) as exc:
            raise bench.ConfigError(str(exc)) from exc
    return cfg


def _experiment(args, out):
    cfg = _experiment_config(args)
    records, elapsed = bench.timed_experiment(cfg, args.threads)
    if cfg.output_path:
        bench.write_csv(records, cfg.output_path)
        print(f"wrote {len(records)} records to {cfg.output_path}", file=out)
    else:
        out.write(bench.records_to_csv(records))
    print(bench.format_summary(bench.final_summary(records, cfg.average)), file=out)
    print(f"elapsed {elapsed:.2f}s", file=out)
    return EXIT_OK


def _solve(args, out):
    A = bench.read_matrix(args.matrix)
    y = bench.read_vector(args.obs)
    if args.iters < 1:
        raise bench.ConfigError("--iters must be >= 1")
    if args.channel == "probit":
        channel = ProbitChannel(args.noise_std)
    else:
        channel = AwgnChannel(args.noise_std ** 2)
    problem = GlmProblem(A, y, channel, BernoulliGaussianPrior(args.rho))
    truth = bench.read_vector(args.truth) if args.truth else None
    for algo in args.algo:
        trace = run_glm(problem, GlmLoopConfig(T_max=args.iters, solver=algo), truth=truth)
        print(f"# algorithm {algo.value}", file=out)
        print(f"# iterations {len(trace)}", file=out)
        print(f"# diverged {int(trace.diverged)}", file=out)
        if truth is not None:
            for rec in trace.records:
                d = "nan" if rec.dnmse_db is None else f"{rec.dnmse_db:.4f}"
                print(f"# iter {rec.iteration} dnmse_db {d}", file=out)
        x_hat = trace.x_hat
        if x_hat is None:
            print("# no estimate produced", file=out)
            continue
        print(f"{x_hat.size} 1", file=out)
        for v in x_hat:
            print(f"{v:.17g}", file=out)
        if args.out:
            bench.write_matrix(args.out, x_hat)
    return EXIT_OK


def _selftest(args, out):
    from .selftest import run_all
    return EXIT_OK if run_all(lambda s: print(s, file=out)) else EXIT_CONFIG


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    handlers = {"run": _experiment, "sweep": _experiment, "solve": _solve,
                "selftest": _selftest}
    try:
        return handlers[args.command](args, out)
    except OSError as exc:
        print(f"glmturbo: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (bench.ConfigError, ContractError, ValueError) as exc:
        print(f"glmturbo: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
