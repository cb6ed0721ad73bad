"""Command-line interface: fit, predict, cv-report, simulate, approx-curve.

Exit codes: 0 success, 2 usage or validation problem, 3 data problem,
4 numerical failure.  Every command honors --seed, and --threads only
changes scheduling, never numbers.  SIER_THREADS sets the default thread
count.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

from . import io as sio
from .errors import DataError, NumericalError, SierError, ValidationError
from .extractor import PenaltyPair, SolverConfig
from .model import Dataset, predict
from .numerics import RandomStream
from .simulate import (
    SimulationSpec,
    approx_error_curve,
    case1_spec,
    case2_spec,
    case3_spec,
    gen_figure1,
    run_study,
)
from .tuning import TuningGrid, cross_validate


@dataclass(frozen=True)
class RunConfig:
    """Validated tuning/solver options shared by the fitting commands."""

    grid: TuningGrid
    solver: SolverConfig
    folds: int
    seed: int
    threads: int
    scale: bool = False

    def __post_init__(self):
        if self.folds < 2:
            raise ValidationError("--folds must be at least 2")
        if self.threads < 1:
            raise ValidationError("--threads must be at least 1")
        if self.seed < 0:
            raise ValidationError("--seed must be non-negative")


def _default_threads() -> int:
    env = os.environ.get("SIER_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _add_tuning_args(sub):
    sub.add_argument("--grid", help="CSV of tau,lambda pairs replacing the default grid")
    sub.add_argument("--threshold", type=float, default=0.05,
                     help="component-share stopping threshold (default 0.05)")
    sub.add_argument("--folds", type=int, default=5)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=_default_threads())


def _run_config(args) -> RunConfig:
    if args.grid:
        values, _header = sio.read_csv(args.grid)
        if values.shape[1] != 2:
            raise DataError(f"{args.grid}: expected 2 columns (tau, lambda)")
        pairs = tuple(PenaltyPair(float(t), float(l)) for t, l in values)
        grid = TuningGrid(pairs=pairs, threshold=args.threshold)
    else:
        grid = TuningGrid(threshold=args.threshold)
    return RunConfig(
        grid=grid,
        solver=SolverConfig(),
        folds=args.folds,
        seed=args.seed,
        threads=args.threads,
        scale=getattr(args, "scale", False),
    )


def _load_xy(x_path: str, y_path: str) -> Dataset:
    x, _ = sio.read_csv(x_path)
    y, _ = sio.read_csv(y_path)
    if x.shape[0] != y.shape[0]:
        raise DataError(
            f"{x_path} has {x.shape[0]} rows but {y_path} has {y.shape[0]}"
        )
    return Dataset(x, y)


def _fit(data: Dataset, rc: RunConfig):
    return cross_validate(
        data,
        rc.grid,
        rc.solver,
        RandomStream(rc.seed),
        folds=rc.folds,
        threads=rc.threads,
        scale=rc.scale,
    )


def _print_report(report, out):
    pair = report.pairs[report.chosen_pair]
    print(f"chosen tau={pair.tau:g} lambda={pair.lam:g} k_opt={report.chosen_k}", file=out)
    print("mean validation error by (pair, components):", file=out)
    for i, p in enumerate(report.pairs):
        cells = " ".join(
            f"{report.errors[i, j]:.6g}" for j in range(report.k_caps[i])
        )
        print(f"  tau={p.tau:<6g} lambda={p.lam:<4g} | {cells}", file=out)


def cmd_fit(args) -> int:
    rc = _run_config(args)
    data = _load_xy(args.x, args.y)
    model, report = _fit(data, rc)
    sio.save_model(model, args.out)
    report_path = args.report or args.out + ".cv.csv"
    sio.write_cv_report(report, report_path)
    _print_report(report, sys.stdout)
    print(f"model written to {args.out}; report to {report_path}")
    return 0


def cmd_cv_report(args) -> int:
    rc = _run_config(args)
    data = _load_xy(args.x, args.y)
    _model, report = _fit(data, rc)
    sio.write_cv_report(report, args.out)
    _print_report(report, sys.stdout)
    return 0


def cmd_predict(args) -> int:
    model = sio.load_model(args.model)
    x, _ = sio.read_csv(args.x)
    preds = predict(model, x, k=args.k)
    sio.write_csv(args.out, preds)
    print(f"{preds.shape[0]} predictions written to {args.out}")
    return 0


def _spec_from_args(args) -> SimulationSpec:
    common = dict(
        n_train=args.n_train,
        n_test=args.n_test,
        reps=args.reps,
        seed=args.seed,
    )
    if args.case == "1":
        return case1_spec(
            rho=args.rho if args.rho is not None else 0.3,
            r=args.noise_r if args.noise_r is not None else 0.2,
            sigma2_total=args.noise_level if args.noise_level is not None else 0.1,
            **common,
        )
    if args.case == "2":
        return case2_spec(
            p=args.p if args.p is not None else 100,
            q=args.q if args.q is not None else 20,
            rho=args.rho if args.rho is not None else 0.3,
            r=args.noise_r if args.noise_r is not None else 0.0,
            sigma2_total=args.noise_level if args.noise_level is not None else 0.015,
            **common,
        )
    if args.rho is None:
        print(
            "warning: --rho not given for case 3; using the package default 0.7",
            file=sys.stderr,
        )
    if args.noise_r is not None or args.noise_level is not None:
        print("warning: case 3 fixes noise at level 0.15, correlation 0.5", file=sys.stderr)
    return case3_spec(
        p=args.p if args.p is not None else 1000,
        q=args.q if args.q is not None else 100,
        gamma=args.gamma,
        rho=args.rho if args.rho is not None else 0.7,
        **common,
    )


def cmd_simulate(args) -> int:
    if args.case == "figure1":
        x, b = gen_figure1(
            RandomStream(args.seed),
            n=100,
            p=args.p if args.p is not None else 1000,
            q=args.q if args.q is not None else 100,
        )
        err_sig, err_svd = approx_error_curve(x, b)
        sio.write_curve_csv(err_sig, err_svd, args.out)
        print(f"{err_sig.shape[0]} curve rows written to {args.out}")
        return 0
    rc = _run_config(args)
    spec = _spec_from_args(args)
    result = run_study(spec, rc.grid, rc.solver, folds=rc.folds, threads=rc.threads)
    sio.write_study_csv(result, args.out)
    agg = result.aggregates()
    mean, sd = agg["mspe"]
    print(f"case {spec.case}: {spec.reps} replicates, MSPE {mean:.3f}({sd:.3f})")
    print(f"study written to {args.out}")
    return 0


def cmd_approx_curve(args) -> int:
    x, b = gen_figure1(
        RandomStream(args.seed), n=args.n, p=args.p, q=args.q,
        rank=args.rank, support=args.support,
    )
    err_sig, err_svd = approx_error_curve(x, b)
    sio.write_curve_csv(err_sig, err_svd, args.out)
    print(f"{err_sig.shape[0]} curve rows written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sier",
        description="Sparse reduced-rank multivariate regression by signal extraction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="tune and fit a model from CSV data")
    p_fit.add_argument("x", help="predictor CSV (n rows, p columns)")
    p_fit.add_argument("y", help="response CSV (n rows, q columns)")
    p_fit.add_argument("--out", required=True, help="model JSON output path")
    p_fit.add_argument("--report", help="CV report CSV path (default <out>.cv.csv)")
    p_fit.add_argument("--scale", action="store_true",
                       help="rescale predictor columns to unit root-mean-square")
    _add_tuning_args(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_rep = sub.add_parser("cv-report", help="run cross-validation, write the report only")
    p_rep.add_argument("x")
    p_rep.add_argument("y")
    p_rep.add_argument("--out", required=True, help="CV report CSV path")
    p_rep.add_argument("--scale", action="store_true",
                       help="rescale predictor columns to unit root-mean-square")
    _add_tuning_args(p_rep)
    p_rep.set_defaults(func=cmd_cv_report)

    p_pred = sub.add_parser("predict", help="predict responses with a saved model")
    p_pred.add_argument("model", help="model JSON from 'fit'")
    p_pred.add_argument("x", help="predictor CSV")
    p_pred.add_argument("--out", required=True, help="prediction CSV path")
    p_pred.add_argument("--k", type=int, default=None,
                        help="components to use (default: tuned count; 0 = mean only)")
    p_pred.set_defaults(func=cmd_predict)

    p_sim = sub.add_parser("simulate", help="run a replicate study or the curve experiment")
    p_sim.add_argument("--case", required=True, choices=["1", "2", "3", "figure1"])
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.add_argument("--reps", type=int, default=50)
    p_sim.add_argument("--rho", type=float, default=None, help="predictor correlation")
    p_sim.add_argument("--noise-r", type=float, default=None, dest="noise_r",
                       help="noise correlation (defaults: 0.2 / 0 / fixed 0.5)")
    p_sim.add_argument("--noise-level", type=float, default=None, dest="noise_level",
                       help="total noise variance q*sigma^2")
    p_sim.add_argument("--p", type=int, default=None)
    p_sim.add_argument("--q", type=int, default=None)
    p_sim.add_argument("--gamma", type=float, default=1.0, help="case-3 smoothness exponent")
    p_sim.add_argument("--n-train", type=int, default=90, dest="n_train")
    p_sim.add_argument("--n-test", type=int, default=500, dest="n_test")
    _add_tuning_args(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_curve = sub.add_parser("approx-curve", help="low-rank approximation error curves")
    p_curve.add_argument("--out", required=True, help="curve CSV path")
    p_curve.add_argument("--seed", type=int, default=0)
    p_curve.add_argument("--n", type=int, default=100)
    p_curve.add_argument("--p", type=int, default=1000)
    p_curve.add_argument("--q", type=int, default=100)
    p_curve.add_argument("--rank", type=int, default=25)
    p_curve.add_argument("--support", type=int, default=40)
    p_curve.set_defaults(func=cmd_approx_curve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except SierError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
