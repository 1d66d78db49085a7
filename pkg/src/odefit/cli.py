"""Command-line surface: simulate, estimate, benchmark, noise-sweep.

All file outputs are written atomically (temp file + rename) into the
directory given by --out, which is created on demand. Exit codes: 0 success,
2 usage or input error, 1 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._fsio import atomic_write_text
from .estimation import DatasetFormatError, Objective, dataset_from_csv, rmse
from .experiments import (
    ExperimentConfig,
    canonical_optimizer,
    initial_guess,
    noise_sweep,
    run_benchmark,
    run_optimizer,
    write_overlay_csv,
    write_report_json,
    write_report_table,
)
from .models import get_problem, problem_names
from .ode_core import IntegrationDivergedError, integrate
from .optimizers import trace_to_csv


class CliInputError(Exception):
    """Bad user input; maps to exit code 2."""


def _parse_float_list(text: str, what: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise CliInputError(f"{what} must be a comma-separated list of numbers, got {text!r}")
    if not values:
        raise CliInputError(f"{what} must contain at least one number")
    return values


def _ensure_out_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _get_problem(name: str):
    try:
        return get_problem(name)
    except KeyError as exc:
        raise CliInputError(exc.args[0]) from None


def _write_trajectory_csv(path, traj) -> None:
    d = traj.state_dim
    lines = ["t," + ",".join(f"x{i + 1}" for i in range(d))]
    for t, row in zip(traj.times, traj.states):
        lines.append(",".join(repr(float(v)) for v in (t, *row)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _cmd_list_problems(args) -> int:
    for name in problem_names():
        spec = get_problem(name)
        grid = spec.grid
        print(
            f"{name}: state_dim={spec.model.state_dim}, "
            f"params=({', '.join(spec.param_names)}), "
            f"grid=[{grid.t_start:g}, {grid.t_end:g}] dt={grid.dt:g} "
            f"({grid.n_points} points)"
        )
    return 0


def _cmd_simulate(args) -> int:
    spec = _get_problem(args.problem)
    if args.params is not None:
        params = np.asarray(_parse_float_list(args.params, "--params"))
        if params.shape != spec.true_params.shape:
            raise CliInputError(
                f"--params needs {spec.true_params.shape[0]} values for "
                f"{args.problem}, got {params.shape[0]}"
            )
    else:
        params = spec.true_params
    try:
        traj = integrate(spec.model, params, spec.x0, spec.grid)
    except IntegrationDivergedError as exc:
        raise CliInputError(f"simulation diverged for the given parameters: {exc}")
    out_dir = _ensure_out_dir(args.out)
    path = os.path.join(out_dir, f"trajectory_{args.problem}.csv")
    _write_trajectory_csv(path, traj)
    print(f"wrote {path}")
    return 0


def _cmd_estimate(args) -> int:
    spec = _get_problem(args.problem)
    optimizer = _canonical(args.optimizer)
    dataset = dataset_from_csv(args.data, state_dim=spec.model.state_dim)
    try:
        obj = Objective(spec.model, dataset, spec.x0, spec.grid)
    except ValueError as exc:
        raise CliInputError(f"{args.data}: {exc}")
    p0 = initial_guess(spec.true_params, args.initial_spread, args.seed)
    result = run_optimizer(optimizer, obj, p0)
    reference = integrate(spec.model, spec.true_params, spec.x0, spec.grid)
    try:
        estimated = integrate(spec.model, result.best_params, spec.x0, spec.grid)
        rmse_value = rmse(reference, estimated)
    except IntegrationDivergedError:
        rmse_value = float("inf")
    out_dir = _ensure_out_dir(args.out)
    trace_path = os.path.join(out_dir, f"trace_{args.problem}_{optimizer}.csv")
    trace_to_csv(result, trace_path)
    print(
        json.dumps(
            {
                "problem": args.problem,
                "optimizer": optimizer,
                "params": [float(v) for v in result.best_params],
                "final_cost": float(result.best_cost),
                "rmse": rmse_value,
                "iterations": result.iterations,
                "termination": result.termination,
                "p0": [float(v) for v in p0],
                "seed": args.seed,
                "trace_csv": trace_path,
            },
            indent=2,
        )
    )
    return 0


def _write_benchmark_outputs(report, out_dir: str) -> None:
    write_report_json(report, os.path.join(out_dir, f"report_{report.problem}.json"))
    write_report_table(report, os.path.join(out_dir, f"table_{report.problem}.txt"))
    for optimizer in report.runs:
        write_overlay_csv(
            report, optimizer, os.path.join(out_dir, f"overlay_{report.problem}_{optimizer}.csv")
        )


def _cmd_benchmark(args) -> int:
    if args.noise_variance < 0:
        raise CliInputError("--noise-variance must be >= 0")
    problems = problem_names() if args.problem == "all" else [_get_problem(args.problem).name]
    configs = [
        ExperimentConfig(
            problem=name,
            noise_variance=args.noise_variance,
            seed=args.seed,
            initial_guess_spread=args.initial_spread,
        )
        for name in problems
    ]
    out_dir = _ensure_out_dir(args.out)
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(run_benchmark, configs))
    else:
        reports = [run_benchmark(c) for c in configs]
    for report in reports:
        _write_benchmark_outputs(report, out_dir)
        print(f"benchmark {report.problem}: report_{report.problem}.json written to {out_dir}")
    return 0


def _cmd_noise_sweep(args) -> int:
    spec = _get_problem(args.problem)
    variances = _parse_float_list(args.variances, "--variances")
    if any(v < 0 for v in variances):
        raise CliInputError("--variances must all be >= 0")
    reports = noise_sweep(
        spec.name,
        variances,
        seed=args.seed,
        initial_guess_spread=args.initial_spread,
        jobs=args.jobs,
    )
    out_root = _ensure_out_dir(args.out)
    for report in reports:
        level_dir = _ensure_out_dir(os.path.join(out_root, f"level_{report.noise_variance:g}"))
        write_report_json(report, os.path.join(level_dir, "report.json"))
        for optimizer in report.runs:
            write_overlay_csv(
                report,
                optimizer,
                os.path.join(level_dir, f"overlay_{report.problem}_{optimizer}.csv"),
            )
        print(f"noise level {report.noise_variance:g}: wrote {level_dir}")
    return 0


def _canonical(name: str) -> str:
    try:
        return canonical_optimizer(name)
    except ValueError as exc:
        raise CliInputError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odefit",
        description="Simulate nonlinear ODE benchmark systems and estimate their "
        "parameters from trajectory data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-problems", help="list the built-in benchmark problems")
    p.set_defaults(func=_cmd_list_problems)

    p = sub.add_parser("simulate", help="write a trajectory CSV for a problem")
    p.add_argument("--problem", required=True, help="problem name (see list-problems)")
    p.add_argument("--params", help="comma-separated parameter override")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="fit one optimizer to a dataset CSV")
    p.add_argument("--problem", required=True)
    p.add_argument("--data", required=True, help="dataset CSV with header t,x1,...,xd")
    p.add_argument(
        "--optimizer",
        required=True,
        help="gradient | lm | levenberg_marquardt | nelder_mead",
    )
    p.add_argument("--seed", type=int, default=0, help="seed for the starting guess")
    p.add_argument("--initial-spread", type=float, default=0.3,
                   help="relative spread of the starting guess (default 0.3)")
    p.add_argument("--out", default=".", help="output directory for the trace CSV")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("benchmark", help="run the full benchmark protocol")
    p.add_argument("--problem", required=True, help="problem name or 'all'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-variance", type=float, default=0.1)
    p.add_argument("--initial-spread", type=float, default=0.3)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel benchmark runs (default 1)")
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("noise-sweep", help="benchmark one problem across noise levels")
    p.add_argument("--problem", required=True)
    p.add_argument("--variances", required=True, help="comma-separated noise variances")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial-spread", type=float, default=0.3)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_noise_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage/help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CliInputError, DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
