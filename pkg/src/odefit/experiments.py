"""Synthetic data generation, the three-problem benchmark, and noise sweeps.

A benchmark run draws a noisy dataset from a problem's true trajectory,
perturbs the true parameters into a starting guess, runs the selected
optimizers, and scores each estimate by re-simulating and comparing against
the noiseless truth. Everything is keyed off one 64-bit seed so a report is
bit-for-bit reproducible (wall times aside).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Optional, Sequence

import numpy as np

from ._fsio import atomic_write_text
from .estimation import Dataset, Objective, cost, fd_gradient, fd_jacobian, residuals, rmse
from .models import ProblemSpec, get_problem
from .ode_core import IntegrationDivergedError, Trajectory, integrate
from .optimizers import (
    STALLED,
    GradientDescentConfig,
    LMConfig,
    NelderMeadConfig,
    OptimizerResult,
    TraceRecord,
    gradient_descent,
    levenberg_marquardt,
    nelder_mead,
)

# Seeded PCG64 streams; Gaussian draws use numpy's ziggurat-based normal().
# Named in every report so the provenance of the noise is explicit.
RNG_IDENTITY = "numpy.random.default_rng(PCG64); Generator.normal (ziggurat)"

# Canonical optimizer keys, in the report/table column order.
OPTIMIZER_ORDER = ("gradient", "levenberg_marquardt", "nelder_mead")
OPTIMIZER_ALIASES = {"lm": "levenberg_marquardt"}
OPTIMIZER_LABELS = {
    "gradient": "Gradient-based",
    "levenberg_marquardt": "Levenberg-Marquardt",
    "nelder_mead": "Nelder-Mead",
}


def canonical_optimizer(name: str) -> str:
    key = OPTIMIZER_ALIASES.get(name, name)
    if key not in OPTIMIZER_ORDER:
        known = ", ".join(list(OPTIMIZER_ORDER) + list(OPTIMIZER_ALIASES))
        raise ValueError(f"unknown optimizer {name!r} (known: {known})")
    return key


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    noise_variance: float = 0.1
    seed: int = 0
    optimizers: tuple = OPTIMIZER_ORDER
    initial_guess_spread: float = 0.3

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")
        if not self.optimizers:
            raise ValueError("at least one optimizer must be selected")
        object.__setattr__(
            self, "optimizers", tuple(canonical_optimizer(n) for n in self.optimizers)
        )


@dataclass
class OptimizerRun:
    """Outcome of one optimizer on one benchmark dataset."""

    params: np.ndarray
    rmse: float
    final_cost: float
    iterations: int
    termination: str
    wall_ms: float
    trajectory: Optional[Trajectory] = field(default=None, repr=False)
    trace: list = field(default_factory=list, repr=False)


@dataclass
class BenchmarkReport:
    problem: str
    seed: int
    noise_variance: float
    initial_guess_spread: float
    rng: str
    param_names: tuple
    true_params: np.ndarray
    p0: np.ndarray
    runs: dict  # canonical optimizer key -> OptimizerRun, column order
    reference: Trajectory = field(repr=False, default=None)


def generate_dataset(spec: ProblemSpec, noise_variance: float, seed: int) -> Dataset:
    """Simulate the true trajectory and add i.i.d. Gaussian noise everywhere.

    Every grid point is observed with unit weight; variance 0 reproduces the
    noiseless trajectory exactly.
    """
    if noise_variance < 0:
        raise ValueError("noise_variance must be >= 0")
    traj = integrate(spec.model, spec.true_params, spec.x0, spec.grid)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, np.sqrt(noise_variance), size=traj.states.shape)
    observations = traj.states + noise
    return Dataset(
        times=traj.times, observations=observations, weights=np.ones_like(observations)
    )


def initial_guess(true_p, spread: float, seed: int) -> np.ndarray:
    """true_p scaled component-wise by (1 + u), u uniform on [-spread, spread]."""
    if not 0.0 <= spread < 1.0:
        raise ValueError("spread must lie in [0, 1)")
    true_p = np.asarray(true_p, dtype=float)
    rng = np.random.default_rng(seed)
    u = rng.uniform(-spread, spread, size=true_p.shape)
    return true_p * (1.0 + u)


def _stalled_run(p0, penalty, wall_ms) -> OptimizerRun:
    return OptimizerRun(
        params=np.asarray(p0, dtype=float).copy(),
        rmse=float("inf"),
        final_cost=penalty,
        iterations=0,
        termination=STALLED,
        wall_ms=wall_ms,
        trajectory=None,
        trace=[TraceRecord(0, penalty, np.asarray(p0, dtype=float).copy())],
    )


def run_optimizer(
    name: str,
    obj: Objective,
    p0,
    gd_cfg: GradientDescentConfig = GradientDescentConfig(),
    lm_cfg: LMConfig = LMConfig(),
    nm_cfg: NelderMeadConfig = NelderMeadConfig(),
) -> OptimizerResult:
    """Run one canonical-named optimizer against an ODE objective."""
    cost_fn = partial(cost, obj)
    if name == "gradient":
        return gradient_descent(
            cost_fn, p0, gd_cfg, grad_fn=lambda q: fd_gradient(obj, q, gd_cfg.fd_rel_step)
        )
    if name == "levenberg_marquardt":

        def jac_fn(q):
            try:
                return fd_jacobian(obj, q, lm_cfg.fd_rel_step)
            except IntegrationDivergedError:
                # Signals LM to stop at its last finite iterate.
                return np.full((1, np.size(q)), np.nan)

        return levenberg_marquardt(partial(residuals, obj), p0, lm_cfg, jacobian_fn=jac_fn)
    if name == "nelder_mead":
        return nelder_mead(cost_fn, p0, nm_cfg)
    raise ValueError(f"unknown optimizer {name!r}")


def run_benchmark(
    cfg: ExperimentConfig,
    gd_cfg: GradientDescentConfig = GradientDescentConfig(),
    lm_cfg: LMConfig = LMConfig(),
    nm_cfg: NelderMeadConfig = NelderMeadConfig(),
) -> BenchmarkReport:
    """Full protocol for one problem: dataset, fits, re-simulation, report.

    Optimizer stalls are recorded in the report, never raised; a starting
    point whose integration already diverges is recorded as a stalled run
    with infinite RMSE.
    """
    spec = get_problem(cfg.problem)
    dataset = generate_dataset(spec, cfg.noise_variance, cfg.seed)
    p0 = initial_guess(spec.true_params, cfg.initial_guess_spread, cfg.seed)
    obj = Objective(spec.model, dataset, spec.x0, spec.grid)
    reference = integrate(spec.model, spec.true_params, spec.x0, spec.grid)

    runs: dict = {}
    for name in [k for k in OPTIMIZER_ORDER if k in cfg.optimizers]:
        start = time.perf_counter()
        try:
            result = run_optimizer(name, obj, p0, gd_cfg, lm_cfg, nm_cfg)
        except (IntegrationDivergedError, ValueError):
            runs[name] = _stalled_run(p0, obj.divergence_penalty,
                                      (time.perf_counter() - start) * 1e3)
            continue
        wall_ms = (time.perf_counter() - start) * 1e3
        try:
            est_traj = integrate(spec.model, result.best_params, spec.x0, spec.grid)
            rmse_value = rmse(reference, est_traj)
        except IntegrationDivergedError:
            est_traj = None
            rmse_value = float("inf")
        runs[name] = OptimizerRun(
            params=result.best_params,
            rmse=rmse_value,
            final_cost=result.best_cost,
            iterations=result.iterations,
            termination=result.termination,
            wall_ms=wall_ms,
            trajectory=est_traj,
            trace=result.trace,
        )
    return BenchmarkReport(
        problem=cfg.problem,
        seed=cfg.seed,
        noise_variance=cfg.noise_variance,
        initial_guess_spread=cfg.initial_guess_spread,
        rng=RNG_IDENTITY,
        param_names=spec.param_names,
        true_params=spec.true_params.copy(),
        p0=p0,
        runs=runs,
        reference=reference,
    )


def noise_sweep(
    problem: str,
    variances: Sequence[float],
    seed: int,
    optimizers: tuple = ("nelder_mead",),
    initial_guess_spread: float = 0.3,
    jobs: int = 1,
) -> list[BenchmarkReport]:
    """One benchmark per noise level, each on its own derived seed (seed + index)."""
    variances = list(variances)
    if not variances:
        raise ValueError("variances must be non-empty")
    if any(v < 0 for v in variances):
        raise ValueError("variances must all be >= 0")
    configs = [
        ExperimentConfig(
            problem=problem,
            noise_variance=v,
            seed=seed + i,
            optimizers=optimizers,
            initial_guess_spread=initial_guess_spread,
        )
        for i, v in enumerate(variances)
    ]
    if jobs <= 1:
        return [run_benchmark(c) for c in configs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_benchmark, c) for c in configs]
        return [f.result() for f in futures]


def report_to_dict(report: BenchmarkReport) -> dict:
    """JSON-ready document; wall_ms is the only run-to-run varying field."""
    return {
        "problem": report.problem,
        "seed": report.seed,
        "noise_variance": report.noise_variance,
        "initial_guess_spread": report.initial_guess_spread,
        "rng": report.rng,
        "param_names": list(report.param_names),
        "true_params": [float(v) for v in report.true_params],
        "p0": [float(v) for v in report.p0],
        "optimizers": {
            name: {
                "params": [float(v) for v in run.params],
                "rmse": float(run.rmse),
                "final_cost": float(run.final_cost),
                "iterations": int(run.iterations),
                "termination": run.termination,
                "wall_ms": float(run.wall_ms),
            }
            for name, run in report.runs.items()
        },
    }


def write_report_json(report: BenchmarkReport, path) -> None:
    atomic_write_text(path, json.dumps(report_to_dict(report), indent=2) + "\n")


def format_report_table(report: BenchmarkReport) -> str:
    """Human-readable table: true values beside one estimate column per optimizer."""
    names = list(report.runs)
    headers = ["Parameter", "True Value"] + [OPTIMIZER_LABELS[n] for n in names]
    rows = []
    for i, pname in enumerate(report.param_names):
        rows.append(
            [pname, f"{report.true_params[i]:.4f}"]
            + [f"{report.runs[n].params[i]:.4f}" for n in names]
        )
    rows.append(["RMSE", ""] + [f"{report.runs[n].rmse:.4f}" for n in names])
    rows.append(["Termination", ""] + [report.runs[n].termination for n in names])
    widths = [max(len(str(r[c])) for r in [headers] + rows) for c in range(len(headers))]
    lines = [
        f"Problem: {report.problem}  "
        f"(seed {report.seed}, noise variance {report.noise_variance:g}, "
        f"start spread {report.initial_guess_spread:g})"
    ]
    lines.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def write_report_table(report: BenchmarkReport, path) -> None:
    atomic_write_text(path, format_report_table(report))


def write_overlay_csv(report: BenchmarkReport, optimizer: str, path) -> None:
    """True-vs-estimated trajectory columns: t,true_x1..xd,est_x1..xd.

    A run whose estimate cannot be re-simulated (diverged) emits NaN columns.
    """
    run = report.runs[optimizer]
    ref = report.reference
    d = ref.state_dim
    header = (
        "t,"
        + ",".join(f"true_x{i + 1}" for i in range(d))
        + ","
        + ",".join(f"est_x{i + 1}" for i in range(d))
    )
    est = run.trajectory.states if run.trajectory is not None else np.full_like(ref.states, np.nan)
    lines = [header]
    for t, true_row, est_row in zip(ref.times, ref.states, est):
        lines.append(",".join(repr(float(v)) for v in (t, *true_row, *est_row)))
    atomic_write_text(path, "\n".join(lines) + "\n")
