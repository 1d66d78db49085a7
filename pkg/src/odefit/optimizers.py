"""Three parameter-search algorithms over a cost (or residual) oracle.

* ``gradient_descent``: steepest descent with an exact line search along the
  negative gradient (golden-section on a bounded step interval).
* ``levenberg_marquardt``: damped Gauss-Newton on the residual vector with
  the factor-of-10 damping schedule.
* ``nelder_mead``: downhill simplex with reflection, expansion, inside and
  outside contraction, and a shrink-toward-best fallback.

The optimizers consume plain callables so they run on synthetic test
functions as well as ODE objectives; ``experiments`` adapts an
:class:`~odefit.estimation.Objective` into the callables. Every run is
deterministic given (oracle, start point, config).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.linalg

from ._fsio import atomic_write_text
from .ode_core import IntegrationDivergedError

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
STALLED = "stalled"


class TraceRecord(NamedTuple):
    iteration: int
    cost: float
    params: np.ndarray


@dataclass
class OptimizerResult:
    best_params: np.ndarray
    best_cost: float
    iterations: int
    termination: str
    trace: list[TraceRecord]


def trace_to_csv(result: OptimizerResult, path) -> None:
    """Write the iteration trace as `iteration,cost,p1,...,pn` rows."""
    n = result.best_params.shape[0]
    lines = ["iteration,cost," + ",".join(f"p{i + 1}" for i in range(n))]
    for rec in result.trace:
        lines.append(
            f"{rec.iteration},{rec.cost!r}," + ",".join(repr(float(v)) for v in rec.params)
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass(frozen=True)
class LineSearchConfig:
    mu_max: float = 1.0
    tolerance: float = 1e-6
    max_evals: int = 64

    def __post_init__(self):
        if not (self.mu_max > 0 and self.tolerance > 0 and self.max_evals >= 2):
            raise ValueError("invalid line-search configuration")


@dataclass(frozen=True)
class GradientDescentConfig:
    epsilon: float = 1e-8          # tolerance on ||p_k - p_{k-1}||
    max_iterations: int = 5000
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    fd_rel_step: float = 1e-6

    def __post_init__(self):
        if not (self.epsilon > 0 and self.max_iterations >= 1 and self.fd_rel_step > 0):
            raise ValueError("invalid gradient-descent configuration")


@dataclass(frozen=True)
class LMConfig:
    lambda0: float = 1e-3
    lambda_factor: float = 10.0    # damping moves by this factor per accept/reject
    epsilon: float = 1e-8          # tolerance on the attempted step norm
    max_iterations: int = 200
    lambda_max: float = 1e12
    fd_rel_step: float = 1e-6

    def __post_init__(self):
        if not (self.lambda0 > 0 and self.lambda_factor > 1 and self.epsilon > 0):
            raise ValueError("invalid Levenberg-Marquardt configuration")


@dataclass(frozen=True)
class NelderMeadConfig:
    alpha: float = 1.0             # reflection, > 0
    beta: float = 2.0              # expansion, > 1
    gamma: float = 0.5             # contraction, in (0, 1)
    shrink: float = 0.5            # shrink toward best, in (0, 1)
    initial_scale: float = 0.05    # relative edge of the start simplex
    zero_offset: float = 0.00025   # absolute edge for zero components
    cost_tolerance: float = 1e-12  # spread max-min across vertices
    simplex_tolerance: float = 1e-8
    max_iterations: Optional[int] = None  # defaults to 2000 * n
    strict_paper_branch: bool = False     # compare reflection against vertex 1, not n-1
    stall_cost: float = 1e30       # best cost at/above this counts as all-divergent

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 1 and 0 < self.gamma < 1 and 0 < self.shrink < 1):
            raise ValueError("invalid Nelder-Mead coefficients")
        if not (self.cost_tolerance >= 0 and self.simplex_tolerance >= 0):
            raise ValueError("invalid Nelder-Mead tolerances")


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(phi: Callable[[float], float], f0: float, cfg: LineSearchConfig):
    """Minimize phi on [0, mu_max]; returns (mu, phi(mu)) with phi(mu) <= f0."""
    best_mu, best_f = 0.0, f0

    def probe(mu):
        nonlocal best_mu, best_f
        f = phi(mu)
        if np.isfinite(f) and f < best_f:
            best_mu, best_f = mu, f
        return f

    a, b = 0.0, cfg.mu_max
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = probe(c)
    fd = probe(d)
    evals = 2
    while (b - a) > cfg.tolerance and evals < cfg.max_evals:
        # Ties keep the lower interval: on flat stretches (e.g. the
        # divergence-penalty plateau) the dip, if any, sits toward mu = 0.
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = probe(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = probe(d)
        evals += 1
    return best_mu, best_f


def line_search_mu(cost_fn, p, grad, cfg: LineSearchConfig = LineSearchConfig(), f0=None) -> float:
    """Step size approximately minimizing cost(p - mu*grad) on [0, mu_max].

    Guarantees cost at the returned mu does not exceed cost at mu = 0; a zero
    gradient or a flat/deteriorating slice returns 0.
    """
    grad = np.asarray(grad, dtype=float)
    if not np.any(grad):
        return 0.0
    p = np.asarray(p, dtype=float)
    if f0 is None:
        f0 = cost_fn(p)
    mu, _ = _golden_section(lambda mu: cost_fn(p - mu * grad), f0, cfg)
    return mu


def _fd_gradient_of(cost_fn, p, rel_step):
    h = rel_step * np.maximum(np.abs(p), 1.0)
    g = np.empty_like(p)
    for k in range(p.shape[0]):
        e = np.zeros_like(p)
        e[k] = h[k]
        g[k] = (cost_fn(p + e) - cost_fn(p - e)) / (2.0 * h[k])
    return g


def _fd_jacobian_of(residual_fn, p, rel_step):
    h = rel_step * np.maximum(np.abs(p), 1.0)
    cols = []
    for k in range(p.shape[0]):
        e = np.zeros_like(p)
        e[k] = h[k]
        cols.append((residual_fn(p + e) - residual_fn(p - e)) / (2.0 * h[k]))
    return np.column_stack(cols)


def gradient_descent(
    cost_fn: Callable[[np.ndarray], float],
    p0,
    cfg: GradientDescentConfig = GradientDescentConfig(),
    grad_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> OptimizerResult:
    """Iterate p <- p - mu * grad(p) with a line-searched step size.

    Terminates converged once the parameter change ||p_k - p_{k-1}|| drops to
    cfg.epsilon (a failed line search gives a zero step and therefore also
    converges), stalled on a non-finite gradient, else at the iteration cap.
    The line-search guarantee makes the per-iterate cost non-increasing.
    """
    p = np.asarray(p0, dtype=float).copy()
    c = float(cost_fn(p))
    trace = [TraceRecord(0, c, p.copy())]
    termination = MAX_ITERATIONS
    iterations = 0
    for k in range(1, cfg.max_iterations + 1):
        iterations = k
        g = grad_fn(p) if grad_fn is not None else _fd_gradient_of(cost_fn, p, cfg.fd_rel_step)
        g = np.asarray(g, dtype=float)
        if not np.all(np.isfinite(g)):
            iterations = k - 1
            termination = STALLED
            break
        if not np.any(g):
            termination = CONVERGED
            break
        mu, f_mu = _golden_section(lambda mu: cost_fn(p - mu * g), c, cfg.line_search)
        step = mu * float(np.linalg.norm(g))
        p = p - mu * g
        c = f_mu
        trace.append(TraceRecord(k, c, p.copy()))
        if step <= cfg.epsilon:
            termination = CONVERGED
            break
    return OptimizerResult(p, c, iterations, termination, trace)


def levenberg_marquardt(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    p0,
    cfg: LMConfig = LMConfig(),
    jacobian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> OptimizerResult:
    """Damped Gauss-Newton iteration on a residual vector e(p).

    Each iteration solves (J'J + lambda*I) dp = -J'e and accepts p + dp only
    if it lowers the scalar cost e'e, dividing lambda by the damping factor;
    rejections multiply lambda instead and retry from the same point (the
    cached Jacobian stays valid there). Terminates converged when the
    attempted step norm reaches cfg.epsilon, stalled when lambda overflows
    lambda_max or the Jacobian goes non-finite.

    Raises if the residuals at p0 are non-finite or the integration diverges
    there; trial-point divergence during the iteration is treated as a
    rejected step.
    """
    p = np.asarray(p0, dtype=float).copy()
    r = np.asarray(residual_fn(p), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals are non-finite at the starting point")
    c = float(r @ r)
    lam = cfg.lambda0
    n = p.shape[0]
    eye = np.eye(n)
    trace = [TraceRecord(0, c, p.copy())]
    termination = MAX_ITERATIONS
    iterations = 0
    jtj = jtr = None
    lam_floor = np.finfo(float).tiny

    for it in range(1, cfg.max_iterations + 1):
        iterations = it
        if jtj is None:
            jac = (
                jacobian_fn(p)
                if jacobian_fn is not None
                else _fd_jacobian_of(residual_fn, p, cfg.fd_rel_step)
            )
            jac = np.asarray(jac, dtype=float)
            if not np.all(np.isfinite(jac)):
                iterations = it - 1
                termination = STALLED
                break
            jtj = jac.T @ jac
            jtr = jac.T @ r
        try:
            dp = scipy.linalg.cho_solve(scipy.linalg.cho_factor(jtj + lam * eye), -jtr)
        except scipy.linalg.LinAlgError:
            # Not PD at this damping; escalate as if the trial failed.
            lam *= cfg.lambda_factor
            if lam > cfg.lambda_max:
                termination = STALLED
                break
            continue
        step = float(np.linalg.norm(dp))
        trial = p + dp
        try:
            r_trial = np.asarray(residual_fn(trial), dtype=float)
            c_trial = float(r_trial @ r_trial) if np.all(np.isfinite(r_trial)) else math.inf
        except IntegrationDivergedError:
            c_trial = math.inf
        if c_trial < c:
            p, r, c = trial, r_trial, c_trial
            lam = max(lam / cfg.lambda_factor, lam_floor)
            jtj = jtr = None
            trace.append(TraceRecord(it, c, p.copy()))
        else:
            lam *= cfg.lambda_factor
        if step <= cfg.epsilon:
            termination = CONVERGED
            break
        if lam > cfg.lambda_max:
            termination = STALLED
            break
    return OptimizerResult(p, c, iterations, termination, trace)


def nelder_mead(
    cost_fn: Callable[[np.ndarray], float],
    p0,
    cfg: NelderMeadConfig = NelderMeadConfig(),
) -> OptimizerResult:
    """Downhill simplex search over n+1 vertices.

    The start simplex is p0 plus one vertex per axis with that component
    scaled by (1 + initial_scale), or offset by zero_offset where it is zero.
    Iterations reflect the worst vertex about the centroid of the rest, then
    expand, contract, or shrink everything toward the best vertex. Converges
    when the vertex cost spread or the simplex diameter closes; reports
    stalled when even the best vertex sits at divergence-penalty cost.
    """
    p0 = np.asarray(p0, dtype=float)
    n = p0.shape[0]
    max_iterations = cfg.max_iterations if cfg.max_iterations is not None else 2000 * n

    vertices = np.empty((n + 1, n))
    vertices[0] = p0
    for k in range(n):
        v = p0.copy()
        v[k] = v[k] * (1.0 + cfg.initial_scale) if v[k] != 0.0 else cfg.zero_offset
        vertices[k + 1] = v
    costs = np.array([float(cost_fn(v)) for v in vertices])

    def sort_vertices():
        nonlocal vertices, costs
        order = np.argsort(costs, kind="stable")
        vertices = vertices[order]
        costs = costs[order]

    def replace_worst(v, f):
        vertices[n] = v
        costs[n] = f

    sort_vertices()
    trace = [TraceRecord(0, costs[0], vertices[0].copy())]
    iterations = 0
    termination = None
    while termination is None:
        spread = costs[n] - costs[0]
        diameter = float(np.max(np.linalg.norm(vertices - vertices[0], axis=1)))
        if spread <= cfg.cost_tolerance or diameter <= cfg.simplex_tolerance:
            termination = CONVERGED
        elif iterations >= max_iterations:
            termination = MAX_ITERATIONS
        else:
            iterations += 1
            centroid = vertices[:n].mean(axis=0)
            reflected = centroid + cfg.alpha * (centroid - vertices[n])
            f_reflected = float(cost_fn(reflected))
            if f_reflected < costs[0]:
                expanded = centroid + cfg.beta * (reflected - centroid)
                f_expanded = float(cost_fn(expanded))
                if f_expanded < f_reflected:
                    replace_worst(expanded, f_expanded)
                else:
                    replace_worst(reflected, f_reflected)
            elif f_reflected >= costs[1 if cfg.strict_paper_branch else n - 1]:
                # Contract between the centroid and the better of the worst
                # and reflected vertices; a failed contraction shrinks the
                # whole simplex around the best vertex.
                if f_reflected < costs[n]:
                    contracted = centroid + cfg.gamma * (reflected - centroid)
                    f_contracted = float(cost_fn(contracted))
                    accepted = f_contracted <= f_reflected
                else:
                    contracted = centroid + cfg.gamma * (vertices[n] - centroid)
                    f_contracted = float(cost_fn(contracted))
                    accepted = f_contracted < costs[n]
                if accepted and not np.array_equal(contracted, vertices[0]):
                    replace_worst(contracted, f_contracted)
                else:
                    _shrink(vertices, costs, cost_fn, cfg.shrink)
            else:
                replace_worst(reflected, f_reflected)
            sort_vertices()
            trace.append(TraceRecord(iterations, costs[0], vertices[0].copy()))
    if not np.isfinite(costs[0]) or costs[0] >= cfg.stall_cost:
        termination = STALLED
    return OptimizerResult(vertices[0].copy(), costs[0], iterations, termination, trace)


def _shrink(vertices, costs, cost_fn, factor):
    best = vertices[0]
    for i in range(1, vertices.shape[0]):
        vertices[i] = best + factor * (vertices[i] - best)
        costs[i] = float(cost_fn(vertices[i]))
