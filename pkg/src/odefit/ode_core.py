"""Fixed-step RK4 integration of parameterized ODE systems.

All trajectories live on uniform time grids. Integration is deterministic:
the same (model, parameters, initial state, grid) always produces the same
trajectory, which the estimation objective relies on.

Two execution paths produce the same arithmetic: a numba-compiled kernel for
models that carry a compiled right-hand side, and a plain numpy loop used as
fallback and for ad-hoc models.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._backend import NUMBA_ENABLED

# Any state component beyond this magnitude (or non-finite) aborts
# integration. Bad trial parameters on the chaotic test systems blow up in
# finite time; the objective maps the abort to a large finite cost.
DIVERGENCE_LIMIT = 1e12


class IntegrationDivergedError(RuntimeError):
    """Raised when a state component leaves the finite, bounded regime."""

    def __init__(self, step_index: int, time: float, state: np.ndarray):
        self.step_index = step_index
        self.time = time
        self.state = np.asarray(state)
        super().__init__(
            f"integration diverged at step {step_index} (t={time:.6g}): state={self.state}"
        )


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_start + k*dt for k = 0..n_steps."""

    t_start: float
    t_end: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end must exceed t_start, got [{self.t_start}, {self.t_end}]")

    @property
    def n_steps(self) -> int:
        # Non-integer spans are rounded to the nearest step count; every
        # built-in problem divides evenly.
        return int(round((self.t_end - self.t_start) / self.dt))

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    @property
    def times(self) -> np.ndarray:
        # Multiplication form, not repeated addition: no drift over long grids.
        return self.t_start + self.dt * np.arange(self.n_points)


@dataclass(frozen=True)
class Trajectory:
    """Times plus a (n_points, state_dim) state matrix."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] != times.shape[0]:
            raise ValueError(
                f"states shape {states.shape} does not match {times.shape[0]} time points"
            )
        if times.shape[0] > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]


@dataclass
class DynamicsModel:
    """A vector field F(x, t, p) with declared dimensions.

    ``eval`` must be pure and return a length ``state_dim`` array.
    ``compiled_rhs``, when present, is a numba-jitted in-place variant
    ``rhs(x, t, p, out)`` used by the fast integration kernel; models without
    one integrate through the numpy path.
    """

    name: str
    state_dim: int
    param_count: int
    eval: Callable[[np.ndarray, float, np.ndarray], np.ndarray]
    compiled_rhs: Optional[Callable] = field(default=None, repr=False)


def _check_vector(v, length: int, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (length,):
        raise ValueError(f"{what} must have shape ({length},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{what} must be finite, got {v}")
    return v


def rk4_step(model: DynamicsModel, x, t: float, dt: float, p) -> np.ndarray:
    """Advance one classical Runge-Kutta step of size dt."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = _check_vector(x, model.state_dim, "state")
    p = _check_vector(p, model.param_count, "parameters")
    x_next = _rk4_advance(model.eval, x, t, dt, p)
    if not _state_ok(x_next):
        raise IntegrationDivergedError(0, t + dt, x_next)
    return x_next


def _rk4_advance(f, x, t, dt, p):
    k1 = f(x, t, p)
    k2 = f(x + (0.5 * dt) * k1, t + 0.5 * dt, p)
    k3 = f(x + (0.5 * dt) * k2, t + 0.5 * dt, p)
    k4 = f(x + dt * k3, t + dt, p)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _state_ok(x) -> bool:
    return bool(np.all(np.isfinite(x)) and np.all(np.abs(x) <= DIVERGENCE_LIMIT))


def integrate(model: DynamicsModel, p, x0, grid: TimeGrid, backend: Optional[str] = None) -> Trajectory:
    """Integrate the model over the grid, one RK4 step per grid interval.

    Row 0 of the result is x0; row k+1 is one step from row k. Raises
    :class:`IntegrationDivergedError` as soon as a state component exceeds
    ``DIVERGENCE_LIMIT`` or goes non-finite.

    ``backend`` forces ``"numba"`` or ``"numpy"``; by default the compiled
    kernel is used whenever the model carries one and numba is enabled.
    """
    x0 = _check_vector(x0, model.state_dim, "initial state")
    p = _check_vector(p, model.param_count, "parameters")

    if backend is None:
        backend = "numba" if (NUMBA_ENABLED and model.compiled_rhs is not None) else "numpy"
    if backend == "numba":
        if not NUMBA_ENABLED:
            raise RuntimeError("numba backend requested but numba is disabled or unavailable")
        if model.compiled_rhs is None:
            raise ValueError(f"model {model.name!r} has no compiled rhs for the numba backend")
        kernel = _kernel_for(model.compiled_rhs)
        states, fail_step = kernel(x0, p, grid.t_start, grid.dt, grid.n_steps, DIVERGENCE_LIMIT)
    elif backend == "numpy":
        states, fail_step = _integrate_numpy(model.eval, x0, p, grid)
    else:
        raise ValueError(f"unknown backend {backend!r}")

    if fail_step >= 0:
        raise IntegrationDivergedError(
            fail_step, grid.t_start + fail_step * grid.dt, states[fail_step]
        )
    return Trajectory(times=grid.times, states=states)


def _integrate_numpy(f, x0, p, grid: TimeGrid):
    n_steps = grid.n_steps
    t0, dt = grid.t_start, grid.dt
    states = np.empty((n_steps + 1, x0.shape[0]))
    states[0] = x0
    x = x0
    for step in range(n_steps):
        x = _rk4_advance(f, x, t0 + step * dt, dt, p)
        states[step + 1] = x
        if not _state_ok(x):
            return states, step + 1
    return states, -1


# One compiled kernel per distinct rhs dispatcher, built on first use.
_KERNEL_CACHE: dict = {}


def _kernel_for(compiled_rhs):
    kernel = _KERNEL_CACHE.get(compiled_rhs)
    if kernel is None:
        kernel = _build_rk4_kernel(compiled_rhs)
        _KERNEL_CACHE[compiled_rhs] = kernel
    return kernel


def _build_rk4_kernel(rhs):
    from numba import njit

    # nogil so concurrent benchmark runs overlap their integration time.
    @njit(nogil=True)
    def kernel(x0, p, t0, dt, n_steps, limit):
        dim = x0.shape[0]
        states = np.empty((n_steps + 1, dim))
        k1 = np.empty(dim)
        k2 = np.empty(dim)
        k3 = np.empty(dim)
        k4 = np.empty(dim)
        xt = np.empty(dim)
        x = x0.copy()
        states[0] = x
        for step in range(n_steps):
            t = t0 + step * dt
            rhs(x, t, p, k1)
            for i in range(dim):
                xt[i] = x[i] + (0.5 * dt) * k1[i]
            rhs(xt, t + 0.5 * dt, p, k2)
            for i in range(dim):
                xt[i] = x[i] + (0.5 * dt) * k2[i]
            rhs(xt, t + 0.5 * dt, p, k3)
            for i in range(dim):
                xt[i] = x[i] + dt * k3[i]
            rhs(xt, t + dt, p, k4)
            ok = True
            for i in range(dim):
                x[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not np.isfinite(x[i]) or abs(x[i]) > limit:
                    ok = False
            states[step + 1] = x
            if not ok:
                return states, step + 1
        return states, -1

    return kernel
