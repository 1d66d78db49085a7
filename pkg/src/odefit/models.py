"""Benchmark vector fields and the registry of built-in problems.

Three classic nonlinear systems: the Lotka-Volterra predator-prey model
(4 parameters), the Van der Pol oscillator (1 parameter), and the Rossler
system (3 parameters, chaotic). Each is registered as a fully-configured
problem (true parameters, initial state, time grid) selectable by name.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._backend import NUMBA_ENABLED
from .ode_core import DynamicsModel, TimeGrid


def lotka_volterra_rhs(x, p):
    """Predator-prey field: (p1*x1 - p2*x1*x2, -p3*x2 + p4*x1*x2)."""
    return np.array([
        p[0] * x[0] - p[1] * x[0] * x[1],
        -p[2] * x[1] + p[3] * x[0] * x[1],
    ])


def van_der_pol_rhs(x, p):
    """Van der Pol oscillator in first-order form; p[0] is the damping strength."""
    return np.array([
        x[1],
        p[0] * (1.0 - x[0] * x[0]) * x[1] - x[0],
    ])


def rossler_rhs(x, p):
    """Rossler field: (-x2 - x3, x1 + p1*x2, p2 + x3*(x1 - p3))."""
    return np.array([
        -x[1] - x[2],
        x[0] + p[0] * x[1],
        p[1] + x[2] * (x[0] - p[2]),
    ])


def _lv_eval(x, t, p):
    return lotka_volterra_rhs(x, p)


def _vdp_eval(x, t, p):
    return van_der_pol_rhs(x, p)


def _rossler_eval(x, t, p):
    return rossler_rhs(x, p)


if NUMBA_ENABLED:
    from numba import njit

    # In-place variants for the integration kernel; arithmetic mirrors the
    # numpy functions above term for term.
    @njit(nogil=True, cache=True)
    def _lv_rhs_nb(x, t, p, out):
        out[0] = p[0] * x[0] - p[1] * x[0] * x[1]
        out[1] = -p[2] * x[1] + p[3] * x[0] * x[1]

    @njit(nogil=True, cache=True)
    def _vdp_rhs_nb(x, t, p, out):
        out[0] = x[1]
        out[1] = p[0] * (1.0 - x[0] * x[0]) * x[1] - x[0]

    @njit(nogil=True, cache=True)
    def _rossler_rhs_nb(x, t, p, out):
        out[0] = -x[1] - x[2]
        out[1] = x[0] + p[0] * x[1]
        out[2] = p[1] + x[2] * (x[0] - p[2])

else:
    _lv_rhs_nb = _vdp_rhs_nb = _rossler_rhs_nb = None


@dataclass(frozen=True)
class ProblemSpec:
    """A named benchmark configuration: model, truth, start state, grid."""

    name: str
    model: DynamicsModel
    true_params: np.ndarray
    x0: np.ndarray
    grid: TimeGrid
    param_names: tuple

    def __post_init__(self):
        tp = np.asarray(self.true_params, dtype=float)
        x0 = np.asarray(self.x0, dtype=float)
        if tp.shape != (self.model.param_count,):
            raise ValueError("true_params length must match model.param_count")
        if x0.shape != (self.model.state_dim,):
            raise ValueError("x0 length must match model.state_dim")
        object.__setattr__(self, "true_params", tp)
        object.__setattr__(self, "x0", x0)


LOTKA_VOLTERRA = DynamicsModel(
    name="lotka_volterra", state_dim=2, param_count=4,
    eval=_lv_eval, compiled_rhs=_lv_rhs_nb,
)

VAN_DER_POL = DynamicsModel(
    name="van_der_pol", state_dim=2, param_count=1,
    eval=_vdp_eval, compiled_rhs=_vdp_rhs_nb,
)

ROSSLER = DynamicsModel(
    name="rossler", state_dim=3, param_count=3,
    eval=_rossler_eval, compiled_rhs=_rossler_rhs_nb,
)


_PROBLEMS = {
    "lotka_volterra": ProblemSpec(
        name="lotka_volterra",
        model=LOTKA_VOLTERRA,
        true_params=np.array([1.2, 0.3, 0.4, 0.9]),
        x0=np.array([2.0, 0.5]),
        grid=TimeGrid(0.0, 20.0, 0.01),
        param_names=("p1", "p2", "p3", "p4"),
    ),
    "van_der_pol": ProblemSpec(
        name="van_der_pol",
        model=VAN_DER_POL,
        true_params=np.array([1.5]),
        x0=np.array([2.0, 0.0]),
        grid=TimeGrid(0.0, 20.0, 0.01),
        param_names=("mu",),
    ),
    "rossler": ProblemSpec(
        name="rossler",
        model=ROSSLER,
        true_params=np.array([0.2, 0.2, 5.7]),
        x0=np.array([0.1, 0.1, 0.1]),
        grid=TimeGrid(0.0, 120.0, 0.01),
        param_names=("p1", "p2", "p3"),
    ),
}


def builtin_problems() -> list[ProblemSpec]:
    """The three benchmark problems, in registry order."""
    return list(_PROBLEMS.values())


def problem_names() -> list[str]:
    return list(_PROBLEMS)


def get_problem(name: str) -> ProblemSpec:
    try:
        return _PROBLEMS[name]
    except KeyError:
        known = ", ".join(_PROBLEMS)
        raise KeyError(f"unknown problem {name!r} (known: {known})") from None
