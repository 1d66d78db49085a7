"""Residuals, weighted least-squares cost, finite differences, and RMSE.

The objective couples a dynamics model to a dataset of noisy observations:
simulate with trial parameters, sample the trajectory at the observation
times, and score the weighted squared mismatch. Integration blow-ups (bad
trial parameters on chaotic systems) map to a large finite penalty cost so
derivative-free optimizers keep a usable ordering.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._fsio import atomic_write_text
from .ode_core import DynamicsModel, IntegrationDivergedError, TimeGrid, Trajectory, integrate

# Grid-membership tolerance for observation times.
_TIME_ATOL = 1e-9


class DatasetFormatError(ValueError):
    """Malformed dataset file; message carries row/column diagnostics."""


@dataclass(frozen=True)
class Dataset:
    """Observation times, observed values, and per-observation weights.

    ``observations`` and ``weights`` are (n_times, state_dim); weights are
    standard deviations (all positive), so a residual is (obs - sim)/weight.
    """

    times: np.ndarray
    observations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        obs = np.asarray(self.observations, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if obs.ndim != 2 or obs.shape[0] != times.shape[0]:
            raise ValueError(f"observations shape {obs.shape} does not match {times.shape[0]} times")
        if weights.shape != obs.shape:
            raise ValueError(f"weights shape {weights.shape} != observations shape {obs.shape}")
        if times.shape[0] > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("observation times must be strictly increasing")
        if not np.all(weights > 0):
            raise ValueError("all weights must be positive")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "weights", weights)

    @property
    def state_dim(self) -> int:
        return self.observations.shape[1]


@dataclass
class Objective:
    """Weighted least-squares data-misfit for one model/dataset pair."""

    model: DynamicsModel
    dataset: Dataset
    x0: np.ndarray
    grid: TimeGrid
    divergence_penalty: float = 1e30
    _obs_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dataset.state_dim != self.model.state_dim:
            raise ValueError("dataset state dimension does not match model")
        grid_times = self.grid.times
        idx = np.rint((self.dataset.times - self.grid.t_start) / self.grid.dt).astype(int)
        ok = (idx >= 0) & (idx < grid_times.shape[0])
        if not np.all(ok) or not np.allclose(
            grid_times[np.clip(idx, 0, grid_times.shape[0] - 1)],
            self.dataset.times, rtol=0.0, atol=_TIME_ATOL,
        ):
            raise ValueError("dataset times must lie on the simulation grid")
        self._obs_index = idx


def residuals(obj: Objective, p) -> np.ndarray:
    """Weighted residual vector (obs - sim)/weight, flattened time-major.

    Raises :class:`IntegrationDivergedError` when the trial parameters blow
    the integration up; ``cost`` maps that to ``divergence_penalty``.
    """
    traj = integrate(obj.model, p, obj.x0, obj.grid)
    sim = traj.states[obj._obs_index]
    return ((obj.dataset.observations - sim) / obj.dataset.weights).ravel()


def cost(obj: Objective, p) -> float:
    """Sum of squared weighted residuals; divergence maps to the penalty."""
    try:
        r = residuals(obj, p)
    except IntegrationDivergedError:
        return obj.divergence_penalty
    return float(r @ r)


def _fd_steps(p, rel_step):
    return rel_step * np.maximum(np.abs(p), 1.0)


def fd_gradient(obj: Objective, p, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of the cost.

    Near the divergence boundary the penalty plateau corrupts components;
    callers treat non-finite or penalty-scale values as a stall signal.
    """
    if not rel_step > 0:
        raise ValueError("rel_step must be positive")
    p = np.asarray(p, dtype=float)
    h = _fd_steps(p, rel_step)
    grad = np.empty_like(p)
    for k in range(p.shape[0]):
        e = np.zeros_like(p)
        e[k] = h[k]
        grad[k] = (cost(obj, p + e) - cost(obj, p - e)) / (2.0 * h[k])
    return grad


def fd_jacobian(obj: Objective, p, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the residual vector, one column per parameter."""
    if not rel_step > 0:
        raise ValueError("rel_step must be positive")
    p = np.asarray(p, dtype=float)
    h = _fd_steps(p, rel_step)
    columns = []
    for k in range(p.shape[0]):
        e = np.zeros_like(p)
        e[k] = h[k]
        columns.append((residuals(obj, p + e) - residuals(obj, p - e)) / (2.0 * h[k]))
    return np.column_stack(columns)


def rmse(reference: Trajectory, estimate: Trajectory) -> float:
    """Root-mean-square difference over all (time, component) entries."""
    if reference.states.shape != estimate.states.shape:
        raise ValueError(
            f"trajectory shapes differ: {reference.states.shape} vs {estimate.states.shape}"
        )
    if not np.array_equal(reference.times, estimate.times):
        raise ValueError("trajectories are on different time grids")
    diff = reference.states - estimate.states
    return float(np.sqrt(np.mean(diff * diff)))


def dataset_to_csv(dataset: Dataset, path) -> None:
    """Write `t,x1,...,xd` rows; weights are not serialized."""
    d = dataset.state_dim
    lines = ["t," + ",".join(f"x{i + 1}" for i in range(d))]
    for t, row in zip(dataset.times, dataset.observations):
        lines.append(",".join(repr(float(v)) for v in (t, *row)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def dataset_from_csv(path, state_dim: Optional[int] = None) -> Dataset:
    """Read a `t,x1,...,xd` file back into a unit-weight Dataset.

    Raises :class:`DatasetFormatError` naming the offending row and column
    for any malformed cell.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        expected = ["t"] + [f"x{i + 1}" for i in range(len(header) - 1)]
        if len(header) < 2 or header != expected:
            raise DatasetFormatError(
                f"{path}: header must be 't,x1,...,xd', got {','.join(header)!r}"
            )
        if state_dim is not None and len(header) - 1 != state_dim:
            raise DatasetFormatError(
                f"{path}: expected {state_dim} state columns, found {len(header) - 1}"
            )
        times, rows = [], []
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"{path}: row {row_num} has {len(row)} cells, expected {len(header)}"
                )
            values = []
            for col_name, cell in zip(header, row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DatasetFormatError(
                        f"{path}: row {row_num}, column {col_name!r}: "
                        f"not a number: {cell.strip()!r}"
                    ) from None
            times.append(values[0])
            rows.append(values[1:])
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    obs = np.asarray(rows)
    return Dataset(times=np.asarray(times), observations=obs, weights=np.ones_like(obs))
