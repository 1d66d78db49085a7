"""Shared toy models used across the test modules."""

import numpy as np
import pytest

from odefit import DynamicsModel, TimeGrid


@pytest.fixture
def zero_field():
    """State never moves, any dimension."""

    def make(dim=1):
        return DynamicsModel(
            name="zero", state_dim=dim, param_count=0,
            eval=lambda x, t, p: np.zeros(dim),
        )

    return make


@pytest.fixture
def exponential_field():
    """xdot = x, the classic order-check problem."""
    return DynamicsModel(name="exp", state_dim=1, param_count=0, eval=lambda x, t, p: x)


@pytest.fixture
def rate_field():
    """xdot_i = p_i: closed form x_i(t) = x0_i + p_i * t, linear in p."""

    def make(dim=1):
        return DynamicsModel(
            name="rate", state_dim=dim, param_count=dim,
            eval=lambda x, t, p: np.asarray(p, dtype=float),
        )

    return make


@pytest.fixture
def blowup_field():
    """xdot = x^2 escapes to infinity in finite time from x0 > 0."""
    return DynamicsModel(
        name="blowup", state_dim=1, param_count=0, eval=lambda x, t, p: x * x
    )


@pytest.fixture
def unit_grid():
    return TimeGrid(0.0, 1.0, 0.1)
