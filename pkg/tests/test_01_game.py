"""Tests for the game core (hnoma.game).

Covers:
- ``State`` validation, 1-based access, vertices and support.
- Power levels derived from the SINR threshold and ``GameParams`` checks.
- Payoff matrix structure, pure/mixed payoffs.
- Nash and sampled ESS checks on a fixed-cost game with a known interior ESS.
"""

from __future__ import annotations

import numpy as np
import pytest

from hnoma.errors import DomainError
from hnoma.game import (
    FixedCosts,
    GameParams,
    PayoffMatrix,
    SnrScaledCosts,
    State,
    default_mutant_grid,
    derive_power_levels,
    is_ess,
    is_mixed_ne,
    mixed_payoff,
    payoff_matrix,
    payoff_vector,
    pure_payoff,
    random_states,
)


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------

def test_state_components_and_access():
    x = State(0.2, 0.3, 0.5)
    assert x[1] == 0.2
    assert x[2] == 0.3
    assert x[3] == 0.5
    assert x.as_tuple() == (0.2, 0.3, 0.5)
    assert x.interior
    assert x.support() == [1, 2, 3]


@pytest.mark.parametrize("values", [
    (0.5, 0.5, 0.5),
    (-0.1, 0.6, 0.5),
    (float("nan"), 0.5, 0.5),
    (1.2, -0.1, -0.1),
])
def test_state_rejects_non_simplex(values):
    with pytest.raises(DomainError):
        State(*values)


def test_state_from_iterable_needs_three_values():
    assert State.from_iterable([0.1, 0.2, 0.7]) == State(0.1, 0.2, 0.7)
    with pytest.raises(DomainError):
        State.from_iterable([0.5, 0.5])


@pytest.mark.parametrize("action", [0, 4, -1])
def test_state_index_is_one_based(action):
    with pytest.raises(DomainError):
        State(0.2, 0.3, 0.5)[action]


def test_vertices_and_barycenter():
    v2 = State.vertex(2)
    assert v2.as_tuple() == (0.0, 1.0, 0.0)
    assert v2.support() == [2]
    assert not v2.interior
    b = State.barycenter()
    assert b.as_array().sum() == pytest.approx(1.0, abs=1e-15)
    assert b.distance(State(1 / 3, 1 / 3, 1 / 3)) < 1e-15


def test_random_states_lie_on_simplex():
    states = random_states(50, np.random.default_rng(3))
    assert len(states) == 50
    for x in states:
        assert sum(x.as_tuple()) == pytest.approx(1.0, abs=1e-12)
        assert min(x.as_tuple()) >= 0.0


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

def test_power_levels_meet_sic_constraints():
    rho1, rho2 = derive_power_levels(4.0)
    assert (rho1, rho2) == (20.0, 4.0)
    assert rho1 / (rho2 + 1.0) == pytest.approx(4.0)


@pytest.mark.parametrize("gamma", [0.0, -1.0, float("inf")])
def test_power_levels_reject_bad_threshold(gamma):
    with pytest.raises(DomainError):
        derive_power_levels(gamma)


def test_game_params_from_gamma(fig_params):
    assert fig_params.rho1 == 20.0
    assert fig_params.rho2 == 4.0
    assert fig_params.snr_scaled
    assert fig_params.cost_scale == 2.0
    assert fig_params.C3 == 0.0
    assert fig_params.with_cost_scale(0.5).cost_scale == 0.5
    assert fig_params.with_gbar(20.0).gbar == 20.0


def test_game_params_reject_infeasible_levels():
    with pytest.raises(DomainError):
        GameParams(1.0, 4.0, rho1=20.0, rho2=3.0, gbar=10.0)
    with pytest.raises(DomainError):
        GameParams(1.0, 4.0, rho1=10.0, rho2=4.0, gbar=10.0)
    with pytest.raises(DomainError):
        GameParams.from_gamma(0.0, 4.0, 10.0, SnrScaledCosts(1.0))


def test_cost_models_validate():
    with pytest.raises(DomainError):
        FixedCosts(0.5, 0.7)
    with pytest.raises(DomainError):
        SnrScaledCosts(0.0)
    fixed = GameParams.from_gamma(1.0, 4.0, 10.0, FixedCosts(0.7, 0.5))
    assert not fixed.snr_scaled
    assert fixed.cost_scale is None
    with pytest.raises(DomainError):
        fixed.with_cost_scale(1.0)


# ---------------------------------------------------------------------------
# Payoffs
# ---------------------------------------------------------------------------

def test_payoff_matrix_structure():
    A = payoff_matrix(1.0, (0.7, 0.5, 0.0))
    expected = np.array([
        [-0.7, 0.3, 0.3],
        [0.5, -0.5, 0.5],
        [0.0, 0.0, 0.0],
    ])
    np.testing.assert_allclose(A.matrix, expected)
    with pytest.raises(ValueError):
        A.matrix[0, 0] = 1.0


def test_payoff_matrix_rejects_broken_structure():
    with pytest.raises(DomainError):
        PayoffMatrix(np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [0.0, 0.1, 0.0]]))
    with pytest.raises(DomainError):
        PayoffMatrix(np.zeros((2, 2)))
    with pytest.raises(DomainError):
        payoff_matrix(1.0, (float("inf"), 0.5, 0.0))


def test_pure_and_mixed_payoffs_agree():
    A = payoff_matrix(1.0, (0.7, 0.5, 0.1))
    x = State(0.2, 0.3, 0.5)
    u = payoff_vector(x, A)
    for i in (1, 2, 3):
        assert pure_payoff(i, x, A) == pytest.approx(u[i - 1])
    assert mixed_payoff(x, x, A) == pytest.approx(float(x.as_array() @ u))
    # own signal succeeds unless the peer uses the same level
    assert pure_payoff(1, x, A) == pytest.approx(1.0 * (1.0 - 0.2) - 0.7)
    assert pure_payoff(2, x, A) == pytest.approx(1.0 * (1.0 - 0.3) - 0.5)
    assert pure_payoff(3, x, A) == pytest.approx(-0.1)


def test_shifted_matrix_keeps_equilibria():
    A = payoff_matrix(1.0, (0.7, 0.5, 0.0))
    x = State(0.3, 0.5, 0.2)
    assert is_mixed_ne(x, A.shifted(3.0))


# ---------------------------------------------------------------------------
# Equilibrium checks
# ---------------------------------------------------------------------------

def test_interior_ess_of_fixed_cost_game():
    # C1 < R < C1 + C2: the ESS is (1 - C1/R, 1 - C2/R, (C1 + C2)/R - 1)
    A = payoff_matrix(1.0, (0.7, 0.5, 0.0))
    x = State(0.3, 0.5, 0.2)
    assert is_mixed_ne(x, A)
    assert is_ess(x, A)


def test_non_equilibrium_is_rejected():
    A = payoff_matrix(1.0, (0.7, 0.5, 0.0))
    x = State.barycenter()
    assert not is_mixed_ne(x, A)
    assert not is_ess(x, A)


def test_mutant_grid_contains_vertices():
    grid = default_mutant_grid()
    assert len(grid) == 15
    assert grid[:3] == [State.vertex(1), State.vertex(2), State.vertex(3)]


def test_ess_check_validates_grids():
    A = payoff_matrix(1.0, (0.7, 0.5, 0.0))
    x = State(0.3, 0.5, 0.2)
    with pytest.raises(DomainError):
        is_ess(x, A, eps_grid=[1.5])
    with pytest.raises(DomainError):
        is_ess(x, A, mutant_grid=[])
