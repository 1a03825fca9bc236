"""Tests for the ESS solver (hnoma.solver).

Covers:
- SNR-scaled ESS at the two reference parameter sets.
- Average costs against scipy's exponential integral, their limits and the
  infinite-cost domain error.
- Fixed-cost closed forms in all four regions, boundary detection and the
  silence-cost shift.
- Monotonicity of x1* in c and gbar, the existence condition and the
  collapsed-x3 diagnostic.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.special import exp1

from hnoma.errors import AmbiguousRegionError, DomainError, InfiniteCostError
from hnoma.game import FixedCosts, GameParams, SnrScaledCosts, State, is_mixed_ne, payoff_matrix
from hnoma.solver import (
    Regime,
    avg_cost_snr,
    avg_costs,
    existence_condition,
    existence_margin,
    solve,
    solve_fixed_cost,
    solve_snr_cost,
)


def _params(c, gbar=10.0, gamma=4.0, R=1.0, C3=0.0):
    return GameParams.from_gamma(R, gamma, gbar, SnrScaledCosts(c, C3))


# ---------------------------------------------------------------------------
# SNR-scaled ESS
# ---------------------------------------------------------------------------

def test_reference_ess_at_unit_cost():
    sol = solve_snr_cost(_params(1.0))
    assert sol.valid, sol.reason
    assert sol.regime is Regime.SNR_SCALED
    for got, want in zip(sol.state.as_tuple(), (0.183, 0.486, 0.331)):
        assert got == pytest.approx(want, abs=1e-3)
    assert abs(sol.residuals[0]) <= 1e-10
    assert abs(sol.residuals[1]) <= 1e-10


def test_reference_ess_at_double_cost():
    params = _params(2.0)
    sol = solve_snr_cost(params)
    assert sol.valid, sol.reason
    x = sol.state
    assert x.x1 == pytest.approx(0.0360524, abs=1e-6)
    assert x.x2 == pytest.approx(0.4144, abs=5e-4)
    assert x.x3 == pytest.approx(0.5495, abs=5e-4)
    # x1 solves R (1 - x1) = c rho1 / (gbar x1) * E1(ln 1/x1) on its own
    c1 = 2.0 * params.rho1 / (params.gbar * x.x1) * exp1(-math.log(x.x1))
    assert 1.0 - x.x1 == pytest.approx(c1, abs=1e-9)
    # the three-decimal values (0.035, 0.415, 0.550) quoted for this point
    # sit 1.05e-3 below the root in x1
    for got, want in zip(x.as_tuple(), (0.035, 0.415, 0.550)):
        assert got == pytest.approx(want, abs=1.5e-3)


def test_snr_ess_is_equilibrium(fig_params):
    sol = solve(fig_params)
    A = payoff_matrix(fig_params, sol.avg_costs)
    assert is_mixed_ne(sol.state, A)
    assert not any("Nash" in w for w in sol.warnings)
    # indifference: actions 1 and 2 earn what silence earns
    x = sol.state
    assert fig_params.reward * (1.0 - x.x1) - sol.avg_costs[0] == pytest.approx(0.0, abs=1e-9)
    assert fig_params.reward * (1.0 - x.x2) - sol.avg_costs[1] == pytest.approx(0.0, abs=1e-9)


def test_snr_ess_thresholds(fig_params):
    t = solve(fig_params).thresholds(fig_params.gbar)
    assert t.tau == pytest.approx(7.974, abs=0.005)
    assert t.tau_pn == pytest.approx(33.228, abs=0.005)


def test_solution_to_dict(fig_params):
    d = solve(fig_params).to_dict()
    assert d["regime"] == "SnrScaled"
    assert len(d["state"]) == 3
    assert d["valid"] is True
    assert d["reason"] is None


def test_silence_cost_shifts_snr_equations():
    base = solve_snr_cost(_params(1.0))
    shifted = solve_snr_cost(_params(1.0, C3=0.05))
    assert shifted.valid
    # a costly silence pushes users into transmitting
    assert shifted.state.x3 < base.state.x3
    x = shifted.state
    assert 1.0 - x.x1 - shifted.avg_costs[0] == pytest.approx(-0.05, abs=1e-9)


def test_collapsed_x3_is_invalid():
    sol = solve_snr_cost(_params(1e-4))
    assert not sol.valid
    assert "x3 collapsed" in sol.reason
    assert sol.state.x3 == 0.0


def test_snr_solver_needs_snr_costs():
    with pytest.raises(DomainError):
        solve_snr_cost(GameParams.from_gamma(1.0, 4.0, 10.0, FixedCosts(0.7, 0.5)))


# ---------------------------------------------------------------------------
# Average costs
# ---------------------------------------------------------------------------

def test_average_costs_closed_form():
    p = _params(1.0)
    c1, c2 = avg_cost_snr(State(0.5, 0.25, 0.25), p)
    # c rho1 / (gbar x1) = 20 / 5, c rho2 / (gbar x2) = 4 / 2.5
    assert c1 == pytest.approx(4.0 * float(exp1(math.log(2.0))), rel=1e-10)
    expected2 = 1.6 * (float(exp1(math.log(4.0 / 3.0))) - float(exp1(math.log(2.0))))
    assert c2 == pytest.approx(expected2, rel=1e-10)


def test_average_cost_limits():
    p = _params(1.0)
    # x1 = 0: action 1 is never used and costs nothing
    c1, _ = avg_cost_snr(State(0.0, 0.4, 0.6), p)
    assert c1 == 0.0
    # x2 -> 0 tends to c rho2 / (gbar ln(1/x1))
    _, small = avg_cost_snr(State(0.3, 1e-9, 0.7 - 1e-9), p)
    _, zero = avg_cost_snr(State(0.3, 0.0, 0.7), p)
    assert zero == pytest.approx(0.4 / math.log(1.0 / 0.3))
    assert small == pytest.approx(zero, rel=1e-6)
    _, above = avg_cost_snr(State(0.3, 2e-7, 0.7 - 2e-7), p)
    assert above == pytest.approx(zero, rel=1e-5)


def test_average_cost_is_infinite_without_truncation():
    with pytest.raises(InfiniteCostError):
        avg_cost_snr(State(0.4, 0.6, 0.0), _params(1.0))


def test_avg_costs_dispatch():
    fixed = GameParams.from_gamma(1.0, 4.0, 10.0, FixedCosts(0.7, 0.5, 0.1))
    assert avg_costs(State(0.2, 0.3, 0.5), fixed) == (0.7, 0.5, 0.1)
    c = avg_costs(State(0.2, 0.3, 0.5), _params(1.0, C3=0.2))
    assert c[2] == 0.2


# ---------------------------------------------------------------------------
# Fixed costs
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("C1, C2, regime, expected", [
    (0.7, 0.5, Regime.FIXED_A, (0.3, 0.5, 0.2)),
    (1.5, 0.4, Regime.FIXED_B, (0.0, 0.6, 0.4)),
    (3.0, 2.0, Regime.FIXED_C, (0.0, 0.0, 1.0)),
    (0.3, 0.1, Regime.FIXED_D, (0.4, 0.6, 0.0)),
])
def test_fixed_cost_regions(C1, C2, regime, expected):
    sol = solve_fixed_cost(1.0, C1, C2)
    assert sol.regime is regime
    assert sol.valid
    np.testing.assert_allclose(sol.state.as_tuple(), expected, atol=1e-12)
    assert not any("Nash" in w for w in sol.warnings)


def test_fixed_cost_warnings():
    assert "no transmission regime" in solve_fixed_cost(1.0, 3.0, 2.0).warnings
    d = solve_fixed_cost(1.0, 0.3, 0.1)
    assert any("no truncation" in w for w in d.warnings)
    assert solve_fixed_cost(1.0, 0.7, 0.5).warnings == ()


@pytest.mark.parametrize("C1, C2", [(1.0, 0.5), (0.6, 0.4), (1.5, 1.0)])
def test_fixed_cost_boundaries_are_ambiguous(C1, C2):
    with pytest.raises(AmbiguousRegionError):
        solve_fixed_cost(1.0, C1, C2)


@pytest.mark.parametrize("R, C1, C2", [(0.0, 0.7, 0.5), (1.0, 0.5, 0.7), (1.0, 0.5, 0.5)])
def test_fixed_cost_domain(R, C1, C2):
    with pytest.raises(DomainError):
        solve_fixed_cost(R, C1, C2)


def test_fixed_cost_silence_shift():
    shifted = solve_fixed_cost(1.0, 0.8, 0.6, 0.1)
    base = solve_fixed_cost(1.0, 0.7, 0.5)
    assert shifted.regime is base.regime
    assert shifted.state.distance(base.state) < 1e-12
    assert shifted.avg_costs == (0.8, 0.6, 0.1)


def test_solve_dispatches_on_cost_model():
    fixed = GameParams.from_gamma(2.0, 4.0, 10.0, FixedCosts(1.4, 1.0))
    sol = solve(fixed)
    assert sol.regime is Regime.FIXED_A
    assert sol.state.x1 == pytest.approx(0.3)


# ---------------------------------------------------------------------------
# Monotonicity and existence
# ---------------------------------------------------------------------------

def test_x1_decreases_with_cost_scale():
    grid = np.arange(0.25, 3.0 + 1e-9, 0.25)
    x1 = [solve_snr_cost(_params(float(c))).state.x1 for c in grid]
    assert all(a > b for a, b in zip(x1, x1[1:]))


def test_x1_increases_with_average_snr():
    grid = [2.0, 5.0, 10.0, 20.0, 35.0, 50.0]
    x1 = [solve_snr_cost(_params(1.0, gbar=g)).state.x1 for g in grid]
    assert all(a < b for a, b in zip(x1, x1[1:]))


def test_existence_condition_at_reference_ess(fig_params):
    x3 = solve(fig_params).state.x3
    left, right = existence_margin(x3, fig_params)
    assert left == pytest.approx(2.0 * 20.0 / 10.0)
    assert existence_condition(x3, fig_params)
    assert left > right


@pytest.mark.parametrize("x3", [0.0, 1.0, -0.5])
def test_existence_margin_domain(fig_params, x3):
    with pytest.raises(DomainError):
        existence_margin(x3, fig_params)
