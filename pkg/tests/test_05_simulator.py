"""Tests for the slot-level simulator (hnoma.simulator).

Covers:
- Decision and SIC decode rules, ``SlotOutcome`` validation.
- Monte-Carlo success rates against ``P(1) = x2 + x3`` and ``P(2) = x1 + x3``.
- Per-user throughput identity at (0.5, 0.5, 0).
- Channel-driven runs at the ESS: action frequencies, mean power against the
  average costs, power bounds and the unbounded-power flag.
- Determinism across worker counts and chunk sizes, packet arrivals,
  bandwidth efficiency.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from hnoma.errors import DomainError
from hnoma.game import State
from hnoma.simulator import (
    SimConfig,
    SimMode,
    SlotOutcome,
    decide_action,
    decode_block,
    efficiency,
    efficiency_gain,
    peer_actions,
    policy_arrays,
    run_sim,
)
from hnoma.solver import solve
from hnoma.special import Thresholds

NAN = float("nan")


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("a1, a2, expected", [
    (1, 1, (False, False)),
    (1, 2, (True, True)),
    (1, 3, (True, False)),
    (2, 1, (True, True)),
    (2, 2, (False, False)),
    (2, 3, (True, False)),
    (3, 3, (False, False)),
])
def test_decode_rule(a1, a2, expected):
    assert decode_block(a1, a2) == expected


def test_decode_rejects_bad_action():
    with pytest.raises(DomainError):
        decode_block(0, 1)


def test_truncated_channel_inversion():
    t = Thresholds(tau=5.0, tau_pn=20.0)
    assert decide_action(25.0, t, 20.0, 4.0) == (1, 0.8)
    assert decide_action(10.0, t, 20.0, 4.0) == (2, 0.4)
    assert decide_action(20.0, t, 20.0, 4.0) == (2, 0.2)
    assert decide_action(5.0, t, 20.0, 4.0) == (3, 0.0)
    with pytest.raises(DomainError):
        decide_action(-1.0, t, 20.0, 4.0)


def test_slot_outcome_validation():
    ok = SlotOutcome(block=0, actions=(1, 2), snr=(NAN, NAN), power=(1.0, 0.5),
                     success=(True, True))
    assert ok.decoded == 2
    silent = SlotOutcome(block=1, actions=(3, 3), snr=(NAN, NAN), power=(0.0, 0.0),
                         success=(False, False))
    assert silent.decoded == 0
    with pytest.raises(DomainError):
        SlotOutcome(block=0, actions=(1, 1), snr=(NAN, NAN), power=(1.0, 1.0),
                    success=(True, False))
    with pytest.raises(DomainError):
        SlotOutcome(block=0, actions=(3, 2), snr=(NAN, NAN), power=(0.5, 0.5),
                    success=(False, True))


def test_peer_actions_swap_pairs():
    actions = np.array([[1, 2, 3, 3], [2, 2, 1, 3]])
    np.testing.assert_array_equal(peer_actions(actions), [[2, 1, 3, 3], [2, 2, 3, 1]])


# ---------------------------------------------------------------------------
# State-driven Monte-Carlo
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("x", [
    (0.2, 0.3, 0.5),
    (0.5, 0.25, 0.25),
    (0.1, 0.8, 0.1),
    (0.45, 0.45, 0.1),
    (0.3, 0.1, 0.6),
])
def test_success_rates_match_decode_probabilities(fig_params, x):
    state = State(*x)
    cfg = SimConfig(n_blocks=50, n_slots=20000, mode=SimMode.STATE, seed=17)
    stats = run_sim(cfg, state, fig_params)
    p1 = state.x2 + state.x3
    p2 = state.x1 + state.x3
    assert abs(stats.success_rate[0] - p1) <= 4.0 * stats.success_rate_se[0]
    assert abs(stats.success_rate[1] - p2) <= 4.0 * stats.success_rate_se[1]
    assert stats.success_rate[2] == 0.0


def test_throughput_identity_without_silence(fig_params):
    cfg = SimConfig(n_blocks=100, n_slots=10000, mode=SimMode.STATE, seed=5)
    stats = run_sim(cfg, State(0.5, 0.5, 0.0), fig_params)
    assert stats.throughput == pytest.approx(0.5, abs=0.002)
    assert stats.y_hist[1] == 0
    assert stats.y_hist.sum() == 100 * 10000


def test_state_mode_matches_closed_form_throughput(fig_params):
    x = State(0.2, 0.3, 0.5)
    stats = run_sim(SimConfig(n_blocks=20, n_slots=10000, mode="state", seed=8), x, fig_params)
    expected = (1.0 - x.x1) * x.x1 + (1.0 - x.x2) * x.x2
    assert abs(stats.throughput - expected) <= 4.0 * stats.throughput_se
    assert math.isnan(stats.mean_power[0])
    d = stats.to_dict()
    assert d["mean_power"][0] is None
    assert d["mode"] == "state"


# ---------------------------------------------------------------------------
# Channel-driven Monte-Carlo
# ---------------------------------------------------------------------------

def test_channel_run_at_ess(fig_params):
    sol = solve(fig_params)
    cfg = SimConfig(n_blocks=100, n_slots=2000, gbar=fig_params.gbar, seed=3)
    stats = run_sim(cfg, sol.state, fig_params)
    for i in range(3):
        assert abs(stats.action_freq[i] - sol.state.as_tuple()[i]) <= 4.0 * stats.action_freq_se[i]
    # mean transmit power given the action equals the average cost over c
    c = fig_params.cost_scale
    assert stats.mean_power[0] == pytest.approx(sol.avg_costs[0] / c, rel=0.02)
    assert stats.mean_power[1] == pytest.approx(sol.avg_costs[1] / c, rel=0.02)
    t = sol.thresholds(fig_params.gbar)
    assert stats.max_power[0] <= fig_params.rho1 / t.tau_pn
    assert stats.max_power[1] <= fig_params.rho2 / t.tau
    assert stats.power_bound[0] == pytest.approx(fig_params.rho1 / t.tau_pn)
    assert stats.power_bound[1] == pytest.approx(fig_params.rho2 / t.tau)
    assert not stats.unbounded_power


def test_thresholds_policy(fig_params):
    t = Thresholds(tau=7.985, tau_pn=33.52)
    stats = run_sim(SimConfig(n_blocks=20, n_slots=2000, seed=1), t, fig_params)
    assert stats.action_freq[2] == pytest.approx(1.0 - math.exp(-0.7985), abs=0.01)


def test_no_truncation_flags_unbounded_power(fig_params):
    stats = run_sim(SimConfig(n_blocks=2, n_slots=200, seed=1), State(0.5, 0.5, 0.0), fig_params)
    assert stats.unbounded_power
    assert stats.to_dict()["power_bound"][1] is None


def test_heterogeneous_users_play_the_state(fig_params):
    gbar = [5.0, 20.0] * 20
    cfg = SimConfig(n_blocks=20, n_slots=5000, gbar=gbar, seed=4)
    x = State(0.2, 0.3, 0.5)
    stats = run_sim(cfg, x, fig_params)
    for i in range(3):
        assert abs(stats.action_freq[i] - x.as_tuple()[i]) <= 4.0 * stats.action_freq_se[i]


def test_packet_arrivals_silence_idle_users(fig_params):
    cfg = SimConfig(n_blocks=10, n_slots=5000, mode=SimMode.STATE, seed=2, packet_prob=0.5)
    stats = run_sim(cfg, State(0.5, 0.5, 0.0), fig_params)
    assert stats.action_freq[2] == pytest.approx(0.5, abs=0.01)


# ---------------------------------------------------------------------------
# Determinism and configuration
# ---------------------------------------------------------------------------

def test_worker_count_does_not_change_results(fig_params):
    cfg = SimConfig(n_blocks=6, n_slots=500, gbar=[4.0, 10.0] * 6, seed=99, trace=True)
    x = State(0.2, 0.3, 0.5)
    serial = run_sim(cfg, x, fig_params, workers=1)
    pooled = run_sim(cfg, x, fig_params, workers=3)
    assert serial.to_dict() == pooled.to_dict()
    assert len(serial.trace) == 6 * 500 * 2
    np.testing.assert_array_equal(np.array(serial.trace, dtype=float),
                                  np.array(pooled.trace, dtype=float))


def test_seed_changes_draws(fig_params):
    x = State(0.2, 0.3, 0.5)
    a = run_sim(SimConfig(n_blocks=2, n_slots=300, seed=1), x, fig_params)
    b = run_sim(SimConfig(n_blocks=2, n_slots=300, seed=2), x, fig_params)
    assert a.to_dict() != b.to_dict()


def test_chunk_size_does_not_change_results(fig_params, monkeypatch):
    import settings
    x = State(0.2, 0.3, 0.5)
    state_cfg = SimConfig(n_blocks=3, n_slots=1000, mode=SimMode.STATE, seed=5, packet_prob=0.5)
    channel_cfg = SimConfig(n_blocks=2, n_slots=300, seed=5, packet_prob=0.5, trace=True)
    runs = []
    for chunk in (64, 4096):
        monkeypatch.setattr(settings, "sim_chunk_slots", chunk)
        runs.append((run_sim(state_cfg, x, fig_params), run_sim(channel_cfg, x, fig_params)))
    (state_a, channel_a), (state_b, channel_b) = runs
    assert state_a.to_dict() == state_b.to_dict()
    np.testing.assert_array_equal(channel_a.action_freq, channel_b.action_freq)
    np.testing.assert_array_equal(np.array(channel_a.trace, dtype=float),
                                  np.array(channel_b.trace, dtype=float))


def test_sim_config_validation():
    with pytest.raises(DomainError):
        SimConfig(n_blocks=0, n_slots=10)
    with pytest.raises(DomainError):
        SimConfig(n_blocks=1, n_slots=0)
    with pytest.raises(DomainError):
        SimConfig(n_blocks=1, n_slots=10, gbar=[1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        SimConfig(n_blocks=1, n_slots=10, packet_prob=0.0)
    assert SimConfig(n_blocks=3, n_slots=1).n_users == 6


def test_state_mode_needs_state_policy():
    with pytest.raises(DomainError):
        policy_arrays(Thresholds(1.0, 2.0), SimMode.STATE, np.ones(2))


# ---------------------------------------------------------------------------
# Bandwidth efficiency
# ---------------------------------------------------------------------------

def test_efficiency_values():
    assert efficiency(100, 100.0, 0.5) == pytest.approx((0.5, 1.25))
    e_o, e_h = efficiency(10, 5.0, 1.0)
    assert e_h == pytest.approx(e_o)
    assert efficiency_gain(1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("alpha", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
def test_hybrid_efficiency_beats_oma(alpha):
    e_o, e_h = efficiency(100, 10.0, alpha)
    assert e_h > e_o
    assert efficiency_gain(alpha) > 1.0


def test_efficiency_domain():
    with pytest.raises(DomainError):
        efficiency(10, 1.0, 0.0)
    with pytest.raises(DomainError):
        efficiency(0, 1.0, 0.5)
