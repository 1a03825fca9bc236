"""Estimation-driven state updating: SU-BS and SU-U.

Both protocols run the replicator update once per block of ``B`` slots with
payoffs estimated from simulated traffic instead of the analytic ones.

- **SU-BS**: the base station keeps one shared state. Rewards come from the
  decode outcomes it observes; every user reports its block-averaged cost
  per action; the new state is broadcast.
- **SU-U**: every user keeps its own state. The BS broadcasts per-action
  success and attempt counts after each slot so each user can estimate the
  rewards; costs are the user's own. With the ``literal`` estimator (the
  SU-U default) a user's payoff for action ``i`` is the time average over
  all ``B`` slots of ``R_i(t)`` minus the power it spent on action ``i``,
  which is about ``x_{k,i} u(i, x)``: same rest point, slower updates.

Time block ``b`` draws from the keyed stream ``(seed, ADAPT_TAG, b)``, its
packet arrivals from ``(seed, ADAPT_TAG, b, 1)``.
With ``oracle=True`` the estimates are replaced by the exact payoffs and the
protocols reduce to :func:`hnoma.replicator.run_replicator`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import settings
from .errors import DomainError
from .game import GameParams, SnrScaledCosts, State
from .replicator import Trajectory, analytic_payoffs, replicator_update, replicator_update_many
from .simulator import SimConfig, SimMode, SlotBatch, SlotOutcome, draw_slots
from .solver import EssSolution, solve_snr_cost
from .special import snr_stream, thresholds_arrays

_LOG = logging.getLogger("hnoma.adaptive")

ADAPT_TAG = 2


class Estimator(str, Enum):
    LITERAL = "literal"          # R * successes_i / 2M
    CONDITIONAL = "conditional"  # R * successes_i / attempts_i


class Protocol(str, Enum):
    SU_BS = "su-bs"
    SU_U = "su-u"


# ---------------------------------------------------------------------------
# Schedules and fairness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockSchedule:
    """``B`` slots per block and the cost scale ``c[b]`` of every block."""

    slots_per_block: int
    values: Tuple[float, ...]

    def __post_init__(self) -> None:
        if self.slots_per_block < 1:
            raise DomainError(f"a block needs at least one slot, got {self.slots_per_block}")
        if not self.values:
            raise DomainError("schedule has no blocks")
        if any(not (v > 0.0 and math.isfinite(v)) for v in self.values):
            raise DomainError("cost scales must be positive")

    @property
    def n_blocks(self) -> int:
        return len(self.values)

    def c(self, b: int) -> float:
        return self.values[b]


def constant_schedule(c: float, n_blocks: int, slots_per_block: int) -> BlockSchedule:
    return BlockSchedule(slots_per_block, tuple([float(c)] * n_blocks))


def ramp_schedule(n_blocks: int, slope_den: float, slots_per_block: int,
                  offset: float = 0.5) -> BlockSchedule:
    """Linear ramp ``c[b] = 2b / slope_den + offset`` for ``b = 1..n_blocks``."""
    if not slope_den > 0.0:
        raise DomainError(f"ramp denominator must be positive, got {slope_den!r}")
    return BlockSchedule(slots_per_block,
                         tuple(2.0 * b / slope_den + offset for b in range(1, n_blocks + 1)))


def fairness_scale(gbar_k: float, c_ref: float, gbar_ref: float) -> float:
    """Cost scale ``c_ref * gbar_k / gbar_ref`` that equalises average costs."""
    if not (gbar_k > 0.0 and gbar_ref > 0.0):
        raise DomainError("average SNRs must be positive")
    return c_ref * gbar_k / gbar_ref


def _user_cost_scales(c: float, gbar: np.ndarray, gbar_ref: float, fairness: bool) -> np.ndarray:
    if not fairness:
        return np.full(gbar.shape, c)
    return np.array([fairness_scale(float(g), c, gbar_ref) for g in gbar])


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def _forward_fill(values: np.ndarray, start: np.ndarray) -> np.ndarray:
    # rows are slots; NaN means "no observation", start is used before the first one
    stacked = np.vstack([start[None, :], values])
    idx = np.where(np.isnan(stacked), 0, np.arange(stacked.shape[0])[:, None])
    np.maximum.accumulate(idx, axis=0, out=idx)
    return stacked[idx, np.arange(stacked.shape[1])][1:]


def _slot_rewards(batch: SlotBatch, reward: float, mode: Estimator,
                  previous: np.ndarray) -> np.ndarray:
    """Per-slot ``(R1, R2)`` estimates, shape ``(n, 2)``."""
    n_users = batch.actions.shape[1]
    est = np.empty((batch.actions.shape[0], 2))
    for i in (1, 2):
        mask = batch.actions == i
        succ = (batch.success & mask).sum(axis=1)
        if mode is Estimator.LITERAL:
            est[:, i - 1] = reward * succ / n_users
        else:
            att = mask.sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                est[:, i - 1] = np.where(att > 0, reward * succ / np.maximum(att, 1), np.nan)
    if mode is Estimator.CONDITIONAL:
        est = _forward_fill(est, previous)
    return est


def _block_mean(values: np.ndarray, axis: int = 0) -> np.ndarray:
    ok = ~np.isnan(values)
    count = ok.sum(axis=axis)
    total = np.where(ok, values, 0.0).sum(axis=axis)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), np.nan)


def estimate_reward(outcomes: Sequence[SlotOutcome], R: float,
                    mode: Estimator = Estimator.LITERAL,
                    previous: Optional[Tuple[float, float]] = None) -> Tuple[float, float]:
    """Reward estimates ``(R1, R2)`` from one slot's outcomes over all blocks.

    ``literal``: ``R / 2M`` times the number of decoded action-``i`` signals.
    ``conditional``: ``R`` times the success ratio of action-``i`` attempts;
    with no attempt the ``previous`` estimate is carried over (NaN if none).
    """
    if not outcomes:
        raise DomainError("reward estimation needs at least one block outcome")
    actions = np.array([[o.actions[0], o.actions[1]] for o in outcomes]).reshape(1, -1)
    success = np.array([[o.success[0], o.success[1]] for o in outcomes]).reshape(1, -1)
    batch = SlotBatch(actions=actions, snr=np.full(actions.shape, np.nan),
                      power=np.zeros(actions.shape), success=success)
    prev = np.array(previous if previous is not None else (np.nan, np.nan), dtype=float)
    est = _slot_rewards(batch, R, Estimator(mode), prev)[0]
    return float(est[0]), float(est[1])


def _user_costs(batch: SlotBatch, scales: np.ndarray, rho: Tuple[float, float],
                previous: np.ndarray, per_slot: bool = False) -> np.ndarray:
    """Per-user block-average cost of actions 1 and 2, shape ``(U, 2)``.

    Averages run over the slots where the user took the action; a user who
    never did keeps its ``previous`` value. With ``per_slot`` the spent power
    is averaged over every slot of the block instead, and a user who never
    took the action has cost 0.
    """
    out = np.empty_like(previous)
    n_slots = batch.actions.shape[0]
    for i in (1, 2):
        mask = batch.actions == i
        count = mask.sum(axis=0)
        with np.errstate(divide="ignore"):
            cost = np.where(mask, scales[None, :] * rho[i - 1] / batch.snr, 0.0)
        total = cost.sum(axis=0)
        if per_slot:
            out[:, i - 1] = total / n_slots
        else:
            out[:, i - 1] = np.where(count > 0, total / np.maximum(count, 1), previous[:, i - 1])
    return out


def _fill_missing(X: np.ndarray, U: np.ndarray) -> np.ndarray:
    # a missing payoff gets the mean payoff of the known actions, so it does not drift
    missing = np.isnan(U)
    if not missing.any():
        return U
    w = np.where(missing, 0.0, X)
    known = np.where(missing, 0.0, U)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = (w * known).sum(axis=1) / w.sum(axis=1)
    mean = np.where(np.isfinite(mean), mean, 0.0)
    return np.where(missing, mean[:, None], U)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass
class UserState:
    """One user's state and cost scale in SU-U."""

    state: State
    cost_scale: float
    gbar: float


@dataclass
class AdaptiveResult:
    """Per-block record of an adaptive run.

    ``trajectory.states[b + 1]`` is the (mean) state after block ``b``.
    """

    protocol: Protocol
    trajectory: Trajectory
    costs: List[float]
    est_payoffs: List[Tuple[float, float]]
    reference: List[State] = field(default_factory=list)
    dispersion: List[float] = field(default_factory=list)
    users: List[UserState] = field(default_factory=list)
    history: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def final(self) -> State:
        return self.trajectory.final

    def tail_mean(self, n: int) -> State:
        """Mean state over the last ``n`` blocks."""
        arr = np.array([x.as_array() for x in self.trajectory.states[1:][-n:]])
        m = arr.mean(axis=0)
        return State(float(m[0]), float(m[1]), float(1.0 - m[0] - m[1]))

    def tracking_error(self) -> float:
        if not self.reference:
            raise DomainError("no reference ESS recorded for this run")
        return tracking_error(self.trajectory.states[1:], self.reference)

    def first_block_within(self, tol: float, target: Optional[State] = None) -> Optional[int]:
        """First block after which the state is within ``tol`` (max-norm).

        The target is the per-block reference ESS unless ``target`` is given.
        Returns None if the band is never reached.
        """
        if target is None and not self.reference:
            raise DomainError("no reference ESS recorded for this run")
        for b, x in enumerate(self.trajectory.states[1:]):
            goal = target if target is not None else self.reference[b]
            if x.distance(goal) <= tol:
                return b
        return None

    def rows(self) -> List[Tuple[int, float, float, float, float, float, float]]:
        """CSV rows ``(block, x1, x2, x3, c, est_payoff1, est_payoff2)``."""
        out = []
        for b, (x, c, (u1, u2)) in enumerate(zip(self.trajectory.states[1:], self.costs,
                                                 self.est_payoffs)):
            out.append((b, x.x1, x.x2, x.x3, c, u1, u2))
        return out

    def user_dump(self) -> List[Dict[str, float]]:
        return [{"user": k, "x1": u.state.x1, "x2": u.state.x2, "x3": u.state.x3,
                 "c": u.cost_scale, "gbar": u.gbar} for k, u in enumerate(self.users)]


def tracking_error(states: Sequence[State], reference: Sequence[State]) -> float:
    """Mean absolute per-coordinate gap between a trajectory and its reference."""
    if len(states) != len(reference) or not states:
        raise DomainError("trajectory and reference must be non-empty and aligned")
    a = np.array([x.as_array() for x in states])
    r = np.array([x.as_array() for x in reference])
    return float(np.abs(a - r).mean())


_REFERENCE_CACHE: Dict[Tuple[float, ...], EssSolution] = {}


def reference_ess(sched: BlockSchedule, params: GameParams) -> List[State]:
    """ESS at ``c[b]`` for every block (the target of an ideal update)."""
    out = []
    for c in sched.values:
        p = params.with_cost_scale(c)
        key = (p.reward, p.rho1, p.rho2, p.gbar, c, p.C3)
        if key not in _REFERENCE_CACHE:
            _REFERENCE_CACHE[key] = solve_snr_cost(p)
        out.append(_REFERENCE_CACHE[key].state)
    return out


# ---------------------------------------------------------------------------
# Protocols
# ---------------------------------------------------------------------------

def _check_inputs(params: GameParams, mu: float, x0: State) -> None:
    if not isinstance(params.cost, SnrScaledCosts):
        raise DomainError("adaptive protocols need SNR-scaled costs")
    if not mu > 0.0:
        raise DomainError(f"step size must be positive, got {mu!r}")
    if x0.x3 <= 0.0:
        raise DomainError("initial state needs x3 > 0 (finite transmit power)")


def _estimator(mode: Optional[str], setting: str = "reward_estimator",
               default: str = "conditional") -> Estimator:
    if mode is None:
        mode = getattr(settings, setting, default)
    return Estimator(mode)


def _draw_block(cfg: SimConfig, b: int, X: np.ndarray, gbar: np.ndarray,
                params: GameParams, slots: int) -> SlotBatch:
    tau, tau_pn = thresholds_arrays(X, gbar)
    rng = snr_stream(cfg.seed, ADAPT_TAG, b)
    return draw_slots(rng, slots, SimMode.CHANNEL, params.rho1, params.rho2,
                      tau=tau, tau_pn=tau_pn, gbar=gbar, packet_prob=cfg.packet_prob,
                      arrival_rng=snr_stream(cfg.seed, ADAPT_TAG, b, 1))


def _collapse_flags(traj: Trajectory, x: State, b: int) -> None:
    for i, v in enumerate(x.as_tuple(), start=1):
        flag = f"action {i} extinct"
        if v == 0.0 and not any(f.startswith(flag) for f in traj.flags):
            traj.flags.append(f"{flag} at block {b}")
            _LOG.warning("adaptive: state collapse, %s at block %d", flag, b)


def su_bs_run(cfg: SimConfig, sched: BlockSchedule, params: GameParams, mu: float,
              x0: State, *, estimator: Optional[str] = None, oracle: bool = False,
              fairness: bool = False) -> AdaptiveResult:
    """State updating at the base station.

    Every block simulates ``B`` slots of channel-driven traffic at the
    broadcast state, estimates ``u(i, x) = R_i - C_i`` and applies
    :func:`~hnoma.replicator.replicator_update`.
    """
    _check_inputs(params, mu, x0)
    mode = _estimator(estimator)
    gbar = cfg.user_gbar()
    rho = (params.rho1, params.rho2)
    C3 = params.C3

    traj = Trajectory(states=[x0], step_size=mu)
    result = AdaptiveResult(Protocol.SU_BS, traj, [], [], reference=reference_ess(sched, params))
    x = x0
    prev_reward = np.full(2, np.nan)
    reports = np.full((cfg.n_users, 2), np.nan)
    for b in range(sched.n_blocks):
        c = sched.c(b)
        p_b = params.with_cost_scale(c)
        if oracle:
            u = analytic_payoffs(x, p_b)
        else:
            X = np.tile(x.as_array(), (cfg.n_users, 1))
            batch = _draw_block(cfg, b, X, gbar, params, sched.slots_per_block)
            slot_r = _slot_rewards(batch, params.reward, mode, prev_reward)
            prev_reward = slot_r[-1]
            r_hat = _block_mean(slot_r)
            scales = _user_cost_scales(c, gbar, params.gbar, fairness)
            reports = _user_costs(batch, scales, rho, reports)
            c_hat = _block_mean(reports)
            u = np.array([r_hat[0] - c_hat[0], r_hat[1] - c_hat[1], -C3])
            u = _fill_missing(x.as_array().reshape(1, 3), u.reshape(1, 3))[0]
        x = replicator_update(x, u, mu)
        traj.states.append(x)
        result.costs.append(c)
        result.est_payoffs.append((float(u[0]), float(u[1])))
        _collapse_flags(traj, x, b)
    traj.iterations = sched.n_blocks
    _LOG.info("adaptive: SU-BS finished %d blocks at %s", sched.n_blocks, x.as_tuple())
    return result


def su_u_run(cfg: SimConfig, sched: BlockSchedule, params: GameParams, mu: float,
             x0: State, *, estimator: Optional[str] = None, oracle: bool = False,
             fairness: bool = False, keep_history: bool = False) -> AdaptiveResult:
    """State updating at the users.

    Each user ``k`` updates its own state with rewards built from the BS
    feedback and its own cost samples ``c_k rho_i / gamma_k``. The recorded
    trajectory is the mean over all ``2M`` users.

    ``literal`` (default, ``settings.su_u_estimator``): every term is a time
    average over the ``B`` slots of the block, so a slot where the user did
    not take action ``i`` adds no cost for ``i``. ``conditional``: rewards
    per attempt and costs per own use of the action, as in SU-BS.
    """
    _check_inputs(params, mu, x0)
    mode = _estimator(estimator, "su_u_estimator", "literal")
    per_slot = mode is Estimator.LITERAL
    gbar = cfg.user_gbar()
    rho = (params.rho1, params.rho2)
    C3 = params.C3
    n_users = cfg.n_users

    X = np.tile(x0.as_array(), (n_users, 1))
    traj = Trajectory(states=[x0], step_size=mu)
    result = AdaptiveResult(Protocol.SU_U, traj, [], [], reference=reference_ess(sched, params))
    history = [X.copy()] if keep_history else None
    prev_reward = np.full(2, np.nan)
    costs = np.full((n_users, 2), np.nan)
    scales = np.empty(n_users)
    for b in range(sched.n_blocks):
        c = sched.c(b)
        scales = _user_cost_scales(c, gbar, params.gbar, fairness)
        if oracle:
            U = np.empty((n_users, 3))
            for k in range(n_users):
                p_k = GameParams(params.reward, params.sinr_threshold, params.rho1, params.rho2,
                                 float(gbar[k]), SnrScaledCosts(float(scales[k]), C3))
                U[k] = analytic_payoffs(State(float(X[k, 0]), float(X[k, 1]), float(X[k, 2])), p_k)
        else:
            batch = _draw_block(cfg, b, X, gbar, params, sched.slots_per_block)
            slot_r = _slot_rewards(batch, params.reward, mode, prev_reward)
            prev_reward = slot_r[-1]
            r_hat = _block_mean(slot_r)
            costs = _user_costs(batch, scales, rho, costs, per_slot=per_slot)
            silent = np.full(n_users, -C3)
            if per_slot:
                silent = silent * (batch.actions == 3).mean(axis=0)
            U = np.column_stack([r_hat[0] - costs[:, 0], r_hat[1] - costs[:, 1], silent])
            U = _fill_missing(X, U)
        X = replicator_update_many(X, U, mu)
        if history is not None:
            history.append(X.copy())
        m = X.mean(axis=0)
        mean_state = State(float(m[0]), float(m[1]), float(1.0 - m[0] - m[1]))
        traj.states.append(mean_state)
        result.costs.append(c)
        u_mean = U.mean(axis=0)
        result.est_payoffs.append((float(u_mean[0]), float(u_mean[1])))
        result.dispersion.append(float(np.abs(X - m).max()))
        _collapse_flags(traj, mean_state, b)
    traj.iterations = sched.n_blocks
    result.users = [UserState(State(float(r[0]), float(r[1]), float(r[2])), float(s), float(g))
                    for r, s, g in zip(X, scales, gbar)]
    if history is not None:
        result.history = np.array(history)
    _LOG.info("adaptive: SU-U finished %d blocks, mean state %s, dispersion %.4f",
              sched.n_blocks, traj.final.as_tuple(), result.dispersion[-1])
    return result


def run_protocol(protocol: str, cfg: SimConfig, sched: BlockSchedule, params: GameParams,
                 mu: float, x0: State, **kwargs) -> AdaptiveResult:
    proto = Protocol(protocol)
    if proto is Protocol.SU_BS:
        kwargs.pop("keep_history", None)
        return su_bs_run(cfg, sched, params, mu, x0, **kwargs)
    return su_u_run(cfg, sched, params, mu, x0, **kwargs)


__all__ = [
    "ADAPT_TAG",
    "Estimator",
    "Protocol",
    "BlockSchedule",
    "constant_schedule",
    "ramp_schedule",
    "fairness_scale",
    "estimate_reward",
    "UserState",
    "AdaptiveResult",
    "tracking_error",
    "reference_ess",
    "su_bs_run",
    "su_u_run",
    "run_protocol",
]
