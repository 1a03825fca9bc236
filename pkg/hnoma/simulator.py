"""Slot-level Monte-Carlo simulator of hybrid uplink NOMA.

``M`` resource blocks carry two users each. In every slot a user either
picks an action at random from a :class:`~hnoma.game.State` (state-driven
mode) or draws a Rayleigh SNR and applies truncated channel inversion
through :func:`decide_action` (channel-driven mode). The base station then
decodes each block with SIC (:func:`decode_block`).

Every resource block draws from its own keyed Philox stream, with packet
arrivals on a second one, so blocks can be spread over a thread pool and the
result depends on neither the worker count nor the chunk size.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

import settings
from .core import parallel_map
from .errors import DomainError
from .game import GameParams, State, check_action
from .special import Thresholds, snr_stream, thresholds_arrays

_LOG = logging.getLogger("hnoma.simulator")

SIM_TAG = 1

# SUCCESS[own - 1, peer - 1]: does the own signal get decoded?
SUCCESS = np.array([
    [False, True, True],    # high level: lost only against another high level
    [True, False, True],    # low level: SIC removes a high-level peer first
    [False, False, False],  # silent
])


class SimMode(str, Enum):
    STATE = "state"
    CHANNEL = "channel"


Policy = Union[State, Thresholds]


# ---------------------------------------------------------------------------
# Decision and decoding rules
# ---------------------------------------------------------------------------

def decide_action(gamma: float, t: Thresholds, rho1: float, rho2: float) -> Tuple[int, float]:
    """Truncated channel inversion: ``(action, transmit power)`` for SNR ``gamma``.

    ``gamma > tau_pn`` gives action 1 at ``rho1 / gamma``; ``tau < gamma <=
    tau_pn`` gives action 2 at ``rho2 / gamma``; ``gamma <= tau`` stays silent.
    """
    if gamma < 0.0:
        raise DomainError(f"SNR must be non-negative, got {gamma!r}")
    if gamma > t.tau_pn:
        return 1, rho1 / gamma
    if gamma > t.tau:
        return 2, rho2 / gamma
    return 3, 0.0


def decode_block(a1: int, a2: int) -> Tuple[bool, bool]:
    """SIC decode outcome of the two users sharing a block."""
    check_action(a1)
    check_action(a2)
    return bool(SUCCESS[a1 - 1, a2 - 1]), bool(SUCCESS[a2 - 1, a1 - 1])


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlotOutcome:
    """One block in one slot: both users' actions, SNRs, powers and decodes.

    SNRs and powers of transmitting users are NaN in state-driven mode.
    """

    block: int
    actions: Tuple[int, int]
    snr: Tuple[float, float]
    power: Tuple[float, float]
    success: Tuple[bool, bool]
    slot: int = 0

    def __post_init__(self) -> None:
        for a, p in zip(self.actions, self.power):
            check_action(a)
            if (a == 3) != (p == 0.0):
                raise DomainError(f"action {a} inconsistent with transmit power {p}")
        if self.success != decode_block(*self.actions):
            raise DomainError(f"success pattern {self.success} violates the decode rule")

    @property
    def decoded(self) -> int:
        """``Y`` in {0, 1, 2}: number of signals decoded in the block."""
        return int(self.success[0]) + int(self.success[1])


@dataclass
class SimConfig:
    """Simulation size and channel setup.

    Attributes:
        n_blocks: Number of resource blocks ``M`` (two users each).
        n_slots: Slots simulated per block.
        gbar: Average SNR, a scalar or one value per user (length ``2M``,
            users ``2m`` and ``2m + 1`` share block ``m``).
        mode: State-driven or channel-driven action selection.
        seed: Master seed.
        packet_prob: Probability a user has a packet in a slot.
        trace: Keep per-slot rows for CSV export.
    """

    n_blocks: int
    n_slots: int
    gbar: Union[float, Sequence[float]] = 10.0
    mode: SimMode = SimMode.CHANNEL
    seed: int = 0
    packet_prob: float = 1.0
    trace: bool = False

    def __post_init__(self) -> None:
        self.mode = SimMode(self.mode)
        if self.n_blocks < 1:
            raise DomainError(f"need at least one resource block, got {self.n_blocks}")
        if self.n_slots < 1:
            raise DomainError(f"need at least one slot, got {self.n_slots}")
        if not 0.0 < self.packet_prob <= 1.0:
            raise DomainError(f"packet probability must lie in (0, 1], got {self.packet_prob}")
        g = self.user_gbar()
        if np.any(~np.isfinite(g)) or np.any(g <= 0.0):
            raise DomainError("average SNRs must be positive and finite")

    @property
    def n_users(self) -> int:
        return 2 * self.n_blocks

    def user_gbar(self) -> np.ndarray:
        g = np.asarray(self.gbar, dtype=float)
        if g.ndim == 0:
            return np.full(self.n_users, float(g))
        if g.shape != (self.n_users,):
            raise DomainError(f"per-user gbar needs {self.n_users} values, got {g.size}")
        return g


# ---------------------------------------------------------------------------
# Vectorised slot generation
# ---------------------------------------------------------------------------

@dataclass
class SlotBatch:
    """``n`` slots for ``U`` users (paired ``2m, 2m + 1``), arrays of shape ``(n, U)``."""

    actions: np.ndarray
    snr: np.ndarray
    power: np.ndarray
    success: np.ndarray

    @property
    def decoded(self) -> np.ndarray:
        """``Y`` per slot and block, shape ``(n, U // 2)``."""
        n, u = self.success.shape
        return self.success.reshape(n, u // 2, 2).sum(axis=2)


def peer_actions(actions: np.ndarray) -> np.ndarray:
    n, u = actions.shape
    return actions.reshape(n, u // 2, 2)[:, :, ::-1].reshape(n, u)


def draw_slots(rng: np.random.Generator, n_slots: int, mode: SimMode,
               rho1: float, rho2: float, *,
               states: Optional[np.ndarray] = None,
               tau: Optional[np.ndarray] = None,
               tau_pn: Optional[np.ndarray] = None,
               gbar: Optional[np.ndarray] = None,
               packet_prob: float = 1.0,
               arrival_rng: Optional[np.random.Generator] = None) -> SlotBatch:
    """Draw ``n_slots`` slots of actions and decode them.

    State-driven mode needs ``states`` (shape ``(U, 3)``); channel-driven
    mode needs per-user ``tau``, ``tau_pn`` and ``gbar`` (shape ``(U,)``).
    Packet arrivals come from ``arrival_rng`` (default ``rng``); a separate
    stream keeps the draws independent of how the slots are chunked.
    """
    if mode is SimMode.STATE:
        if states is None:
            raise DomainError("state-driven slots need per-user states")
        n_users = states.shape[0]
        u = rng.random((n_slots, n_users))
        cut1 = states[:, 0]
        cut2 = states[:, 0] + states[:, 1]
        actions = np.where(u < cut1, 1, np.where(u < cut2, 2, 3)).astype(np.int8)
        snr = np.full((n_slots, n_users), np.nan)
        power = np.where(actions == 3, 0.0, np.nan)
    else:
        if tau is None or tau_pn is None or gbar is None:
            raise DomainError("channel-driven slots need thresholds and average SNRs")
        n_users = tau.shape[0]
        snr = -gbar * np.log(1.0 - rng.random((n_slots, n_users)))
        actions = np.where(snr > tau_pn, 1, np.where(snr > tau, 2, 3)).astype(np.int8)
        with np.errstate(divide="ignore"):
            power = np.where(actions == 1, rho1 / snr, np.where(actions == 2, rho2 / snr, 0.0))
    if packet_prob < 1.0:
        idle = (arrival_rng or rng).random((n_slots, n_users)) >= packet_prob
        actions = np.where(idle, 3, actions).astype(np.int8)
        power = np.where(idle, 0.0, power)
    success = SUCCESS[actions - 1, peer_actions(actions) - 1]
    return SlotBatch(actions=actions, snr=snr, power=power, success=success)


def policy_arrays(policy: Union[Policy, Sequence[Policy]], mode: SimMode,
                  gbar: np.ndarray) -> Dict[str, np.ndarray]:
    """Per-user keyword arrays for :func:`draw_slots`.

    A :class:`State` in channel-driven mode is turned into each user's own
    thresholds, so heterogeneous users still play that state.
    """
    n_users = gbar.shape[0]
    policies = list(policy) if isinstance(policy, (list, tuple)) else [policy] * n_users
    if len(policies) != n_users:
        raise DomainError(f"expected {n_users} per-user policies, got {len(policies)}")
    if mode is SimMode.STATE:
        if not all(isinstance(p, State) for p in policies):
            raise DomainError("state-driven simulation needs State policies")
        return {"states": np.array([p.as_array() for p in policies])}
    tau = np.empty(n_users)
    tau_pn = np.empty(n_users)
    for k, p in enumerate(policies):
        if isinstance(p, State):
            t_k, tpn_k = thresholds_arrays(p.as_array().reshape(1, 3), gbar[k])
            tau[k], tau_pn[k] = t_k[0], tpn_k[0]
        else:
            tau[k], tau_pn[k] = p.tau, p.tau_pn
    return {"tau": tau, "tau_pn": tau_pn, "gbar": gbar}


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

@dataclass
class _Tally:
    counts: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))
    successes: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))
    power_sum: np.ndarray = field(default_factory=lambda: np.zeros(3))
    power_max: np.ndarray = field(default_factory=lambda: np.zeros(3))
    y_hist: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))
    collisions: int = 0
    trace: List[Tuple[int, int, int, int, float, float, bool]] = field(default_factory=list)

    def add(self, batch: SlotBatch, block: int, slot0: int, keep_trace: bool) -> None:
        a = batch.actions
        for i in (1, 2, 3):
            mask = a == i
            self.counts[i - 1] += int(mask.sum())
            self.successes[i - 1] += int(batch.success[mask].sum())
            if i < 3 and mask.any():
                p = batch.power[mask]
                if not np.isnan(p).all():
                    self.power_sum[i - 1] += float(np.nansum(p))
                    self.power_max[i - 1] = max(self.power_max[i - 1], float(np.nanmax(p)))
        y = batch.decoded
        self.y_hist += np.bincount(y.ravel(), minlength=3)[:3]
        pair = a.reshape(a.shape[0], -1, 2)
        self.collisions += int(((pair[:, :, 0] == pair[:, :, 1]) & (pair[:, :, 0] < 3)).sum())
        if keep_trace:
            for s in range(a.shape[0]):
                for u in range(a.shape[1]):
                    self.trace.append((slot0 + s, block, 2 * block + u, int(a[s, u]),
                                       float(batch.snr[s, u]), float(batch.power[s, u]),
                                       bool(batch.success[s, u])))

    def merge(self, other: "_Tally") -> None:
        self.counts += other.counts
        self.successes += other.successes
        self.power_sum += other.power_sum
        self.power_max = np.maximum(self.power_max, other.power_max)
        self.y_hist += other.y_hist
        self.collisions += other.collisions
        self.trace.extend(other.trace)


@dataclass
class SimStats:
    """Aggregated outcome of :func:`run_sim`.

    Rates come with standard errors so tests and reports can use principled
    tolerances. Per-action arrays are indexed by ``action - 1``.
    """

    n_blocks: int
    n_slots: int
    mode: SimMode
    throughput: float
    throughput_se: float
    action_freq: np.ndarray
    action_freq_se: np.ndarray
    success_rate: np.ndarray
    success_rate_se: np.ndarray
    mean_power: np.ndarray
    max_power: np.ndarray
    y_hist: np.ndarray
    collisions: int
    unbounded_power: bool = False
    power_bound: Tuple[float, float] = (math.inf, math.inf)
    trace: List[Tuple[int, int, int, int, float, float, bool]] = field(default_factory=list, repr=False)

    @property
    def n_users(self) -> int:
        return 2 * self.n_blocks

    def to_dict(self) -> Dict[str, Any]:
        """JSON-serialisable snapshot (trace excluded)."""
        def _clean(values) -> List[Optional[float]]:
            return [None if not math.isfinite(float(v)) else float(v) for v in values]

        return {
            "n_blocks": self.n_blocks,
            "n_slots": self.n_slots,
            "mode": self.mode.value,
            "throughput": self.throughput,
            "throughput_se": self.throughput_se,
            "action_freq": _clean(self.action_freq),
            "action_freq_se": _clean(self.action_freq_se),
            "success_rate": _clean(self.success_rate),
            "success_rate_se": _clean(self.success_rate_se),
            "mean_power": _clean(self.mean_power),
            "max_power": _clean(self.max_power),
            "y_hist": [int(v) for v in self.y_hist],
            "collisions": self.collisions,
            "unbounded_power": self.unbounded_power,
            "power_bound": _clean(self.power_bound),
        }


def _stats_from_tally(t: _Tally, cfg: SimConfig, unbounded: bool,
                      bound: Tuple[float, float]) -> SimStats:
    n_user_slots = cfg.n_users * cfg.n_slots
    n_block_slots = cfg.n_blocks * cfg.n_slots
    freq = t.counts / n_user_slots
    freq_se = np.sqrt(freq * (1.0 - freq) / n_user_slots)
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(t.counts > 0, t.successes / np.maximum(t.counts, 1), np.nan)
        rate_se = np.where(t.counts > 0, np.sqrt(rate * (1.0 - rate) / np.maximum(t.counts, 1)), np.nan)
        mean_power = np.where(t.counts > 0, t.power_sum / np.maximum(t.counts, 1), np.nan)
    mean_power[2] = 0.0
    if cfg.mode is SimMode.STATE:
        mean_power[:2] = np.nan
        max_power = np.full(3, np.nan)
        max_power[2] = 0.0
    else:
        max_power = t.power_max.copy()
    y = np.arange(3)
    p_y = t.y_hist / n_block_slots
    mean_y = float(p_y @ y)
    var_y = float(p_y @ (y * y)) - mean_y * mean_y
    return SimStats(
        n_blocks=cfg.n_blocks,
        n_slots=cfg.n_slots,
        mode=cfg.mode,
        throughput=mean_y / 2.0,
        throughput_se=math.sqrt(max(var_y, 0.0) / n_block_slots) / 2.0,
        action_freq=freq,
        action_freq_se=freq_se,
        success_rate=rate,
        success_rate_se=rate_se,
        mean_power=mean_power,
        max_power=max_power,
        y_hist=t.y_hist.copy(),
        collisions=t.collisions,
        unbounded_power=unbounded,
        power_bound=bound,
        trace=t.trace,
    )


def run_sim(cfg: SimConfig, policy: Union[Policy, Sequence[Policy]], params: GameParams,
            workers: int = 1) -> SimStats:
    """Simulate ``cfg.n_slots`` slots on every block under ``policy``.

    ``policy`` is one :class:`State` or :class:`Thresholds` for all users, or
    a sequence with one entry per user. Identical ``(cfg, policy, params)``
    give identical statistics for any ``workers``.
    """
    gbar = cfg.user_gbar()
    arrays = policy_arrays(policy, cfg.mode, gbar)
    chunk = max(1, int(getattr(settings, "sim_chunk_slots", 4096)))

    unbounded = False
    bound = (math.inf, math.inf)
    if cfg.mode is SimMode.CHANNEL:
        tau, tau_pn = arrays["tau"], arrays["tau_pn"]
        unbounded = bool(np.any(tau == 0.0))
        with np.errstate(divide="ignore"):
            bound = (float(np.max(params.rho1 / tau_pn)), float(np.max(params.rho2 / tau)))
        if unbounded:
            _LOG.warning("simulator: tau = 0 for some users, transmit power is unbounded")

    def one_block(m: int) -> _Tally:
        rng = snr_stream(cfg.seed, SIM_TAG, m)
        arrivals = snr_stream(cfg.seed, SIM_TAG, m, 1)
        block_arrays = {k: v[2 * m:2 * m + 2] for k, v in arrays.items()}
        tally = _Tally()
        done = 0
        while done < cfg.n_slots:
            n = min(chunk, cfg.n_slots - done)
            batch = draw_slots(rng, n, cfg.mode, params.rho1, params.rho2,
                               packet_prob=cfg.packet_prob, arrival_rng=arrivals,
                               **block_arrays)
            tally.add(batch, m, done, cfg.trace)
            done += n
        return tally

    total = _Tally()
    for tally in parallel_map(one_block, range(cfg.n_blocks), workers):
        total.merge(tally)
    stats = _stats_from_tally(total, cfg, unbounded, bound)
    _LOG.info("simulator: %d blocks x %d slots, throughput %.5f +- %.5f",
              cfg.n_blocks, cfg.n_slots, stats.throughput, stats.throughput_se)
    return stats


def efficiency(M: int, F: float, alpha: float) -> Tuple[float, float]:
    """Bandwidth efficiency ``(e_o, e_h)`` of OMA and hybrid NOMA.

    With ``M`` blocks over bandwidth ``F`` and packet probability ``alpha``:
    ``e_o = alpha M / F`` and ``e_h = (2 alpha (1 - alpha) + alpha^2 / 2) 2M / F``.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"packet probability must lie in (0, 1], got {alpha!r}")
    if not (M > 0 and F > 0):
        raise DomainError("M and F must be positive")
    e_o = alpha * M / F
    e_h = (2.0 * alpha * (1.0 - alpha) + 0.5 * alpha * alpha) * 2.0 * M / F
    return e_o, e_h


def efficiency_gain(alpha: float) -> float:
    e_o, e_h = efficiency(1, 1.0, alpha)
    return e_h / e_o


__all__ = [
    "SUCCESS",
    "SimMode",
    "SlotOutcome",
    "SimConfig",
    "SlotBatch",
    "SimStats",
    "decide_action",
    "decode_block",
    "draw_slots",
    "peer_actions",
    "policy_arrays",
    "run_sim",
    "efficiency",
    "efficiency_gain",
]
