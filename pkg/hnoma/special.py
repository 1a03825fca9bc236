"""Special functions and Rayleigh-channel statistics.

- :func:`exp_integral_e1`: the exponential integral ``E1(z)``, which shows
  up in the average transmit-power costs.
- :func:`thresholds_from_state` / :func:`state_from_thresholds`: the
  bijection between power-control thresholds ``(tau, tau_pn)`` and the
  action probabilities under Rayleigh fading, where ``gamma`` is exponential
  with mean ``gbar``.
- :func:`sample_snr` and :func:`snr_stream`: inverse-CDF SNR draws on keyed,
  counter-based random streams.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .errors import DomainError
from .game import State


EULER_GAMMA = 0.57721566490153286061
_SERIES_CUTOFF = 1.0
_MAX_TERMS = 300
_EPS = sys.float_info.epsilon
_FPMIN = 1e-300


# ---------------------------------------------------------------------------
# Exponential integral
# ---------------------------------------------------------------------------

def _e1_series(z: float) -> float:
    # E1(z) = -gamma - ln z + sum_{k>=1} (-1)^(k+1) z^k / (k k!)
    total = 0.0
    term = 1.0
    for k in range(1, _MAX_TERMS):
        term *= -z / k
        contrib = -term / k
        total += contrib
        if abs(contrib) < _EPS * abs(total):
            break
    return -EULER_GAMMA - math.log(z) + total


def _e1_scaled_cf(z: float) -> float:
    """``exp(z) * E1(z)`` by the modified Lentz continued fraction (z > 1)."""
    b = z + 1.0
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) <= _EPS:
            return h
    raise ArithmeticError(f"E1 continued fraction did not converge at z={z!r}")


def exp_integral_e1(z: float) -> float:
    """Exponential integral ``E1(z) = int_z^inf exp(-t) / t dt`` for ``z > 0``.

    Power series for ``z <= 1``, continued fraction above. ``E1(inf) = 0``.

    Raises:
        DomainError: When ``z <= 0`` (E1 diverges at 0).
    """
    z = float(z)
    if not z > 0.0:
        raise DomainError(f"E1 is defined for z > 0, got {z!r}")
    if math.isinf(z):
        return 0.0
    if z <= _SERIES_CUTOFF:
        return _e1_series(z)
    return _e1_scaled_cf(z) * math.exp(-z)


def exp_scaled_e1(z: float) -> float:
    """``exp(z) * E1(z)``; finite for large ``z`` where ``E1`` underflows.

    Behaves like ``1 / z`` for large ``z`` and returns 0 at infinity.
    """
    z = float(z)
    if not z > 0.0:
        raise DomainError(f"E1 is defined for z > 0, got {z!r}")
    if math.isinf(z):
        return 0.0
    if z <= _SERIES_CUTOFF:
        return _e1_series(z) * math.exp(z)
    return _e1_scaled_cf(z)


# ---------------------------------------------------------------------------
# Thresholds <-> state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Thresholds:
    """Power-control thresholds on the instantaneous SNR.

    A user stays silent when ``gamma <= tau``, uses the low level when
    ``tau < gamma <= tau_pn`` and the high level above ``tau_pn``.
    ``tau_pn = inf`` disables action 1. ``tau_pn == tau`` only occurs for
    degenerate states (no action 2, or never transmitting).
    """

    tau: float
    tau_pn: float

    def __post_init__(self) -> None:
        if math.isnan(self.tau) or math.isnan(self.tau_pn):
            raise DomainError("thresholds must not be NaN")
        if self.tau < 0.0:
            raise DomainError(f"tau must be non-negative, got {self.tau}")
        if self.tau_pn < self.tau:
            raise DomainError(f"tau_pn ({self.tau_pn}) must not be below tau ({self.tau})")

    @property
    def action1_disabled(self) -> bool:
        return math.isinf(self.tau_pn)

    @property
    def no_truncation(self) -> bool:
        return self.tau == 0.0


def thresholds_from_state(x: State, gbar: float) -> Thresholds:
    """Thresholds that make a Rayleigh user play state ``x``.

    ``tau = gbar * ln(1 / (x1 + x2))`` and ``tau_pn = gbar * ln(1 / x1)``;
    ``tau = 0`` when ``x3 = 0`` and ``tau_pn = inf`` when ``x1 = 0``. A state
    that never transmits maps to two infinite thresholds.
    """
    if not gbar > 0.0:
        raise DomainError(f"average SNR must be positive, got {gbar!r}")
    p_tx = x.x1 + x.x2
    if x.x3 <= 0.0:
        tau = 0.0
    elif p_tx <= 0.0:
        tau = math.inf
    else:
        tau = gbar * -math.log(p_tx)
    tau_pn = math.inf if x.x1 <= 0.0 else gbar * -math.log(x.x1)
    # x3 = 0 with x1 > 0: both from -log of ~1, keep the ordering exact
    return Thresholds(tau=tau, tau_pn=max(tau_pn, tau))


def state_from_thresholds(t: Thresholds, gbar: float) -> State:
    """Action probabilities of a Rayleigh user (exponential SNR, mean ``gbar``)."""
    if not gbar > 0.0:
        raise DomainError(f"average SNR must be positive, got {gbar!r}")
    x1 = 0.0 if math.isinf(t.tau_pn) else math.exp(-t.tau_pn / gbar)
    p_tx = 0.0 if math.isinf(t.tau) else math.exp(-t.tau / gbar)
    x2 = max(p_tx - x1, 0.0)
    x3 = 1.0 - p_tx
    return State(x1, x2, x3)


def thresholds_arrays(x: np.ndarray, gbar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`thresholds_from_state` for rows of states.

    Args:
        x: Array of shape ``(n, 3)``.
        gbar: Per-row average SNR, shape ``(n,)`` (or scalar).
    """
    x = np.asarray(x, dtype=float)
    gbar = np.broadcast_to(np.asarray(gbar, dtype=float), x.shape[:1])
    p_tx = x[:, 0] + x[:, 1]
    with np.errstate(divide="ignore"):
        tau = np.where(x[:, 2] <= 0.0, 0.0, gbar * -np.log(p_tx))
        tau_pn = np.where(x[:, 0] <= 0.0, np.inf, gbar * -np.log(x[:, 0]))
    return tau, np.maximum(tau_pn, tau)


# ---------------------------------------------------------------------------
# Random SNR draws
# ---------------------------------------------------------------------------

def snr_stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the stream ``(seed, *key)``.

    Philox streams derived from a :class:`numpy.random.SeedSequence` with a
    spawn key: the draws of one ``(seed, key)`` never depend on which other
    streams were used or in which order.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def snr_from_uniform(u: Union[float, np.ndarray], gbar: Union[float, np.ndarray]):
    """Inverse CDF of the exponential SNR: ``-gbar * ln(u)`` for ``u`` in (0, 1]."""
    return -np.asarray(gbar) * np.log(u) if isinstance(u, np.ndarray) else -gbar * math.log(u)


def sample_snr(gbar: Union[float, np.ndarray], rng: np.random.Generator,
               size: Optional[Union[int, Tuple[int, ...]]] = None):
    """Draw instantaneous SNRs ``gamma = -gbar * ln(U)``, ``U`` uniform on (0, 1].

    ``gbar`` may be an array broadcastable to ``size`` (per-user averages).
    """
    if np.any(np.asarray(gbar) <= 0.0):
        raise DomainError("average SNR must be positive")
    if size is None:
        return -float(gbar) * math.log(1.0 - rng.random())
    u = 1.0 - rng.random(size)
    return -np.asarray(gbar, dtype=float) * np.log(u)


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (float(value_db) / 10.0)


def linear_to_db(value: float) -> float:
    if not value > 0.0:
        raise DomainError(f"cannot express {value!r} in dB")
    return 10.0 * math.log10(value)


__all__ = [
    "exp_integral_e1",
    "exp_scaled_e1",
    "Thresholds",
    "thresholds_from_state",
    "state_from_thresholds",
    "thresholds_arrays",
    "snr_stream",
    "snr_from_uniform",
    "sample_snr",
    "db_to_linear",
    "linear_to_db",
]
