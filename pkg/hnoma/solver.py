"""ESS solver: average costs, closed forms and the SNR-scaled fixed point.

Two cost regimes are supported:

- fixed costs ``(C1, C2)``, where the ESS has a closed form in four regions
  of the ``(C1, C2)`` plane (:func:`solve_fixed_cost`);
- SNR-scaled costs ``c * rho_i / gamma`` under truncated channel inversion,
  where the ESS solves two scalar equations one after the other
  (:func:`solve_snr_cost`).

Mathematical failures are reported on :class:`EssSolution` (``valid`` and
``reason``); only precondition violations raise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

import settings
from .errors import AmbiguousRegionError, DomainError, InfiniteCostError, NoBracketError
from .game import (
    FixedCosts,
    GameParams,
    SnrScaledCosts,
    State,
    is_mixed_ne,
    payoff_matrix,
)
from .special import Thresholds, exp_integral_e1, exp_scaled_e1, thresholds_from_state

_LOG = logging.getLogger("hnoma.solver")

# below this x2 the difference of two E1 values cancels; use the midpoint rule
_SMALL_X2 = 1e-7
_BRENTQ_RTOL = 4.0 * float(np.finfo(float).eps)
_MAX_REFINE = 3


class Regime(str, Enum):
    """Which branch produced an :class:`EssSolution`."""

    FIXED_A = "FixedA"   # interior mixed ESS
    FIXED_B = "FixedB"   # action 1 extinct
    FIXED_C = "FixedC"   # nobody transmits
    FIXED_D = "FixedD"   # nobody stays silent
    SNR_SCALED = "SnrScaled"


@dataclass
class EssSolution:
    """Result of an ESS computation.

    Attributes:
        state: The equilibrium state (a best-effort state when invalid).
        regime: Region of the fixed-cost plane or ``SnrScaled``.
        residuals: Residuals ``(r1, r2)`` of the two defining equations.
        valid: ``False`` when the solution is mathematically unusable.
        reason: Why the solution is invalid, ``None`` otherwise.
        warnings: Degenerate-regime notes (valid solutions may carry some).
        avg_costs: ``(C1, C2, C3)`` evaluated at ``state``.
    """

    state: State
    regime: Regime
    residuals: Tuple[float, float]
    valid: bool = True
    reason: Optional[str] = None
    warnings: Tuple[str, ...] = field(default_factory=tuple)
    avg_costs: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def thresholds(self, gbar: float) -> Thresholds:
        """Power-control thresholds implementing ``state`` at average SNR ``gbar``."""
        return thresholds_from_state(self.state, gbar)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["state"] = list(self.state.as_tuple())
        d["regime"] = self.regime.value
        d["residuals"] = list(self.residuals)
        d["warnings"] = list(self.warnings)
        d["avg_costs"] = list(self.avg_costs)
        return d


# ---------------------------------------------------------------------------
# Average costs
# ---------------------------------------------------------------------------

def _cost_scales(params: GameParams) -> Tuple[float, float]:
    if not isinstance(params.cost, SnrScaledCosts):
        raise DomainError("SNR-scaled average costs need an SnrScaledCosts model")
    c = params.cost.c
    return c * params.rho1 / params.gbar, c * params.rho2 / params.gbar


def _cbar1(x1: float, k1: float) -> float:
    # (k1 / x1) * E1(ln 1/x1) == k1 * exp(L) * E1(L) with L = ln 1/x1
    if x1 <= 0.0:
        return 0.0
    if x1 >= 1.0:
        raise InfiniteCostError("x1 = 1 makes the average cost of action 1 infinite")
    return k1 * exp_scaled_e1(-math.log(x1))


def _cbar2(x1: float, x2: float, x3: float, k2: float) -> float:
    if x3 <= 0.0:
        raise InfiniteCostError(
            "x1 + x2 = 1: the average power of action 2 is infinite (no truncation)")
    if x2 <= 0.0:
        return 0.0 if x1 <= 0.0 else k2 / -math.log(x1)
    if x2 < _SMALL_X2:
        return k2 / -math.log(x1 + 0.5 * x2)
    upper = exp_integral_e1(-math.log1p(-x3))   # E1(ln 1/(x1 + x2))
    lower = 0.0 if x1 <= 0.0 else exp_integral_e1(-math.log(x1))
    return k2 * (upper - lower) / x2


def avg_cost_snr(x: State, params: GameParams) -> Tuple[float, float]:
    """Average SNR-scaled costs ``(C1, C2)`` of a Rayleigh population at ``x``.

    ``C1 = c rho1 / (gbar x1) * E1(ln 1/x1)`` and
    ``C2 = c rho2 / (gbar x2) * [E1(ln 1/(x1 + x2)) - E1(ln 1/x1)]``, with
    the removable singularities at ``x1 = 0`` and ``x2 = 0`` replaced by
    their limits.

    Raises:
        InfiniteCostError: When ``x3 = 0`` (action-2 power is unbounded).
    """
    k1, k2 = _cost_scales(params)
    if x.x3 <= 0.0:
        raise InfiniteCostError(
            "x1 + x2 = 1: the average power of action 2 is infinite (no truncation)")
    return _cbar1(x.x1, k1), _cbar2(x.x1, x.x2, x.x3, k2)


def avg_costs(x: State, params: GameParams) -> Tuple[float, float, float]:
    """``(C1, C2, C3)`` under the cost model of ``params``."""
    if isinstance(params.cost, FixedCosts):
        return params.cost.C1, params.cost.C2, params.cost.C3
    c1, c2 = avg_cost_snr(x, params)
    return c1, c2, params.cost.C3


# ---------------------------------------------------------------------------
# Fixed costs
# ---------------------------------------------------------------------------

def _check_ne(sol: EssSolution, reward: float) -> EssSolution:
    A = payoff_matrix(reward, sol.avg_costs)
    if not is_mixed_ne(sol.state, A):
        sol.warnings = sol.warnings + ("state fails the Nash equilibrium cross-check",)
        _LOG.warning("solver: %s solution %s is not a Nash equilibrium",
                     sol.regime.value, sol.state.as_tuple())
    return sol


def solve_fixed_cost(R: float, C1: float, C2: float, C3: float = 0.0) -> EssSolution:
    """Closed-form ESS for constant costs.

    With ``C1 > C2 > 0`` the plane splits into four regions:

    ====== ========================== ===========================================
    region condition                  ESS
    ====== ========================== ===========================================
    A      ``C1 < R < C1 + C2``       ``(1 - C1/R, 1 - C2/R, (C1 + C2)/R - 1)``
    B      ``C2 < R < C1``            ``(0, 1 - C2/R, C2/R)``
    C      ``R < C2``                 ``(0, 0, 1)``
    D      ``C1 + C2 < R``            ``((1 - dC/R)/2, (1 + dC/R)/2, 0)``
    ====== ========================== ===========================================

    A non-zero silence cost ``C3`` shifts every payoff of actions 1 and 2
    relative to action 3, so the table applies to ``C1 - C3`` and ``C2 - C3``.

    Raises:
        DomainError: Unless ``R > 0`` and ``C1 > C2 > C3`` hold.
        AmbiguousRegionError: When the costs lie on (or within the guard band
            of) a region boundary.
    """
    if not R > 0.0:
        raise DomainError(f"reward R must be positive, got {R!r}")
    c1, c2 = C1 - C3, C2 - C3
    if not (c1 > c2 > 0.0):
        raise DomainError(f"fixed costs need C1 > C2 > C3, got C1={C1}, C2={C2}, C3={C3}")
    guard = getattr(settings, "region_guard", 1e-12) * max(1.0, R)
    for label, value in (("C1 = R", c1), ("C2 = R", c2), ("C1 + C2 = R", c1 + c2)):
        if abs(value - R) <= guard:
            raise AmbiguousRegionError(f"costs lie on the region boundary {label}")

    warnings: Tuple[str, ...] = ()
    if c2 > R:
        regime = Regime.FIXED_C
        state = State(0.0, 0.0, 1.0)
        residuals = (0.0, 0.0)
        warnings = ("no transmission regime",)
    elif c1 > R:
        regime = Regime.FIXED_B
        x2 = 1.0 - c2 / R
        state = State(0.0, x2, c2 / R)
        residuals = (0.0, R * (1.0 - x2) - c2)
    elif c1 + c2 > R:
        regime = Regime.FIXED_A
        x1, x2 = 1.0 - c1 / R, 1.0 - c2 / R
        state = State(x1, x2, 1.0 - x1 - x2)
        residuals = (R * (1.0 - x1) - c1, R * (1.0 - x2) - c2)
    else:
        regime = Regime.FIXED_D
        delta = (c1 - c2) / R
        x1 = 0.5 * (1.0 - delta)
        x2 = 1.0 - x1
        state = State(x1, x2, 0.0)
        residuals = ((R * (1.0 - x1) - c1) - (R * (1.0 - x2) - c2), x1 + x2 - 1.0)
        warnings = ("no truncation: x3 = 0, transmit power unbounded",)

    for w in warnings:
        _LOG.warning("solver: region %s: %s", regime.value, w)
    sol = EssSolution(state=state, regime=regime, residuals=residuals,
                      warnings=warnings, avg_costs=(C1, C2, C3))
    return _check_ne(sol, R)


# ---------------------------------------------------------------------------
# SNR-scaled costs
# ---------------------------------------------------------------------------

def existence_margin(x3: float, params: GameParams) -> Tuple[float, float]:
    """Both sides ``(c rho1 / gbar, R x3 (1 - x3) / E1(ln 1/(1 - x3)))``.

    The ESS with this ``x3`` is the unique solution of the first-stage
    equation on ``(0, 1 - x3)`` when the left side exceeds the right one.
    """
    if not 0.0 < x3 < 1.0:
        raise DomainError(f"x3 must lie in (0, 1), got {x3!r}")
    k1, _ = _cost_scales(params)
    x3_tilde = 1.0 - x3
    right = params.reward * x3 * x3_tilde / exp_integral_e1(-math.log(x3_tilde))
    return k1, right


def existence_condition(x3: float, params: GameParams) -> bool:
    left, right = existence_margin(x3, params)
    return left > right


def _root(f: Callable[[float], float], lo: float, hi: float, what: str) -> float:
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0.0) == (f_hi > 0.0):
        raise NoBracketError(
            f"{what}: no sign change on [{lo:.3g}, {hi:.3g}] (f={f_lo:.3g}, {f_hi:.3g})")
    xtol = getattr(settings, "solver_xtol", 1e-12)
    rtol = getattr(settings, "solver_rtol", 1e-10)
    root = brentq(f, lo, hi, xtol=xtol, rtol=_BRENTQ_RTOL, maxiter=200)
    for _ in range(_MAX_REFINE):
        if abs(f(root)) <= rtol:
            break
        xtol *= 1e-3
        _LOG.debug("solver: %s residual %.3g, refining with xtol=%.1g", what, f(root), xtol)
        root = brentq(f, lo, hi, xtol=xtol, rtol=_BRENTQ_RTOL, maxiter=400)
    return float(root)


def solve_snr_cost(params: GameParams) -> EssSolution:
    """ESS under SNR-scaled costs.

    Stage 1 solves ``R (1 - x1) = C1(x1)`` on the search interval (the left
    side decreases, the right side increases, so the root is unique). Stage 2
    fixes ``x1*`` and solves ``R (1 - x2) = C2(x1*, x2)`` on
    ``(0, 1 - x1*)``. A silence cost ``C3`` enters both equations as the
    payoff of action 3.

    Raises:
        DomainError: When ``params`` does not use SNR-scaled costs.
        NoBracketError: When a defining function does not cross zero.
    """
    k1, k2 = _cost_scales(params)
    R = params.reward
    C3 = params.cost.C3
    lo, hi = getattr(settings, "solver_search_interval", (1e-9, 1.0 - 1e-9))
    margin = getattr(settings, "collapse_margin", 1e-6)
    rtol = getattr(settings, "solver_rtol", 1e-10)

    def f1(x1: float) -> float:
        return R * (1.0 - x1) - _cbar1(x1, k1) + C3

    if f1(lo) <= 0.0 < f1(0.0):
        # the root sits below the clipped interval; C1(0) = 0 is exact
        lo = 0.0
    x1 = _root(f1, lo, hi, "x1 equation")
    r1 = f1(x1)

    def f2(x2: float) -> float:
        x3 = (1.0 - x1) - x2
        return R * (1.0 - x2) - _cbar2(x1, x2, x3, k2) + C3

    hi2 = (1.0 - x1) - 1e-9
    if f2(hi2) > 0.0:
        state = State(x1, 1.0 - x1, 0.0)
        _LOG.warning("solver: x3 collapsed at c=%s, gbar=%s", params.cost.c, params.gbar)
        return EssSolution(state=state, regime=Regime.SNR_SCALED,
                           residuals=(r1, f2(hi2)), valid=False,
                           reason="x3 collapsed; increase c",
                           avg_costs=(_cbar1(x1, k1), math.inf, C3))
    x2 = _root(f2, 0.0, hi2, "x2 equation")
    r2 = f2(x2)
    x3 = (1.0 - x1) - x2
    state = State(x1, x2, x3)
    costs = (_cbar1(x1, k1), _cbar2(x1, x2, x3, k2), C3)

    valid, reason = True, None
    if x1 + x2 >= 1.0 - margin:
        valid, reason = False, "x3 collapsed; increase c"
    elif abs(r1) > rtol or abs(r2) > rtol:
        valid, reason = False, f"residuals ({r1:.3g}, {r2:.3g}) above tolerance {rtol:g}"
    if not valid:
        _LOG.warning("solver: invalid SNR-scaled solution: %s", reason)

    warnings: Tuple[str, ...] = ()
    if 0.0 < x3 < 1.0 and not existence_condition(x3, params):
        warnings = ("existence condition does not hold at x3*",)
        _LOG.debug("solver: existence condition fails at x3=%.6f", x3)

    sol = EssSolution(state=state, regime=Regime.SNR_SCALED, residuals=(r1, r2),
                      valid=valid, reason=reason, warnings=warnings, avg_costs=costs)
    _LOG.debug("solver: SNR-scaled ESS %s (residuals %.2g, %.2g)", state.as_tuple(), r1, r2)
    return _check_ne(sol, R) if valid else sol


def solve(params: GameParams) -> EssSolution:
    """Dispatch to :func:`solve_fixed_cost` or :func:`solve_snr_cost`."""
    if isinstance(params.cost, FixedCosts):
        cost = params.cost
        return solve_fixed_cost(params.reward, cost.C1, cost.C2, cost.C3)
    return solve_snr_cost(params)


__all__ = [
    "Regime",
    "EssSolution",
    "avg_cost_snr",
    "avg_costs",
    "solve_fixed_cost",
    "existence_margin",
    "existence_condition",
    "solve_snr_cost",
    "solve",
]
