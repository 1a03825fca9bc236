"""Closed-form throughput comparisons and ESS parameter sweeps.

Per-user throughput of hybrid NOMA at state ``x`` is
``(1 - x1) x1 + (1 - x2) x2``; the OMA (TDMA) reference with access
probability ``1 - delta`` is ``(1 - delta) / 2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import model
from .core import parallel_map
from .errors import DomainError, NoBracketError
from .game import GameParams, SnrScaledCosts, State
from .solver import EssSolution, Regime, avg_costs, solve

_LOG = logging.getLogger("hnoma.analysis")

AXES = ("c", "gbar")


def _check_prob(delta: float) -> None:
    if not 0.0 <= delta <= 1.0:
        raise DomainError(f"delta must lie in [0, 1], got {delta!r}")


def throughput_hnoma(x: State) -> float:
    return (1.0 - x.x1) * x.x1 + (1.0 - x.x2) * x.x2


def throughput_oma(delta: float) -> float:
    _check_prob(delta)
    return (1.0 - delta) / 2.0


def throughput_hnoma_opt(delta: float) -> Tuple[float, State]:
    """Best hybrid-NOMA throughput when users stay silent with probability ``delta``.

    The maximum ``(1 - delta^2) / 2`` is attained at
    ``x1 = x2 = (1 - delta) / 2``, a gain of ``1 + delta`` over OMA.
    """
    _check_prob(delta)
    half = (1.0 - delta) / 2.0
    return (1.0 - delta * delta) / 2.0, State(half, half, delta)


def grid_max_throughput(delta: float, n: int = 200) -> Tuple[float, float, float]:
    """Brute-force maximum of the throughput on an ``n x n`` grid with ``x1 + x2 <= 1 - delta``."""
    _check_prob(delta)
    g = np.linspace(0.0, 1.0 - delta, n)
    x1, x2 = np.meshgrid(g, g, indexing="ij")
    eta = (1.0 - x1) * x1 + (1.0 - x2) * x2
    eta = np.where(x1 + x2 <= 1.0 - delta + 1e-12, eta, -np.inf)
    i, j = np.unravel_index(int(np.argmax(eta)), eta.shape)
    return float(eta[i, j]), float(g[i]), float(g[j])


@dataclass
class ThroughputReport:
    """Throughput of a state against the OMA baseline at ``delta = x3``."""

    state: State
    eta_hnoma: float
    eta_oma: float
    eta_opt: float
    ratio: Optional[float]
    gain_bound: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "state": list(self.state.as_tuple()),
            "eta_hnoma": self.eta_hnoma,
            "eta_oma": self.eta_oma,
            "eta_opt": self.eta_opt,
            "ratio": self.ratio,
            "gain_bound": self.gain_bound,
        }


def throughput_report(x: State) -> ThroughputReport:
    delta = x.x3
    eta_oma = throughput_oma(delta)
    eta_h = throughput_hnoma(x)
    return ThroughputReport(
        state=x,
        eta_hnoma=eta_h,
        eta_oma=eta_oma,
        eta_opt=throughput_hnoma_opt(delta)[0],
        ratio=eta_h / eta_oma if eta_oma > 0.0 else None,
        gain_bound=1.0 + delta,
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepRow:
    value: float
    state: Optional[State]
    valid: bool
    regime: Optional[str] = None
    reason: Optional[str] = None
    eta_hnoma: float = math.nan
    eta_oma: float = math.nan

    def as_tuple(self) -> Tuple[float, float, float, float, float, float, bool, str]:
        """CSV row ``(value, x1, x2, x3, eta_hnoma, eta_oma, valid, regime)``."""
        x = self.state.as_tuple() if self.state is not None else (math.nan,) * 3
        return (self.value, x[0], x[1], x[2], self.eta_hnoma, self.eta_oma,
                self.valid, self.regime or "")


@dataclass
class SweepTable:
    """Sweep rows in axis order with crossover diagnostics."""

    axis: str
    rows: List[SweepRow] = field(default_factory=list)

    def valid_rows(self) -> List[SweepRow]:
        return [r for r in self.rows if r.valid and r.state is not None]

    def column(self, name: str) -> List[float]:
        return [getattr(r.state, name) for r in self.valid_rows()]

    def crossover(self) -> Optional[Tuple[float, float]]:
        """First axis value where ``x1* - x2*`` changes sign, linearly interpolated.

        Returns ``(value, x)`` with ``x`` the interpolated common probability,
        or ``None`` when the difference keeps its sign.
        """
        rows = self.valid_rows()
        for a, b in zip(rows, rows[1:]):
            da = a.state.x1 - a.state.x2
            db = b.state.x1 - b.state.x2
            if da == 0.0:
                return a.value, a.state.x1
            if (da > 0.0) != (db > 0.0):
                t = da / (da - db)
                value = a.value + t * (b.value - a.value)
                x1 = a.state.x1 + t * (b.state.x1 - a.state.x1)
                x2 = a.state.x2 + t * (b.state.x2 - a.state.x2)
                return value, 0.5 * (x1 + x2)
        return None

    def closest_approach(self) -> Optional[SweepRow]:
        rows = self.valid_rows()
        if not rows:
            return None
        return min(rows, key=lambda r: abs(r.state.x1 - r.state.x2))

    def summary(self) -> Dict[str, Any]:
        cross = self.crossover()
        closest = self.closest_approach()
        x1 = self.column("x1")
        diffs = np.diff(x1) if len(x1) > 1 else np.array([])
        return {
            "axis": self.axis,
            "n_points": len(self.rows),
            "n_valid": len(self.valid_rows()),
            "crossover": None if cross is None else {"value": cross[0], "x": cross[1]},
            "closest_approach": None if closest is None else {
                "value": closest.value,
                "x1": closest.state.x1,
                "x2": closest.state.x2,
            },
            "x1_increasing": bool(diffs.size and np.all(diffs > 0.0)),
            "x1_decreasing": bool(diffs.size and np.all(diffs < 0.0)),
        }


def _point_params(params: GameParams, axis: str, value: float) -> GameParams:
    if axis == "c":
        return params.with_cost_scale(value)
    return params.with_gbar(value)


def _key(p: GameParams) -> str:
    if isinstance(p.cost, SnrScaledCosts):
        return model.cache_key("snr", p.reward, p.rho1, p.rho2, p.gbar, p.cost.c, None, None, p.C3)
    return model.cache_key("fixed", p.reward, None, None, None, None, p.cost.C1, p.cost.C2, p.C3)


def _from_cache(row: model.EssCache, p: GameParams) -> EssSolution:
    state = State(row.x1, row.x2, row.x3)
    if row.x3 > 0.0 or not p.snr_scaled:
        costs = avg_costs(state, p)
    else:
        costs = (math.inf, math.inf, p.C3)
    return EssSolution(state=state, regime=Regime(row.regime), residuals=(row.r1, row.r2),
                       valid=row.valid, reason=row.reason,
                       warnings=tuple(w for w in row.warnings.split("; ") if w),
                       avg_costs=costs)


def _store(p: GameParams, sol: EssSolution) -> None:
    snr = isinstance(p.cost, SnrScaledCosts)
    model.EssCache.create(
        key=_key(p), regime=sol.regime.value, reward=p.reward,
        sinr_threshold=p.sinr_threshold, rho1=p.rho1, rho2=p.rho2, gbar=p.gbar,
        c=p.cost.c if snr else None,
        C1=None if snr else p.cost.C1, C2=None if snr else p.cost.C2, C3=p.C3,
        x1=sol.state.x1, x2=sol.state.x2, x3=sol.state.x3,
        r1=sol.residuals[0], r2=sol.residuals[1], valid=sol.valid, reason=sol.reason,
        warnings="; ".join(sol.warnings))


def _solve_point(p: GameParams) -> Tuple[Optional[EssSolution], Optional[str]]:
    try:
        return solve(p), None
    except (NoBracketError, DomainError) as exc:
        _LOG.warning("analysis: unsolvable point (gbar=%s, cost=%s): %s", p.gbar, p.cost, exc)
        return None, str(exc)


def sweep(params: GameParams, axis: str, values: Sequence[float], workers: int = 1,
          cache: bool = False) -> SweepTable:
    """Solve the ESS along ``axis`` (``"c"`` or ``"gbar"``) at every value.

    Rows come back sorted by axis value. With ``cache=True`` solutions are
    read from and written to :class:`hnoma.model.EssCache` (the database
    must be initialised with :func:`hnoma.model.init_db`). Unsolvable points
    are kept as invalid rows.
    """
    if axis not in AXES:
        raise DomainError(f"sweep axis must be one of {AXES}, got {axis!r}")
    points = sorted({float(v) for v in values})
    if not points:
        raise DomainError("sweep needs at least one value")
    plist = [_point_params(params, axis, v) for v in points]

    solved: List[Tuple[Optional[EssSolution], Optional[str]]] = [(None, None)] * len(plist)
    todo = list(range(len(plist)))
    if cache:
        todo = []
        for i, p in enumerate(plist):
            row = model.EssCache.get_or_none(model.EssCache.key == _key(p))
            if row is None:
                todo.append(i)
            else:
                _LOG.debug("analysis: cache hit %s", row.key)
                solved[i] = (_from_cache(row, p), None)
    for i, res in zip(todo, parallel_map(_solve_point, [plist[i] for i in todo], workers)):
        solved[i] = res
        if cache and res[0] is not None:
            _store(plist[i], res[0])

    table = SweepTable(axis=axis)
    for v, (sol, err) in zip(points, solved):
        if sol is None:
            table.rows.append(SweepRow(value=v, state=None, valid=False, reason=err))
            continue
        table.rows.append(SweepRow(
            value=v, state=sol.state, valid=sol.valid, regime=sol.regime.value,
            reason=sol.reason, eta_hnoma=throughput_hnoma(sol.state),
            eta_oma=throughput_oma(sol.state.x3)))
    _LOG.info("analysis: sweep over %s, %d points (%d solved now)", axis, len(points), len(todo))
    return table


__all__ = [
    "throughput_hnoma",
    "throughput_oma",
    "throughput_hnoma_opt",
    "grid_max_throughput",
    "ThroughputReport",
    "throughput_report",
    "SweepRow",
    "SweepTable",
    "sweep",
]
