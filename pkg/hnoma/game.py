"""Domain types and payoffs of the hybrid uplink NOMA evolutionary game.

A population of users shares resource blocks two at a time. Each user picks
one of three actions, indexed 1..3 throughout the package:

1. transmit so that the signal arrives at the high receive level ``rho1``;
2. transmit at the low receive level ``rho2``;
3. stay silent.

The population profile (``State``) is the probability of each action. Against
a peer drawn from the population, the expected payoff of a pure action is
``e_i^T A x`` with the 3x3 matrix ``A`` built by :func:`payoff_matrix`.

All functions here are pure; nothing holds mutable shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

import settings
from .errors import DomainError


SIMPLEX_TOL = 1e-12
ACTIONS = (1, 2, 3)


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class State:
    """Probability triple on the 2-simplex.

    Attributes:
        x1: Probability of action 1 (high receive level).
        x2: Probability of action 2 (low receive level).
        x3: Probability of action 3 (no transmission).

    The components are stored explicitly (not two plus an implied third) and
    normalisation is checked, never silently repaired. Only the replicator
    update renormalises.
    """

    x1: float
    x2: float
    x3: float

    def __post_init__(self) -> None:
        comps = (self.x1, self.x2, self.x3)
        for v in comps:
            if not math.isfinite(v) or v < -SIMPLEX_TOL or v > 1.0 + SIMPLEX_TOL:
                raise DomainError(f"state component {v!r} outside [0, 1]")
        total = math.fsum(comps)
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"state {comps!r} sums to {total!r}, not 1")

    @classmethod
    def from_iterable(cls, values: Iterable[float]) -> "State":
        vals = [float(v) for v in values]
        if len(vals) != 3:
            raise DomainError(f"a state has 3 components, got {len(vals)}")
        return cls(*vals)

    @classmethod
    def vertex(cls, action: int) -> "State":
        """Pure state playing ``action`` with probability one."""
        check_action(action)
        vals = [0.0, 0.0, 0.0]
        vals[action - 1] = 1.0
        return cls(*vals)

    @classmethod
    def barycenter(cls) -> "State":
        return cls(1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3], dtype=float)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.x1, self.x2, self.x3)

    def __getitem__(self, action: int) -> float:
        """1-based access: ``x[1]`` is the probability of action 1."""
        check_action(action)
        return self.as_tuple()[action - 1]

    @property
    def interior(self) -> bool:
        return min(self.as_tuple()) > 0.0

    def support(self) -> List[int]:
        return [i for i, v in zip(ACTIONS, self.as_tuple()) if v > 0.0]

    def distance(self, other: "State") -> float:
        """Max-norm distance between two states."""
        return max(abs(a - b) for a, b in zip(self.as_tuple(), other.as_tuple()))


def check_action(action: int) -> int:
    if action not in ACTIONS:
        raise DomainError(f"invalid action index {action!r} (expected 1, 2 or 3)")
    return action


def random_states(n: int, rng: np.random.Generator) -> List[State]:
    """Draw ``n`` states uniformly on the simplex (Dirichlet(1, 1, 1))."""
    draws = rng.dirichlet(np.ones(3), size=n)
    out = []
    for row in draws:
        # pin the third component so the sum is exact to rounding
        out.append(State(float(row[0]), float(row[1]), float(1.0 - row[0] - row[1])
                         if row[0] + row[1] <= 1.0 else 0.0))
    return out


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedCosts:
    """Constant per-action costs (C1 > C2 > 0, C3 usually 0)."""

    C1: float
    C2: float
    C3: float = 0.0

    def __post_init__(self) -> None:
        if not (self.C1 > self.C2 > 0.0):
            raise DomainError(f"fixed costs need C1 > C2 > 0, got C1={self.C1}, C2={self.C2}")


@dataclass(frozen=True)
class SnrScaledCosts:
    """Cost proportional to the transmit power ``rho_i / gamma`` with scale ``c``."""

    c: float
    C3: float = 0.0

    def __post_init__(self) -> None:
        if not self.c > 0.0:
            raise DomainError(f"cost scale c must be positive, got {self.c}")


CostModel = Union[FixedCosts, SnrScaledCosts]


def derive_power_levels(sinr_threshold: float) -> Tuple[float, float]:
    """Minimum receive levels ``(rho1, rho2)`` that allow SIC at SINR ``Gamma``.

    ``rho2 = Gamma`` and ``rho1 = Gamma * (1 + Gamma)``, which meet both SIC
    constraints ``rho1 / (rho2 + 1) >= Gamma`` and ``rho2 >= Gamma`` with
    equality.

    Raises:
        DomainError: When ``Gamma <= 0``.
    """
    if not (sinr_threshold > 0.0) or not math.isfinite(sinr_threshold):
        raise DomainError(f"SINR threshold must be positive, got {sinr_threshold!r}")
    rho2 = sinr_threshold
    rho1 = sinr_threshold * (1.0 + sinr_threshold)
    return rho1, rho2


@dataclass(frozen=True)
class GameParams:
    """Parameters of the game.

    Attributes:
        reward: Reward ``R`` for a successfully decoded transmission.
        sinr_threshold: Linear SINR threshold ``Gamma``.
        rho1: High receive level (linear, relative to noise).
        rho2: Low receive level.
        gbar: Average channel SNR of the Rayleigh fading channel (linear).
        cost: :class:`FixedCosts` or :class:`SnrScaledCosts`.
    """

    reward: float
    sinr_threshold: float
    rho1: float
    rho2: float
    gbar: float
    cost: CostModel = field(default_factory=lambda: SnrScaledCosts(1.0))

    def __post_init__(self) -> None:
        if not self.reward > 0.0:
            raise DomainError(f"reward R must be positive, got {self.reward}")
        if not self.sinr_threshold > 0.0:
            raise DomainError(f"SINR threshold must be positive, got {self.sinr_threshold}")
        if not self.gbar > 0.0:
            raise DomainError(f"average SNR must be positive, got {self.gbar}")
        slack = 1e-12 * max(1.0, self.sinr_threshold)
        if self.rho2 < self.sinr_threshold - slack:
            raise DomainError("rho2 below the SINR threshold: low-level signals cannot be decoded")
        if self.rho1 / (self.rho2 + 1.0) < self.sinr_threshold - slack:
            raise DomainError("rho1 too low for SIC: rho1 / (rho2 + 1) < Gamma")

    @classmethod
    def from_gamma(cls, reward: float, sinr_threshold: float, gbar: float,
                   cost: CostModel) -> "GameParams":
        """Build parameters with the minimum receive levels for ``Gamma``."""
        rho1, rho2 = derive_power_levels(sinr_threshold)
        return cls(reward=reward, sinr_threshold=sinr_threshold, rho1=rho1,
                   rho2=rho2, gbar=gbar, cost=cost)

    @property
    def snr_scaled(self) -> bool:
        return isinstance(self.cost, SnrScaledCosts)

    @property
    def cost_scale(self) -> Optional[float]:
        return self.cost.c if isinstance(self.cost, SnrScaledCosts) else None

    @property
    def C3(self) -> float:
        return self.cost.C3

    def with_cost_scale(self, c: float) -> "GameParams":
        if not isinstance(self.cost, SnrScaledCosts):
            raise DomainError("cost scale only applies to SNR-scaled costs")
        return replace(self, cost=SnrScaledCosts(c, self.cost.C3))

    def with_gbar(self, gbar: float) -> "GameParams":
        return replace(self, gbar=gbar)


# ---------------------------------------------------------------------------
# Payoffs
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PayoffMatrix:
    """The 3x3 payoff matrix ``A`` (row: own action, column: peer action).

    Row 3 is constant (``-C3``); within rows 1 and 2 the two columns where
    the own signal gets through are equal.
    """

    matrix: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.matrix, dtype=float)
        if a.shape != (3, 3):
            raise DomainError(f"payoff matrix must be 3x3, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(a))))
        if np.ptp(a[2]) > tol:
            raise DomainError("row 3 of the payoff matrix must be constant")
        if abs(a[0, 1] - a[0, 2]) > tol or abs(a[1, 0] - a[1, 2]) > tol:
            raise DomainError("payoff matrix does not have the SIC success structure")

    def shifted(self, k: float) -> "PayoffMatrix":
        """Matrix with ``k`` added to every entry (same equilibria)."""
        return PayoffMatrix(self.matrix + k)

    def __getitem__(self, idx):
        return self.matrix[idx]


def payoff_matrix(params: Union[GameParams, float],
                  avg_costs: Sequence[float]) -> PayoffMatrix:
    """Build ``A`` from the reward and the average costs ``(C1, C2, C3)``.

    ``params`` may be a :class:`GameParams` or a bare reward value.
    """
    reward = params.reward if isinstance(params, GameParams) else float(params)
    c1, c2, c3 = (float(v) for v in avg_costs)
    if not all(math.isfinite(v) for v in (c1, c2, c3)):
        raise DomainError(f"average costs must be finite, got {(c1, c2, c3)!r}")
    return PayoffMatrix(np.array([
        [-c1, reward - c1, reward - c1],
        [reward - c2, -c2, reward - c2],
        [-c3, -c3, -c3],
    ]))


def payoff_vector(x: State, A: PayoffMatrix) -> np.ndarray:
    """All three pure payoffs ``A x`` at once."""
    return A.matrix @ x.as_array()


def pure_payoff(action: int, x: State, A: PayoffMatrix) -> float:
    """Expected payoff of a user playing ``action`` against population ``x``."""
    check_action(action)
    return float(A.matrix[action - 1] @ x.as_array())


def mixed_payoff(xbar: State, x: State, A: PayoffMatrix) -> float:
    """Bilinear payoff ``xbar^T A x``."""
    return float(xbar.as_array() @ A.matrix @ x.as_array())


def is_mixed_ne(x: State, A: PayoffMatrix, tol: Optional[float] = None) -> bool:
    """True when no pure deviation beats ``x`` against itself by more than ``tol``."""
    if tol is None:
        tol = getattr(settings, "equilibrium_tol", 1e-9)
    u = mixed_payoff(x, x, A)
    return all(u >= pure_payoff(i, x, A) - tol for i in ACTIONS)


def default_mutant_grid(rng: Optional[np.random.Generator] = None,
                        n_random: Optional[int] = None) -> List[State]:
    """Simplex vertices plus ``n_random`` uniform states (12 by default)."""
    if n_random is None:
        n_random = getattr(settings, "ess_random_mutants", 12)
    if rng is None:
        rng = np.random.default_rng(0)
    return [State.vertex(i) for i in ACTIONS] + random_states(n_random, rng)


def is_ess(x: State, A: PayoffMatrix,
           mutant_grid: Optional[Sequence[State]] = None,
           eps_grid: Optional[Sequence[float]] = None,
           tol: Optional[float] = None) -> bool:
    """Sampled evolutionary-stability check.

    For every mutant ``xbar != x`` in the grid and every invasion size ``eps``
    the incumbent must strictly outperform the mutant in the post-entry
    population ``eps * xbar + (1 - eps) * x``. Stability is defined over all
    mutants and small enough invasions, so a finite grid can only refute it:
    ``True`` is a necessary-condition pass, not a proof.

    ``tol`` only decides when a mutant counts as equal to ``x``.
    """
    if mutant_grid is None:
        mutant_grid = default_mutant_grid()
    if eps_grid is None:
        eps_grid = getattr(settings, "ess_eps_grid", (0.001, 0.01, 0.1, 0.3))
    if tol is None:
        tol = getattr(settings, "equilibrium_tol", 1e-9)
    if not mutant_grid or not eps_grid:
        raise DomainError("ESS check needs non-empty mutant and epsilon grids")
    for eps in eps_grid:
        if not 0.0 < eps < 1.0:
            raise DomainError(f"invasion size must lie in (0, 1), got {eps!r}")

    xa = x.as_array()
    for mutant in mutant_grid:
        if x.distance(mutant) <= tol:
            continue
        ma = mutant.as_array()
        for eps in eps_grid:
            w = eps * ma + (1.0 - eps) * xa
            aw = A.matrix @ w
            if not float(xa @ aw) > float(ma @ aw):
                return False
    return True


__all__ = [
    "ACTIONS",
    "State",
    "FixedCosts",
    "SnrScaledCosts",
    "CostModel",
    "GameParams",
    "PayoffMatrix",
    "derive_power_levels",
    "payoff_matrix",
    "payoff_vector",
    "pure_payoff",
    "mixed_payoff",
    "is_mixed_ne",
    "is_ess",
    "default_mutant_grid",
    "random_states",
    "check_action",
]
