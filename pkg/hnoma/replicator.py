"""Discrete-time replicator dynamics.

``x_i' = x_i + mu * x_i * (u(i, x) - u(x, x))`` with guarded arithmetic:
negative components are clamped, components under the extinction floor are
set to exactly 0, and the result is renormalised.

:func:`replicator_update` is driven by an arbitrary payoff vector. The
analytic integrator below and both adaptive protocols (which feed it
estimated payoffs) go through the same code path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

import settings
from .errors import DomainError
from .game import GameParams, State, mixed_payoff, payoff_matrix, payoff_vector
from .solver import avg_costs

_LOG = logging.getLogger("hnoma.replicator")


# ---------------------------------------------------------------------------
# Guarded update
# ---------------------------------------------------------------------------

def replicator_update_many(X: np.ndarray, U: np.ndarray, mu: float,
                           floor: Optional[float] = None) -> np.ndarray:
    """Row-wise replicator update of states ``X`` under payoffs ``U``.

    Args:
        X: States, shape ``(n, 3)``.
        U: Pure-action payoffs, shape ``(n, 3)``.
        mu: Step size (> 0).
        floor: Extinction floor; defaults to ``settings.extinction_floor``.

    The arithmetic is strictly element-wise, so row ``k`` of the result does
    not depend on ``n`` or on the other rows.
    """
    if not mu > 0.0:
        raise DomainError(f"step size must be positive, got {mu!r}")
    if floor is None:
        floor = getattr(settings, "extinction_floor", 1e-15)
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    u_bar = X[:, 0] * U[:, 0] + X[:, 1] * U[:, 1] + X[:, 2] * U[:, 2]
    nxt = X + mu * X * (U - u_bar[:, None])
    nxt = np.where(nxt < floor, 0.0, nxt)
    total = nxt[:, 0] + nxt[:, 1] + nxt[:, 2]
    if np.any(total <= 0.0):
        raise DomainError("replicator update removed every action")
    return nxt / total[:, None]


def replicator_update(x: State, payoffs: Sequence[float], mu: float) -> State:
    """One guarded replicator step for a single state and payoff vector."""
    u = np.asarray(payoffs, dtype=float).reshape(1, 3)
    row = replicator_update_many(x.as_array().reshape(1, 3), u, mu)[0]
    return State(float(row[0]), float(row[1]), float(row[2]))


# ---------------------------------------------------------------------------
# Analytic dynamics
# ---------------------------------------------------------------------------

def analytic_payoffs(x: State, params: GameParams) -> np.ndarray:
    """Exact pure payoffs ``A(x) x`` with the costs evaluated at ``x``."""
    return payoff_vector(x, payoff_matrix(params, avg_costs(x, params)))


def population_payoff(x: State, params: GameParams) -> float:
    return mixed_payoff(x, x, payoff_matrix(params, avg_costs(x, params)))


def replicator_step(x: State, params: GameParams, mu: Optional[float] = None) -> State:
    """Advance ``x`` by one step with analytic payoffs.

    Raises:
        InfiniteCostError: Under SNR-scaled costs when ``x3 = 0``.
    """
    if mu is None:
        mu = getattr(settings, "replicator_step_size", 0.2)
    return replicator_update(x, analytic_payoffs(x, params), mu)


def drift(x: State, params: GameParams, mu: Optional[float] = None) -> float:
    """Max-norm of the step taken from ``x``."""
    return replicator_step(x, params, mu).distance(x)


@dataclass
class Trajectory:
    """Recorded replicator path.

    ``states[0]`` is the initial state; ``iterations`` counts the updates
    applied before the stopping rule fired.
    """

    states: List[State]
    step_size: float
    converged: bool = False
    iterations: int = 0
    payoffs: List[float] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    @property
    def final(self) -> State:
        return self.states[-1]

    def rows(self) -> List[Tuple[int, float, float, float, float]]:
        """CSV rows ``(iter, x1, x2, x3, payoff)``."""
        out = []
        for i, x in enumerate(self.states):
            u = self.payoffs[i] if i < len(self.payoffs) else float("nan")
            out.append((i, x.x1, x.x2, x.x3, u))
        return out


def run_replicator(x0: State, params: GameParams, mu: Optional[float] = None,
                   max_iters: Optional[int] = None,
                   drift_tol: Optional[float] = None) -> Trajectory:
    """Iterate :func:`replicator_step` from ``x0`` until the drift is small.

    Stops when ``max|x_{t+1} - x_t| <= drift_tol``; running out of
    iterations yields a non-converged trajectory rather than an error.

    Raises:
        DomainError: When ``x0`` is not strictly interior.
    """
    if mu is None:
        mu = getattr(settings, "replicator_step_size", 0.2)
    if max_iters is None:
        max_iters = getattr(settings, "replicator_max_iters", 100000)
    if drift_tol is None:
        drift_tol = getattr(settings, "replicator_drift_tol", 1e-10)
    if not x0.interior:
        raise DomainError(f"initial state must be strictly interior, got {x0.as_tuple()}")

    traj = Trajectory(states=[x0], step_size=mu, payoffs=[population_payoff(x0, params)])
    x = x0
    for it in range(max_iters):
        nxt = replicator_step(x, params, mu)
        if nxt.distance(x) <= drift_tol:
            traj.converged = True
            traj.iterations = it
            break
        traj.states.append(nxt)
        traj.payoffs.append(population_payoff(nxt, params))
        x = nxt
    else:
        traj.iterations = max_iters
        traj.flags.append("not converged")
        _LOG.warning("replicator: no convergence after %d iterations (mu=%s)", max_iters, mu)

    for i, v in enumerate(x.as_tuple(), start=1):
        if v == 0.0:
            traj.flags.append(f"action {i} extinct")
    _LOG.info("replicator: %s after %d iterations at %s",
              "converged" if traj.converged else "stopped", traj.iterations, x.as_tuple())
    return traj


__all__ = [
    "replicator_update",
    "replicator_update_many",
    "analytic_payoffs",
    "population_payoff",
    "replicator_step",
    "drift",
    "Trajectory",
    "run_replicator",
]
