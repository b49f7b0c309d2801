"""Brute-force reference optimizer for the window placement problem.

Serves two roles: an independent check on the case-analysis planner, and
the fallback when the case analysis does not apply.  grid_search sweeps the
feasible region exhaustively; refine polishes any point with a local
pattern search.  Both maximize the objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import DomainError
from .sir import EpidemicState, ModelParams, Schedule


@dataclass(frozen=True)
class GridDump:
    """Flat row-major (eta-major) dump of every evaluated grid point."""

    t1: np.ndarray
    eta: np.ndarray
    J: np.ndarray
    n_t1: int
    n_eta: int


class GridSearchResult(NamedTuple):
    schedule: Schedule
    objective: float
    grid: GridDump


def grid_search(params: ModelParams, initial: EpidemicState,
                n_t1: int = 400, n_eta: int = 100,
                *, step_hint: float | None = None) -> GridSearchResult:
    """Evaluate J on an n_eta x n_t1 grid over the feasible region.

    Each eta row spans its own start range [0, T - eta], so the truncation
    border t1 = T - eta is always sampled exactly.  The argmax is strict;
    exact float ties go to the smallest t1, then the smallest eta.
    """
    if n_t1 < 2 or n_eta < 2:
        raise DomainError(f"grid needs at least 2 points per axis, got {n_t1}x{n_eta}")
    h_cap = step_hint if step_hint is not None else 0.1 / params.gamma
    if not (h_cap > 0.0):
        raise DomainError(f"step_hint must be positive, got {step_hint}")

    etas = np.linspace(0.0, params.tau, n_eta)
    t1_flat = np.empty(n_eta * n_t1)
    eta_flat = np.empty(n_eta * n_t1)
    J_flat = np.empty(n_eta * n_t1)
    row = np.empty(n_t1)

    best_J = -np.inf
    best_t1 = 0.0
    best_eta = 0.0
    for j, eta in enumerate(etas):
        eta = float(eta)
        t1s = np.linspace(0.0, params.T - eta, n_t1)
        _kernels.objective_row(
            t1s, eta, params.T, params.gamma, params.sigma0, params.sigma1,
            params.sigma2, params.kappa, initial.x, initial.y, h_cap, row,
        )
        lo = j * n_t1
        t1_flat[lo:lo + n_t1] = t1s
        eta_flat[lo:lo + n_t1] = eta
        J_flat[lo:lo + n_t1] = row
        i = int(np.argmax(row))
        rJ, rt1 = float(row[i]), float(t1s[i])
        if rJ > best_J or (rJ == best_J and (rt1, eta) < (best_t1, best_eta)):
            best_J, best_t1, best_eta = rJ, rt1, eta

    if not np.isfinite(best_J):
        raise DomainError("grid search produced no finite objective value")
    return GridSearchResult(Schedule(best_t1, best_eta), best_J,
                            GridDump(t1_flat, eta_flat, J_flat, n_t1, n_eta))


# Axis steps plus the two budget-trading diagonals; the diagonals matter
# because optima on the truncation border t1 + eta = T are reachable only
# by moving both coordinates at once.
_MOVES = ((1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, -1.0), (-1.0, 1.0))


def refine(params: ModelParams, initial: EpidemicState, seed: Schedule,
           radius: float | None = None, *, step_floor: float = 1e-4,
           step_hint: float | None = None, max_evals: int = 50000) -> Schedule:
    """Pattern search maximizing J from `seed`, starting at step `radius`
    (T/100 when omitted).

    At each scale the six moves are evaluated, clamped to the feasible
    region; the best strictly improving one is taken, otherwise the step
    halves.  Stops when the step drops below step_floor, so the result
    never scores below the seed and sits within step_floor of a local
    pattern optimum.
    """
    seed.validate(params)
    if not (step_floor > 0.0):
        raise DomainError(f"step_floor must be positive, got {step_floor}")
    T, tau = params.T, params.tau
    s = radius if radius is not None else T / 100.0
    if not (s > 0.0):
        raise DomainError(f"radius must be positive, got {radius}")
    h_cap = step_hint if step_hint is not None else 0.1 / params.gamma

    def J_at(t1: float, eta: float) -> float:
        return float(_kernels.objective_value(
            t1, eta, T, params.gamma, params.sigma0, params.sigma1,
            params.sigma2, params.kappa, initial.x, initial.y, h_cap,
        ))

    best_eta = min(max(seed.eta, 0.0), tau)
    best_t1 = min(max(seed.t1, 0.0), T - best_eta)
    best_J = J_at(best_t1, best_eta)
    evals = 1
    while s >= step_floor and evals < max_evals:
        cand = None
        for d1, d2 in _MOVES:
            eta_c = min(max(best_eta + d2 * s, 0.0), tau)
            t1_c = min(max(best_t1 + d1 * s, 0.0), T - eta_c)
            Jc = J_at(t1_c, eta_c)
            evals += 1
            if Jc > best_J and (cand is None or Jc > cand[0]):
                cand = (Jc, t1_c, eta_c)
        if cand is None:
            s *= 0.5
        else:
            best_J, best_t1, best_eta = cand
    return Schedule(best_t1, best_eta)
