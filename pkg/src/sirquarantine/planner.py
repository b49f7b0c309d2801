"""Window placement by border case analysis.

When the objective's eta-derivative keeps one sign over the whole feasible
region, the optimum lies on the region's upper border and is pinned down by
a four-case analysis on the indicator w (and the threshold alpha past the
corner where windows start getting truncated by the horizon):

    1  w(0) <= 0                     window starts immediately, (0, tau)
    2  w crosses zero before corner  interior start, (t_bar, tau)
    3  0 < w(corner) <= alpha        corner itself, (T - tau, tau)
    4  w(corner) > alpha             truncated window, (t_tilde, T - t_tilde)

Ties at the case boundaries resolve to the lower-numbered case.  When the
sign condition fails the planner either falls back to the brute-force
search or refuses, per the `fallback` flag.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import DomainError, IntegrationError, TheoremInapplicableError
from .oracle import grid_search, refine
from .sir import EpidemicState, ModelParams, Schedule, integrate, objective
from .switching import (
    Jtilde_parts,
    alpha_of,
    bisect_sign_change,
    w_of,
)

# Half-width of the dead band used for all sign classifications; values
# inside it count as zero, which sends case decisions to the lower case.
SIGN_BAND = 1e-10

# Width to which every root bisection here is driven (in time units).
ROOT_TOL = 1e-9


class KappaClassification(enum.Enum):
    """Sign behavior of dJ/deta over the feasible region."""

    ALWAYS_POSITIVE = "always-positive"
    ALWAYS_NEGATIVE = "always-negative"
    MIXED = "mixed"


def kappa_bound_range(params: ModelParams, initial: EpidemicState,
                      n_t1: int = 64, n_eta: int = 64,
                      *, step_hint: float | None = None) -> tuple[float, float]:
    """(min, max) over a feasibility-shaped grid of the threshold that kappa
    is compared against: dJ/deta > 0 at a point iff the threshold there
    exceeds kappa."""
    if n_t1 < 2 or n_eta < 2:
        raise DomainError(f"bound grid needs at least 2x2 points, got {n_t1}x{n_eta}")
    h_cap = step_hint if step_hint is not None else 0.1 / params.gamma
    out = np.empty(n_t1)
    bmin = math.inf
    bmax = -math.inf
    for eta in np.linspace(0.0, params.tau, n_eta):
        t1s = np.linspace(0.0, params.T - eta, n_t1)
        _kernels.eta_bound_row(
            t1s, float(eta), params.T, params.gamma, params.sigma0,
            params.sigma1, params.sigma2, initial.x, initial.y, h_cap, out,
        )
        bmin = min(bmin, float(out.min()))
        bmax = max(bmax, float(out.max()))
    if not (math.isfinite(bmin) and math.isfinite(bmax)):
        raise IntegrationError("kappa bound grid produced non-finite values")
    return bmin, bmax


def _classify(kappa: float, bmin: float, bmax: float) -> KappaClassification:
    if bmin - kappa > SIGN_BAND:
        return KappaClassification.ALWAYS_POSITIVE
    if bmax - kappa < -SIGN_BAND:
        return KappaClassification.ALWAYS_NEGATIVE
    return KappaClassification.MIXED


def check_kappa_condition(params: ModelParams, initial: EpidemicState,
                          n_t1: int = 64, n_eta: int = 64,
                          *, step_hint: float | None = None) -> KappaClassification:
    """Classify the sign of dJ/deta over the feasible region.

    kappa == 0 with sigma2 == sigma0 is decided analytically (the
    derivative is then strictly positive everywhere); anything else is
    decided by the grid range from kappa_bound_range with a +/- SIGN_BAND
    dead band, so near-threshold cases come back MIXED rather than being
    guessed.
    """
    if params.kappa == 0.0 and params.sigma2 == params.sigma0:
        return KappaClassification.ALWAYS_POSITIVE
    bmin, bmax = kappa_bound_range(params, initial, n_t1, n_eta, step_hint=step_hint)
    return _classify(params.kappa, bmin, bmax)


@dataclass(frozen=True)
class PlanResult:
    """Outcome of plan(): the chosen window, its objective value, which
    analysis case produced it (None off the case path), the method that
    decided it, the sign classification, and free-form diagnostics."""

    schedule: Schedule
    objective: float
    case_id: int | str | None
    method: str
    classification: KappaClassification
    diagnostics: dict


def _walk_left_if_plateau(params, initial, t_bar, w0, step_hint):
    """A root bisection lands anywhere inside a flat |w| <= band stretch;
    report the left edge of the stretch instead (earliest optimal start)."""
    probe = t_bar - max(1e-6, 100.0 * ROOT_TOL)
    if probe <= 0.0:
        return t_bar, False
    wp = w_of(params, initial, probe, step_hint=step_hint)
    if abs(wp) > SIGN_BAND:
        return t_bar, False
    edge = bisect_sign_change(
        lambda t: w_of(params, initial, t, step_hint=step_hint) - SIGN_BAND,
        0.0, probe, w0 - SIGN_BAND, wp - SIGN_BAND, tol=ROOT_TOL,
    )
    return edge, True


def plan(params: ModelParams, initial: EpidemicState, *, fallback: bool = True,
         n_t1: int = 400, n_eta: int = 100,
         step_hint: float | None = None) -> PlanResult:
    """Best strict-quarantine window for the given parameters.

    Runs the sign classification first.  ALWAYS_NEGATIVE means the running
    cost dominates and no window is worth opening (method "kappa-large").
    ALWAYS_POSITIVE (with sigma1 < 1) takes the border case analysis
    (method "border-theorem").  Anything else falls back to grid_search +
    refine when `fallback` is true (method "oracle-fallback") and raises
    TheoremInapplicableError when it is not.
    """
    diagnostics: dict = {}
    if params.kappa == 0.0 and params.sigma2 == params.sigma0:
        classification = KappaClassification.ALWAYS_POSITIVE
        diagnostics["kappa_check"] = "analytic"
    else:
        bmin, bmax = kappa_bound_range(params, initial, step_hint=step_hint)
        classification = _classify(params.kappa, bmin, bmax)
        diagnostics["kappa_check"] = "grid"
        diagnostics["bound_min"] = bmin
        diagnostics["bound_max"] = bmax

    if classification is KappaClassification.ALWAYS_NEGATIVE:
        # cost dominates everywhere: eta -> 0, and with no window the start
        # time is immaterial, so pin it at zero
        sched = Schedule(0.0, 0.0)
        return PlanResult(sched, objective(params, initial, sched, step_hint=step_hint),
                          "kappa-large", "kappa-large", classification, diagnostics)

    case_path_ok = classification is KappaClassification.ALWAYS_POSITIVE
    if params.sigma1 >= 1.0:
        case_path_ok = False
        diagnostics["case_path_blocked"] = "sigma1 >= 1"

    if not case_path_ok:
        if not fallback:
            raise TheoremInapplicableError(
                "border case analysis does not apply "
                f"(classification {classification.value}"
                + (", sigma1 >= 1" if params.sigma1 >= 1.0 else "")
                + "); rerun with fallback=True or use grid_search + refine"
            )
        coarse = grid_search(params, initial, n_t1=n_t1, n_eta=n_eta,
                             step_hint=step_hint)
        spacing = max(params.T / max(n_t1 - 1, 1), params.tau / max(n_eta - 1, 1))
        fine = refine(params, initial, coarse.schedule, spacing,
                      step_floor=1e-6, step_hint=step_hint)
        diagnostics["coarse_schedule"] = (coarse.schedule.t1, coarse.schedule.eta)
        diagnostics["coarse_objective"] = coarse.objective
        return PlanResult(fine, objective(params, initial, fine, step_hint=step_hint),
                          None, "oracle-fallback", classification, diagnostics)

    T, tau = params.T, params.tau
    corner = T - tau
    w0 = w_of(params, initial, 0.0, step_hint=step_hint)
    diagnostics["w_start"] = w0
    if w0 <= SIGN_BAND:
        case_id = 1
        sched = Schedule(0.0, tau)
    else:
        wc = w_of(params, initial, corner, step_hint=step_hint)
        diagnostics["w_corner"] = wc
        if wc <= SIGN_BAND:
            case_id = 2
            if wc >= -SIGN_BAND:
                t_bar = corner
            else:
                t_bar = bisect_sign_change(
                    lambda t: w_of(params, initial, t, step_hint=step_hint),
                    0.0, corner, w0, wc, tol=ROOT_TOL,
                )
            t_bar, plateau = _walk_left_if_plateau(params, initial, t_bar, w0, step_hint)
            diagnostics["plateau"] = plateau
            sched = Schedule(t_bar, tau)
        else:
            alpha_c = alpha_of(params, initial, corner, step_hint=step_hint)
            diagnostics["alpha_corner"] = alpha_c
            if wc <= alpha_c + SIGN_BAND:
                case_id = 3
                sched = Schedule(corner, tau)
            else:
                case_id = 4

                def gap(t: float) -> float:
                    return Jtilde_parts(params, initial, t,
                                        step_hint=step_hint).sign_carrier

                g_hi = gap(T)
                if g_hi >= 0.0:
                    raise IntegrationError(
                        "no bracket for the truncated-window root: "
                        f"w - alpha is {wc - alpha_c:g} at t={corner:g} and "
                        f"{g_hi:g} at t={T:g}"
                    )
                t_tilde = bisect_sign_change(gap, corner, T, wc - alpha_c, g_hi,
                                             tol=ROOT_TOL)
                sched = Schedule(t_tilde, T - t_tilde)
    return PlanResult(sched, objective(params, initial, sched, step_hint=step_hint),
                      case_id, "border-theorem", classification, diagnostics)


def plan_corollary_sigma1_zero(params: ModelParams, initial: EpidemicState,
                               *, step_hint: float | None = None) -> PlanResult:
    """Fast path for total quarantine with no running cost (sigma1 == 0,
    sigma2 == sigma0, kappa == 0).

    Every case threshold then reduces to a closed-form condition on the
    no-window trajectory, so a single integration plus root polish on it
    decides the window.  Case numbering matches plan().
    """
    if params.sigma1 != 0.0:
        raise DomainError(f"fast path requires sigma1 == 0, got {params.sigma1}")
    if params.sigma2 != params.sigma0:
        raise DomainError(
            f"fast path requires sigma2 == sigma0, got {params.sigma2} != {params.sigma0}"
        )
    if params.kappa != 0.0:
        raise DomainError(f"fast path requires kappa == 0, got {params.kappa}")
    T, tau = params.T, params.tau
    corner = T - tau
    s0 = params.sigma0
    g = params.gamma
    free = integrate(params, initial, Schedule(T, 0.0), step_hint=step_hint)
    diagnostics: dict = {"kappa_check": "analytic"}

    def x_free(t: float) -> float:
        return free.state_at(t).x

    if s0 * initial.x - 1.0 <= SIGN_BAND:
        case_id = 1
        sched = Schedule(0.0, tau)
    else:
        x_corner = x_free(corner)
        diagnostics["x_corner"] = x_corner
        if s0 * x_corner - 1.0 <= SIGN_BAND:
            t_bar = bisect_sign_change(
                lambda t: s0 * x_free(t) - 1.0,
                0.0, corner, s0 * initial.x - 1.0, s0 * x_corner - 1.0,
                tol=ROOT_TOL,
            )
            case_id = 2
            sched = Schedule(t_bar, tau)
        else:
            thr = 1.0 / (s0 * (1.0 - math.exp(-g * tau)))
            diagnostics["corner_threshold"] = thr
            if x_corner <= thr + SIGN_BAND:
                case_id = 3
                sched = Schedule(corner, tau)
            else:
                # root of x_free(t) = 1/(sigma0*(1 - exp(-gamma*(T - t)))),
                # cleared of the division so t = T stays evaluable
                def gap(t: float) -> float:
                    return s0 * (1.0 - math.exp(-g * (T - t))) * x_free(t) - 1.0

                t_tilde = bisect_sign_change(gap, corner, T, gap(corner), gap(T),
                                             tol=ROOT_TOL)
                case_id = 4
                sched = Schedule(t_tilde, T - t_tilde)
    return PlanResult(sched, objective(params, initial, sched, step_hint=step_hint),
                      case_id, "corollary", KappaClassification.ALWAYS_POSITIVE,
                      diagnostics)


@dataclass(frozen=True)
class RegimeRow:
    tau: float
    case_id: int | str | None
    t_start: float
    eta: float
    objective: float


@dataclass(frozen=True)
class RegimeTable:
    """Planned windows across budgets, with the two budget levels where the
    optimum changes character: tau_bar, past which the best window runs into
    the horizon (case 2 -> 3), and tau_tilde, past which spending the whole
    budget stops paying (case 3 -> 4).  Either is None when the crossing
    does not happen inside the grid."""

    rows: list[RegimeRow]
    tau_bar: float | None
    tau_tilde: float | None


def _grid_root(fn, taus: list[float]) -> float | None:
    vals = [fn(t) for t in taus]
    for a, b, fa, fb in zip(taus, taus[1:], vals, vals[1:]):
        if fa == 0.0:
            return a
        if fa * fb < 0.0:
            return bisect_sign_change(fn, a, b, fa, fb, tol=ROOT_TOL)
    if vals and vals[-1] == 0.0:
        return taus[-1]
    return None


def regime_boundaries(params: ModelParams, initial: EpidemicState, tau_grid,
                      *, step_hint: float | None = None) -> RegimeTable:
    """Plan across a grid of budgets and locate the case-transition budgets.

    tau_bar is the zero of tau -> w(T - tau) and tau_tilde the zero of
    tau -> (w - alpha)(T - tau), both bisected between the bracketing grid
    values; the planner rows themselves come from plan(fallback=True).
    """
    taus = [float(t) for t in tau_grid]
    if not taus:
        raise DomainError("tau grid must not be empty")
    if any(not (0.0 < t <= params.T) for t in taus):
        raise DomainError("every tau grid value must lie in (0, T]")
    if taus != sorted(taus) or len(set(taus)) != len(taus):
        raise DomainError("tau grid must be strictly increasing")

    rows = []
    for tv in taus:
        p = replace(params, tau=tv)
        res = plan(p, initial, fallback=True, step_hint=step_hint)
        rows.append(RegimeRow(tv, res.case_id, res.schedule.t1,
                              res.schedule.eta, res.objective))

    def corner_w(tv: float) -> float:
        p = replace(params, tau=tv)
        return w_of(p, initial, p.T - tv, step_hint=step_hint)

    def corner_gap(tv: float) -> float:
        p = replace(params, tau=tv)
        c = p.T - tv
        return (w_of(p, initial, c, step_hint=step_hint)
                - alpha_of(p, initial, c, step_hint=step_hint))

    return RegimeTable(rows, _grid_root(corner_w, taus), _grid_root(corner_gap, taus))
