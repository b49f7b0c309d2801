"""Objective gradients and border indicators for window placement.

The search for the best strict-quarantine window reduces to sign and
crossing questions for a handful of scalar functions of the window start
time, evaluated along the upper border of the feasible region (full budget
eta = tau, then windows truncated by the horizon).  Every quantity here is
read off a dense trajectory through the running integrals of x/y and 1/y;
no quadrature is redone at this level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import DomainError, IntegrationError
from .sir import EpidemicState, ModelParams, Schedule, Trajectory, integrate

# Slack when snapping a query time onto [0, T] or across the border corner.
_T_TOL = 1e-9


class SwitchIntegrals:
    """Path integrals read off a trajectory's accumulators.

    I_xy(a, b)       = int_a^b x/y dt
    I_sigma(a, b, s) = s * I_xy(a, b) - int_a^b 1/y dt

    Endpoints must be sample times of the trajectory; control jump times and
    the horizon always are.
    """

    def __init__(self, traj: Trajectory):
        self._traj = traj

    def I_xy(self, a: float, b: float) -> float:
        traj = self._traj
        ia, ib = traj.index_at(a), traj.index_at(b)
        return float(traj.A[ib] - traj.A[ia])

    def I_sigma(self, a: float, b: float, sigma_ref: float) -> float:
        traj = self._traj
        ia, ib = traj.index_at(a), traj.index_at(b)
        da = float(traj.A[ib] - traj.A[ia])
        db = float(traj.B[ib] - traj.B[ia])
        return sigma_ref * da - db


def _y_at(traj: Trajectory, t: float) -> float:
    return float(traj.y[traj.index_at(t)])


def _terminal_xinf(params: ModelParams, traj: Trajectory) -> float:
    u = float(_kernels.xinf_root(float(traj.x[-1]), float(traj.y[-1]), params.sigma0))
    if not math.isfinite(u):
        raise IntegrationError("final-size bracketing failed at the horizon state")
    return u


def dJ_dt1(params: ModelParams, initial: EpidemicState, schedule: Schedule,
           *, form: str = "general", step_hint: float | None = None) -> float:
    """Partial derivative of the objective in the window start t1.

    form "general" works for any admissible parameters; form "reduced" is
    the simplification valid only when sigma2 == sigma0 and serves as an
    independent cross-check of the general path in that regime.
    """
    schedule.validate(params)
    traj = integrate(params, initial, schedule, step_hint=step_hint)
    ints = SwitchIntegrals(traj)
    t1 = schedule.t1
    t2 = min(schedule.t2, params.T)
    y1 = _y_at(traj, t1)
    y2 = _y_at(traj, t2)
    yT = float(traj.y[-1])
    xinf = _terminal_xinf(params, traj)
    g = params.gamma
    lead = g * g * (params.sigma2 - params.sigma1) * xinf / (1.0 - params.sigma0 * xinf)
    if form == "general":
        bracket = (ints.I_sigma(t1, t2, params.sigma0)
                   - g * y2 * ints.I_sigma(t2, params.T, params.sigma0)
                   * ints.I_sigma(t1, t2, params.sigma2))
        return lead * yT * y1 * bracket
    if form == "reduced":
        if params.sigma2 != params.sigma0:
            raise DomainError("reduced form requires sigma2 == sigma0")
        return lead * y1 * y2 * ints.I_sigma(t1, t2, params.sigma2)
    raise DomainError(f"unknown form {form!r}; expected 'general' or 'reduced'")


def dJ_deta(params: ModelParams, initial: EpidemicState, schedule: Schedule,
            *, form: int = 1, step_hint: float | None = None) -> float:
    """Partial derivative of the objective in the window length eta.

    Two algebraically equal evaluations are kept: form 1 stays
    well-conditioned when sigma2 == sigma0 (its growth factor is then
    exactly 1), form 2 is the shorter rearrangement.  Both subtract the
    kappa running-cost term.
    """
    schedule.validate(params)
    traj = integrate(params, initial, schedule, step_hint=step_hint)
    ints = SwitchIntegrals(traj)
    t2 = min(schedule.t2, params.T)
    y2 = _y_at(traj, t2)
    yT = float(traj.y[-1])
    xinf = _terminal_xinf(params, traj)
    g = params.gamma
    ds = params.sigma2 - params.sigma1
    lead = g * xinf / (1.0 - params.sigma0 * xinf)
    if form == 1:
        grow = 1.0 - (params.sigma0 - params.sigma2) * g * yT * ints.I_xy(t2, params.T)
        return lead * y2 * ds * grow - params.kappa * ds
    if form == 2:
        grow = 1.0 - g * y2 * ints.I_sigma(t2, params.T, params.sigma0)
        return lead * ds * yT * grow - params.kappa * ds
    raise DomainError(f"unknown form {form!r}; expected 1 or 2")


def _w_start_branch(params: ModelParams, traj: Trajectory,
                    ints: SwitchIntegrals, t: float) -> float:
    """w along the full-budget schedule (t, tau), for 0 <= t <= T - tau."""
    T = params.T
    t2 = min(t + params.tau, T)
    y2 = _y_at(traj, t2)
    return (ints.I_sigma(t, t2, params.sigma0)
            - params.gamma * y2 * ints.I_sigma(t2, T, params.sigma0)
            * ints.I_sigma(t, t2, params.sigma2))


def _w_diag_branch(params: ModelParams, ints: SwitchIntegrals, t: float) -> float:
    """w along the truncated schedule (t, T - t), for T - tau <= t <= T."""
    return ints.I_sigma(t, params.T, params.sigma0)


def _alpha_from(params: ModelParams, traj: Trajectory, t: float) -> float:
    yt = _y_at(traj, t)
    yT = float(traj.y[-1])
    xinf = _terminal_xinf(params, traj)
    g = params.gamma
    cost = params.kappa * (1.0 - params.sigma0 * xinf) / (g * yT * xinf)
    return (1.0 - cost) / (g * yt)


def w_of(params: ModelParams, initial: EpidemicState, t: float,
         *, step_hint: float | None = None) -> float:
    """Sign carrier of the border objective's derivative in the window
    start.  For t <= T - tau the window runs at full budget, schedule
    (t, tau); past the corner it is truncated by the horizon, schedule
    (t, T - t).  The corner itself is evaluated on the first branch (both
    give the same schedule there)."""
    T, tau = params.T, params.tau
    if t < -_T_TOL or t > T + _T_TOL:
        raise DomainError(f"t must lie in [0, T={T}], got {t}")
    t = min(max(t, 0.0), T)
    corner = T - tau
    if t <= corner + _T_TOL:
        t_eff = min(t, corner)
        traj = integrate(params, initial, Schedule(t_eff, tau), step_hint=step_hint)
        return _w_start_branch(params, traj, SwitchIntegrals(traj), t_eff)
    traj = integrate(params, initial, Schedule(t, T - t), step_hint=step_hint)
    return _w_diag_branch(params, SwitchIntegrals(traj), t)


def alpha_of(params: ModelParams, initial: EpidemicState, t: float,
             *, step_hint: float | None = None) -> float:
    """Threshold compared against w on the truncated stretch [T - tau, T],
    evaluated along the schedule (t, T - t).  With kappa = 0 it reduces to
    1/(gamma * y(t))."""
    T, tau = params.T, params.tau
    if t < T - tau - _T_TOL or t > T + _T_TOL:
        raise DomainError(f"alpha is defined on [{T - tau}, {T}], got t={t}")
    t = min(max(t, T - tau), T)
    traj = integrate(params, initial, Schedule(t, T - t), step_hint=step_hint)
    return _alpha_from(params, traj, t)


def h_of(params: ModelParams, initial: EpidemicState, t: float,
         *, step_hint: float | None = None) -> float:
    """y(T) * int_t^T x/y along the schedule (t, T - t); vanishes at t = T
    and decreases toward it on [T - tau, T]."""
    T, tau = params.T, params.tau
    if t < T - tau - _T_TOL or t > T + _T_TOL:
        raise DomainError(f"h is defined on [{T - tau}, {T}], got t={t}")
    t = min(max(t, T - tau), T)
    traj = integrate(params, initial, Schedule(t, T - t), step_hint=step_hint)
    ints = SwitchIntegrals(traj)
    return float(traj.y[-1]) * ints.I_xy(t, T)


def z_of(params: ModelParams, initial: EpidemicState, t: float,
         *, step_hint: float | None = None) -> float:
    """I_sigma0 over the strict window along the full-budget schedule
    (t, tau), for t in [0, T - tau]."""
    T, tau = params.T, params.tau
    corner = T - tau
    if t < -_T_TOL or t > corner + _T_TOL:
        raise DomainError(f"z is defined on [0, {corner}], got t={t}")
    t = min(max(t, 0.0), corner)
    traj = integrate(params, initial, Schedule(t, tau), step_hint=step_hint)
    ints = SwitchIntegrals(traj)
    return ints.I_sigma(t, min(t + tau, T), params.sigma0)


class BorderDerivative(NamedTuple):
    """value = prefactor * sign_carrier, with prefactor > 0, so sign
    questions can be settled on the carrier alone."""

    value: float
    prefactor: float
    sign_carrier: float


def Jtilde_derivative(params: ModelParams, initial: EpidemicState, t: float,
                      *, step_hint: float | None = None) -> float:
    """Derivative of the objective restricted to the upper border of the
    feasible region, parameterized by the window start.  See Jtilde_parts
    for the factored form."""
    return Jtilde_parts(params, initial, t, step_hint=step_hint).value


def Jtilde_parts(params: ModelParams, initial: EpidemicState, t: float,
                 *, step_hint: float | None = None) -> BorderDerivative:
    """Factored border derivative: (value, prefactor, sign_carrier).

    Before the corner at T - tau the carrier is w; after it, w - alpha
    (the truncated window loses length as it slides, which is where the
    alpha term and the kappa cost enter).
    """
    T, tau = params.T, params.tau
    if t < -_T_TOL or t > T + _T_TOL:
        raise DomainError(f"t must lie in [0, T={T}], got {t}")
    t = min(max(t, 0.0), T)
    corner = T - tau
    if t <= corner + _T_TOL:
        t_ref = min(t, corner)
        traj = integrate(params, initial, Schedule(t_ref, tau), step_hint=step_hint)
        ints = SwitchIntegrals(traj)
        carrier = _w_start_branch(params, traj, ints, t_ref)
    else:
        t_ref = t
        traj = integrate(params, initial, Schedule(t, T - t), step_hint=step_hint)
        ints = SwitchIntegrals(traj)
        carrier = _w_diag_branch(params, ints, t) - _alpha_from(params, traj, t)
    xinf = _terminal_xinf(params, traj)
    g = params.gamma
    prefactor = (g * g * (params.sigma2 - params.sigma1)
                 * xinf / (1.0 - params.sigma0 * xinf)
                 * _y_at(traj, t_ref) * float(traj.y[-1]))
    return BorderDerivative(prefactor * carrier, prefactor, carrier)


@dataclass(frozen=True)
class SwitchProfile:
    """Border indicators tabulated on a shared grid of window starts.

    alpha and h are NaN before the corner at T - tau and z is NaN after it.
    joint_mismatch is |w by one branch - w by the other| at the corner,
    where the two evaluation paths must agree.
    """

    t: np.ndarray
    w: np.ndarray
    alpha: np.ndarray
    h: np.ndarray
    z: np.ndarray
    joint_mismatch: float


def switch_profile(params: ModelParams, initial: EpidemicState, n: int = 241,
                   *, step_hint: float | None = None) -> SwitchProfile:
    """Tabulate w, alpha, h, z on n points of [0, T] plus the corner
    T - tau.  One trajectory per grid point; indicators sharing a schedule
    share the run."""
    if n < 2:
        raise DomainError(f"need at least 2 grid points, got {n}")
    T, tau = params.T, params.tau
    corner = T - tau
    grid = np.unique(np.concatenate([np.linspace(0.0, T, n), [corner]]))
    w = np.empty(grid.size)
    alpha = np.full(grid.size, np.nan)
    h = np.full(grid.size, np.nan)
    z = np.full(grid.size, np.nan)
    mismatch = math.nan
    for i, tv in enumerate(grid):
        t = float(tv)
        if t <= corner + _T_TOL:
            t_eff = min(t, corner)
            traj = integrate(params, initial, Schedule(t_eff, tau), step_hint=step_hint)
            ints = SwitchIntegrals(traj)
            w[i] = _w_start_branch(params, traj, ints, t_eff)
            z[i] = ints.I_sigma(t_eff, min(t_eff + tau, T), params.sigma0)
            if t_eff == corner:
                # the corner schedule is shared by both branches; fill the
                # diagonal-only indicators and record the branch gap
                alpha[i] = _alpha_from(params, traj, corner)
                h[i] = float(traj.y[-1]) * ints.I_xy(corner, T)
                mismatch = abs(w[i] - _w_diag_branch(params, ints, corner))
        else:
            traj = integrate(params, initial, Schedule(t, T - t), step_hint=step_hint)
            ints = SwitchIntegrals(traj)
            w[i] = _w_diag_branch(params, ints, t)
            alpha[i] = _alpha_from(params, traj, t)
            h[i] = float(traj.y[-1]) * ints.I_xy(t, T)
    return SwitchProfile(grid, w, alpha, h, z, mismatch)


def bisect_sign_change(fn, lo: float, hi: float, f_lo: float, f_hi: float,
            tol: float = 1e-9) -> float:
    """Plain bisection for a bracketed sign change, to absolute width tol."""
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0.0) == (f_hi > 0.0):
        raise IntegrationError(
            f"no sign change on [{lo}, {hi}]: f(lo)={f_lo:g}, f(hi)={f_hi:g}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)


def z_decreasing_window(params: ModelParams, initial: EpidemicState,
                        *, step_hint: float | None = None) -> tuple[float, float]:
    """Diagnostic window (s0, s1) in [0, T - tau] on which z is decreasing.

    s1 is where the no-window (mild) trajectory crosses x = 1/sigma0, s0
    where x at the window end crosses it as the start slides; the interval
    endpoint stands in when a crossing is absent.
    """
    T, tau = params.T, params.tau
    corner = T - tau
    thr = 1.0 / params.sigma0

    free = integrate(params, initial, Schedule(T, 0.0), step_hint=step_hint)
    if initial.x <= thr:
        s1 = 0.0
    else:
        gap_end = free.state_at(corner).x - thr
        if gap_end > 0.0:
            s1 = corner
        else:
            s1 = bisect_sign_change(lambda t: free.state_at(t).x - thr,
                         0.0, corner, initial.x - thr, gap_end)

    def end_gap(t: float) -> float:
        traj = integrate(params, initial, Schedule(t, tau), step_hint=step_hint)
        return traj.state_at(min(t + tau, T)).x - thr

    g0 = end_gap(0.0)
    if g0 <= 0.0:
        s0 = 0.0
    else:
        g1 = end_gap(corner)
        if g1 > 0.0:
            s0 = corner
        else:
            s0 = bisect_sign_change(end_gap, 0.0, corner, g0, g1)
    return s0, s1
