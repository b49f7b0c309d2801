"""Controlled SIR dynamics, trajectories, and the final-size map.

The model tracks susceptible (x) and infected (y) fractions under a
time-varying reproduction number sigma(t):

    x' = -gamma*sigma(t)*x*y
    y' =  gamma*sigma(t)*x*y - gamma*y

The control is piecewise constant: a mild level sigma2 before and after a
strict window of length eta starting at t1 (level sigma1), and the
uncontrolled level sigma0 past the horizon T.  On each constant-sigma
segment the quantity x*exp(-sigma*(x+y)) is a first integral; it backs the
conservation diagnostics and the closed-form final size below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError, IntegrationError

# Fraction of infected below which an initial state is rejected rather than
# silently clamped.
Y_FLOOR = 1e-12

# Matching slack for x + y <= 1 and schedule bounds; pure float-noise room.
_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Model and control-budget constants.

    gamma   recovery rate (1/time)
    sigma0  uncontrolled reproduction number (after the horizon)
    sigma1  strict-quarantine reproduction number
    sigma2  mild-quarantine reproduction number (0 <= sigma1 < sigma2 <= sigma0)
    T       control horizon
    tau     strict-quarantine budget, 0 < tau <= T
    kappa   linear running cost weight on the control, >= 0
    """

    gamma: float
    sigma0: float
    sigma1: float
    sigma2: float
    T: float
    tau: float
    kappa: float = 0.0

    def __post_init__(self):
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise DomainError(f"gamma must be positive and finite, got {self.gamma}")
        if not (0.0 <= self.sigma1 < self.sigma2 <= self.sigma0):
            raise DomainError(
                "need 0 <= sigma1 < sigma2 <= sigma0, got "
                f"sigma1={self.sigma1}, sigma2={self.sigma2}, sigma0={self.sigma0}"
            )
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise DomainError(f"T must be positive and finite, got {self.T}")
        if not (0.0 < self.tau <= self.T):
            raise DomainError(f"tau must satisfy 0 < tau <= T, got tau={self.tau}")
        if not (self.kappa >= 0.0 and math.isfinite(self.kappa)):
            raise DomainError(f"kappa must be >= 0 and finite, got {self.kappa}")


@dataclass(frozen=True)
class EpidemicState:
    """A point (x, y) with x > 0, y > 0 and x + y <= 1."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"state must be finite, got ({self.x}, {self.y})")
        if self.x <= 0.0:
            raise DomainError(f"x0 must be positive, got {self.x}")
        if self.y < Y_FLOOR:
            raise DomainError(
                f"y0 must be at least {Y_FLOOR:g} (got {self.y}); "
                "states this close to the disease-free line are rejected, not clamped"
            )
        if self.x + self.y > 1.0 + _EDGE_TOL:
            raise DomainError(f"x0 + y0 must not exceed 1, got {self.x + self.y}")


@dataclass(frozen=True)
class Schedule:
    """Strict-quarantine window: start t1, duration eta.

    Admissibility (the region R) is checked against the params it is used
    with: 0 <= eta <= tau and 0 <= t1 <= T - eta.
    """

    t1: float
    eta: float

    @property
    def t2(self) -> float:
        return self.t1 + self.eta

    def validate(self, params: ModelParams) -> "Schedule":
        if not (math.isfinite(self.t1) and math.isfinite(self.eta)):
            raise DomainError(f"schedule must be finite, got {self}")
        if self.eta < -_EDGE_TOL or self.eta > params.tau + _EDGE_TOL:
            raise DomainError(
                f"eta must lie in [0, tau={params.tau}], got {self.eta}"
            )
        if self.t1 < -_EDGE_TOL or self.t1 > params.T - self.eta + _EDGE_TOL:
            raise DomainError(
                f"t1 must lie in [0, T - eta = {params.T - self.eta}], got {self.t1}"
            )
        return self


@dataclass(frozen=True)
class Segment:
    """One constant-sigma stretch of a trajectory: inclusive sample slice
    [i0, i1] over times [a, b]."""

    i0: int
    i1: int
    a: float
    b: float
    sigma: float


class Trajectory:
    """Dense solution of the controlled system plus running accumulators.

    Arrays (all aligned, strictly increasing times):
      times   sample grid covering [0, horizon]
      x, y    state fractions
      sigma   control value per sample (right-continuous at the jumps)
      A       int_0^t x/y dr
      B       int_0^t 1/y dr
    segments lists the constant-sigma slices; the jump samples are shared by
    the two adjacent segments.
    """

    def __init__(self, params, initial, schedule, horizon, step_hint,
                 times, x, y, sigma, A, B, segments):
        self.params = params
        self.initial = initial
        self.schedule = schedule
        self.horizon = horizon
        self.step_hint = step_hint
        self.times = times
        self.x = x
        self.y = y
        self.sigma = sigma
        self.A = A
        self.B = B
        self.segments = segments

    @property
    def segment_boundaries(self):
        """The control jump times inside (0, horizon]."""
        return [seg.b for seg in self.segments]

    def index_at(self, t: float) -> int:
        """Index of the sample at time t; t must hit the grid (jump times,
        segment endpoints, and anything derived from them do)."""
        i = int(np.searchsorted(self.times, t))
        for j in (i - 1, i, i + 1):
            if 0 <= j < len(self.times) and abs(self.times[j] - t) <= 1e-9:
                return j
        raise DomainError(f"time {t} is not a sample of this trajectory")

    def state_at(self, t: float) -> EpidemicState:
        """State at an arbitrary time, re-integrating the short stretch from
        the nearest earlier sample (no interpolation)."""
        if t < self.times[0] - _EDGE_TOL or t > self.times[-1] + _EDGE_TOL:
            raise DomainError(f"time {t} outside [0, {self.times[-1]}]")
        t = min(max(t, self.times[0]), self.times[-1])
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = max(0, min(i, len(self.times) - 1))
        dt = t - self.times[i]
        if dt <= _kernels.SEG_EPS:
            return EpidemicState(float(self.x[i]), float(self.y[i]))
        sig = float(self.sigma[i])
        xx, yy, _, _ = _kernels.rk4_last(
            float(self.x[i]), float(self.y[i]), self.params.gamma, sig, dt, 16
        )
        return EpidemicState(float(xx), float(yy))


def _control_segments(params, schedule, horizon):
    """(a, b, sigma) pieces of the control over [0, horizon], zero-length
    pieces dropped."""
    t1 = schedule.t1
    t2 = min(schedule.t2, params.T)
    pieces = [
        (0.0, t1, params.sigma2),
        (t1, t2, params.sigma1),
        (t2, params.T, params.sigma2),
        (params.T, horizon, params.sigma0),
    ]
    return [(a, b, s) for a, b, s in pieces if b - a > _kernels.SEG_EPS]


def integrate(params: ModelParams, initial: EpidemicState, schedule: Schedule,
              horizon: float | None = None, step_hint: float | None = None) -> Trajectory:
    """Integrate the controlled system over [0, horizon] (default [0, T]).

    Fixed-step classical RK4, restarted exactly at every control jump so no
    step straddles a discontinuity.  Step choice per segment: the smaller of
    step_hint (default 0.1/gamma) and seg_len/100, with at least 1000 steps
    per segment for the quadrature accumulators.
    """
    if horizon is None:
        horizon = params.T
    if horizon < params.T - _EDGE_TOL:
        raise DomainError(f"horizon must be >= T={params.T}, got {horizon}")
    schedule.validate(params)
    h_cap = step_hint if step_hint is not None else 0.1 / params.gamma
    if not (h_cap > 0.0):
        raise DomainError(f"step_hint must be positive, got {step_hint}")

    pieces = _control_segments(params, schedule, horizon)
    counts = [_kernels.n_steps(b - a, h_cap) for a, b, _ in pieces]
    total = sum(counts) + 1
    times = np.empty(total)
    x = np.empty(total)
    y = np.empty(total)
    sig = np.empty(total)
    A = np.empty(total)
    B = np.empty(total)

    xs = float(initial.x)
    ys = float(initial.y)
    a_acc = 0.0
    b_acc = 0.0
    pos = 0
    segments = []
    for (a, b, s), n in zip(pieces, counts):
        lo = pos
        hi = pos + n
        _kernels.rk4_fill(
            xs, ys, a_acc, b_acc, params.gamma, s, b - a, n,
            x[lo:hi + 1], y[lo:hi + 1], A[lo:hi + 1], B[lo:hi + 1],
        )
        h = (b - a) / n
        times[lo:hi + 1] = a + h * np.arange(n + 1)
        times[hi] = b
        sig[lo:hi + 1] = s
        segments.append(Segment(lo, hi, a, b, s))
        xs = float(x[hi])
        ys = float(y[hi])
        a_acc = float(A[hi])
        b_acc = float(B[hi])
        pos = hi

    bad = ~(np.isfinite(x) & np.isfinite(y) & (y > 0.0) & (x > 0.0))
    if bad.any():
        t_bad = float(times[int(np.argmax(bad))])
        raise IntegrationError(f"non-finite or non-physical state at t={t_bad:g}")

    return Trajectory(params, initial, schedule, horizon, step_hint,
                      times, x, y, sig, A, B, segments)


def conserved_residual(traj: Trajectory, segment: int) -> float:
    """Relative drift of the per-segment first integral x*exp(-sigma*(x+y)).

    Max over the segment's samples of |G(t) - G(start)| / G(start).
    """
    try:
        seg = traj.segments[segment]
    except IndexError:
        raise DomainError(
            f"segment index {segment} out of range (trajectory has "
            f"{len(traj.segments)})"
        ) from None
    sl = slice(seg.i0, seg.i1 + 1)
    g = traj.x[sl] * np.exp(-seg.sigma * (traj.x[sl] + traj.y[sl]))
    ref = g[0]
    return float(np.max(np.abs(g - ref)) / ref)


def x_infinity(params: ModelParams, state: EpidemicState) -> float:
    """Long-time susceptible fraction if the system runs free (sigma0) from
    `state`: the unique root u in (0, 1/sigma0) of

        u*exp(-sigma0*u) = x*exp(-sigma0*(x+y)).

    Computed from the conserved quantity rather than by integrating to large
    time, so no horizon-truncation error enters downstream quantities.
    """
    u = float(_kernels.xinf_root(state.x, state.y, params.sigma0))
    if not math.isfinite(u):
        raise IntegrationError(
            f"final-size bracketing failed for state ({state.x}, {state.y})"
        )
    return u


def x_infinity_partials(params: ModelParams, state: EpidemicState) -> tuple[float, float]:
    """(d x_inf/dx, d x_inf/dy) from the closed forms

        d/dx = ((1 - sigma0*x)/x) * x_inf/(1 - sigma0*x_inf)
        d/dy = -sigma0 * x_inf/(1 - sigma0*x_inf).
    """
    s0 = params.sigma0
    xinf = x_infinity(params, state)
    denom = 1.0 - s0 * xinf
    return ((1.0 - s0 * state.x) / state.x) * xinf / denom, -s0 * xinf / denom


def objective(params: ModelParams, initial: EpidemicState, schedule: Schedule,
              step_hint: float | None = None) -> float:
    """J(t1, eta) = x_inf at the horizon state plus the control cost
    kappa*(sigma1*eta + sigma2*(T-eta)); the cost integral is exact because
    sigma is piecewise constant."""
    schedule.validate(params)
    h_cap = step_hint if step_hint is not None else 0.1 / params.gamma
    value = float(_kernels.objective_value(
        schedule.t1, schedule.eta, params.T, params.gamma, params.sigma0,
        params.sigma1, params.sigma2, params.kappa, initial.x, initial.y, h_cap,
    ))
    if not math.isfinite(value):
        raise IntegrationError(f"objective evaluation failed at {schedule}")
    return value
