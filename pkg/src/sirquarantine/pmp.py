"""Costate integration and maximum-principle checks for a given window.

The costates satisfy

    lambda1' = (lambda1 - lambda2)*gamma*sigma*y
    lambda2' = (lambda1 - lambda2)*gamma*sigma*x + gamma*lambda2

backward from horizon conditions expressed through the final size, and the
switching function

    phi = kappa + lambda3 + gamma*x*y*(lambda2 - lambda1)

decides the control: the mild level requires phi >= 0, the strict level
phi <= 0.  lambda3 is the (constant, nonnegative) multiplier of the budget
constraint; it only shifts phi, so the costates are integrated once and
lambda3 is chosen afterwards.  verify_necessary_conditions turns all of
this into a pass/fail report for a candidate window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import IntegrationError
from .sir import EpidemicState, ModelParams, Schedule, integrate

# All sign tests run against a dead band of this fraction of max |phi|.
PHI_BAND_FACTOR = 1e-9

# A segment whose interior |phi| never exceeds this fraction of max |phi|
# carries no sign information (the strict level at sigma1 = 0 produces
# exactly this degeneracy at optima) and is excluded from sign counting.
DEGENERATE_FACTOR = 1e-6

# Normalized Hamiltonian drift allowed along an extremal.
HAMILTONIAN_TOL = 1e-5

# Allowed |lambda3 * (sigma2 - sigma1) * (tau - eta)| complementarity residual.
COMPLEMENTARITY_TOL = 1e-8

# Times closer than this count as coinciding when deciding which switch is
# interior and whether the budget constraint is active.
_TIME_TOL = 1e-9


@dataclass(frozen=True)
class AdjointPath:
    """Costates and switching function on the forward sample grid.

    x and y are the backward re-integration of the state (the values the
    costates were actually propagated against); state_retrace_error is the
    worst relative gap to the forward trajectory, a self-consistency check
    on the backward pass.  hamiltonian is sigma*phi - gamma*lambda2*y,
    constant along extremals.
    """

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    phi: np.ndarray
    sigma: np.ndarray
    lambda3: float
    hamiltonian: np.ndarray
    joint_indices: tuple[int, ...]
    segment_slices: tuple[tuple[int, int], ...]
    state_retrace_error: float


def _terminal_costates(params: ModelParams, xT: float, yT: float) -> tuple[float, float, float]:
    xinf = float(_kernels.xinf_root(xT, yT, params.sigma0))
    if not math.isfinite(xinf):
        raise IntegrationError("final-size bracketing failed at the horizon state")
    denom = 1.0 - params.sigma0 * xinf
    l1 = (1.0 - params.sigma0 * xT) * xinf / (denom * xT)
    l2 = -params.sigma0 * xinf / denom
    return l1, l2, xinf


def integrate_adjoint(params: ModelParams, initial: EpidemicState,
                      schedule: Schedule, *, step_hint: float | None = None) -> AdjointPath:
    """Integrate the costates backward along the window's trajectory and
    attach the budget multiplier.

    The multiplier is zero when the budget constraint is inactive
    (eta < tau).  When it is active, lambda3 is chosen to zero the
    switching function at an interior switch of the window (the last one
    when both are interior), clipped at zero; with no interior switch the
    horizon value is used.  The costates themselves do not depend on it.
    """
    traj = integrate(params, initial, schedule, step_hint=step_hint)
    n = traj.times.size
    xT, yT = float(traj.x[-1]), float(traj.y[-1])
    l1T, l2T, _ = _terminal_costates(params, xT, yT)

    bx = np.empty(n)
    by = np.empty(n)
    lam1 = np.empty(n)
    lam2 = np.empty(n)
    xs, ys, l1, l2 = xT, yT, l1T, l2T
    for seg in reversed(traj.segments):
        m = seg.i1 - seg.i0
        if m <= 0:
            continue
        _kernels.adjoint_rk4_fill(
            xs, ys, l1, l2, params.gamma, seg.sigma, seg.b - seg.a, m,
            bx[seg.i0:seg.i1 + 1], by[seg.i0:seg.i1 + 1],
            lam1[seg.i0:seg.i1 + 1], lam2[seg.i0:seg.i1 + 1],
        )
        xs, ys = float(bx[seg.i0]), float(by[seg.i0])
        l1, l2 = float(lam1[seg.i0]), float(lam2[seg.i0])

    retrace = float(np.max(np.abs(bx - traj.x)) + np.max(np.abs(by - traj.y)))

    phi_free = params.kappa + params.gamma * bx * by * (lam2 - lam1)

    t1, t2, T, tau = schedule.t1, min(schedule.t2, params.T), params.T, params.tau
    if tau - schedule.eta > _TIME_TOL:
        beta = 0.0
    else:
        if t2 < T - _TIME_TOL:
            t_pin = t2
        elif t1 > _TIME_TOL:
            t_pin = t1
        else:
            t_pin = T
        beta = max(0.0, -float(phi_free[traj.index_at(t_pin)]))

    phi = phi_free + beta
    hamiltonian = traj.sigma * phi - params.gamma * lam2 * by
    joints = []
    for seg in traj.segments:
        if seg.i0 not in joints:
            joints.append(seg.i0)
        joints.append(seg.i1)
    slices = tuple((seg.i0, seg.i1) for seg in traj.segments)
    return AdjointPath(traj.times, bx, by, lam1, lam2, phi, traj.sigma, beta,
                       hamiltonian, tuple(joints), slices, retrace)


@dataclass(frozen=True)
class PMPReport:
    """Necessary-conditions verdict for one window.

    passed requires: no sign contradictions outside the dead band, phi sign
    changes not exceeding the interior switch count, normalized Hamiltonian
    drift within HAMILTONIAN_TOL, complementarity residual within
    COMPLEMENTARITY_TOL, and at most two singular (dead-band) runs.
    multiplier_sensitive flags that the verdict flips under alternative
    admissible choices of the budget multiplier.
    """

    passed: bool
    contradictions: int
    contradiction_fraction: float
    sign_changes: int
    interior_switches: int
    hamiltonian_deviation: float
    complementarity_residual: float
    singular_cells: int
    degenerate_segments: tuple[int, ...]
    multiplier_sensitive: bool
    lambda3: float
    details: dict


def _evaluate_candidate(params: ModelParams, path: AdjointPath,
                        phi: np.ndarray) -> dict:
    scale = float(np.max(np.abs(phi)))
    band = PHI_BAND_FACTOR * scale
    n = path.times.size
    excluded = np.zeros(n, dtype=bool)
    excluded[list(path.joint_indices)] = True

    degenerate = []
    for k, (i0, i1) in enumerate(path.segment_slices):
        if i1 - i0 < 2:
            continue
        interior = slice(i0 + 1, i1)
        if float(np.max(np.abs(phi[interior]))) <= DEGENERATE_FACTOR * scale:
            excluded[interior] = True
            degenerate.append(k)

    keep = ~excluded
    sig = path.sigma[keep]
    ph = phi[keep]
    mild = sig == params.sigma2
    strict = sig == params.sigma1
    contradictions = int(np.count_nonzero(mild & (ph < -band))
                         + np.count_nonzero(strict & (ph > band)))
    fraction = contradictions / max(ph.size, 1)

    signs = np.where(ph > band, 1, np.where(ph < -band, -1, 0))
    strict_signs = signs[signs != 0]
    sign_changes = int(np.count_nonzero(np.diff(strict_signs) != 0))

    in_band = signs == 0
    singular_cells = int(np.count_nonzero(np.diff(in_band.astype(int)) == 1)
                         + (1 if in_band.size and in_band[0] else 0))

    # Hamiltonian drift is measured on every non-jump sample; degenerate
    # segments carry no sign information but H must still hold there.
    keep_h = np.ones(n, dtype=bool)
    keep_h[list(path.joint_indices)] = False
    ham = path.sigma * phi - params.gamma * path.lambda2 * path.y
    hk = ham[keep_h]
    h_scale = float(np.max(path.sigma * np.abs(phi)
                           + params.gamma * np.abs(path.lambda2) * path.y))
    h_dev = float(np.max(np.abs(hk - np.median(hk))) / h_scale) if h_scale > 0.0 else 0.0

    return {
        "contradictions": contradictions,
        "contradiction_fraction": fraction,
        "sign_changes": sign_changes,
        "singular_cells": singular_cells,
        "hamiltonian_deviation": h_dev,
        "degenerate_segments": tuple(degenerate),
        "band": band,
        "phi_scale": scale,
    }


def verify_necessary_conditions(params: ModelParams, initial: EpidemicState,
                                schedule: Schedule,
                                *, step_hint: float | None = None) -> PMPReport:
    """Check a candidate window against the maximum-principle conditions.

    The switching-function sign rule, its sign-change count against the
    interior switch count, Hamiltonian constancy, and complementarity of
    the budget multiplier are all evaluated on the dense sample grid (jump
    samples excluded, sign-degenerate segments excluded and reported).  The
    multiplier enters phi only as an additive constant, so the admissible
    alternatives (zero, pinned at a switch, pinned at the horizon) are
    scored as well; disagreement on the verdict is flagged rather than
    hidden.
    """
    schedule.validate(params)
    path = integrate_adjoint(params, initial, schedule, step_hint=step_hint)
    phi_free = path.phi - path.lambda3

    interior = 0
    t1, t2 = schedule.t1, min(schedule.t2, params.T)
    if schedule.eta > _TIME_TOL:
        if t1 > _TIME_TOL:
            interior += 1
        if t2 < params.T - _TIME_TOL:
            interior += 1

    candidates = {"constructed": path.lambda3}
    if params.tau - schedule.eta <= _TIME_TOL:
        candidates["zero"] = 0.0
        iT = path.times.size - 1
        candidates["horizon"] = max(0.0, -float(phi_free[iT]))

    scored = {}
    for name, mult in candidates.items():
        scored[name] = _evaluate_candidate(params, path, phi_free + mult)

    primary = scored["constructed"]
    comp_resid = abs(path.lambda3 * (params.sigma2 - params.sigma1)
                     * (params.tau - schedule.eta))

    def verdict(m: dict) -> bool:
        return (m["contradictions"] == 0
                and m["sign_changes"] <= interior
                and m["hamiltonian_deviation"] <= HAMILTONIAN_TOL
                and m["singular_cells"] <= 2)

    passed = verdict(primary) and comp_resid <= COMPLEMENTARITY_TOL
    sensitive = len({verdict(m) for m in scored.values()}) > 1

    details = {name: dict(m) for name, m in scored.items()}
    details["lambda3_candidates"] = {n: float(b) for n, b in candidates.items()}
    details["state_retrace_error"] = path.state_retrace_error

    return PMPReport(
        passed=passed,
        contradictions=primary["contradictions"],
        contradiction_fraction=primary["contradiction_fraction"],
        sign_changes=primary["sign_changes"],
        interior_switches=interior,
        hamiltonian_deviation=primary["hamiltonian_deviation"],
        complementarity_residual=comp_resid,
        singular_cells=primary["singular_cells"],
        degenerate_segments=primary["degenerate_segments"],
        multiplier_sensitive=sensitive,
        lambda3=path.lambda3,
        details=details,
    )
