"""Switch indicators, their identities, and the border derivative."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from sirquarantine import (
    DomainError,
    EpidemicState,
    Jtilde_derivative,
    ModelParams,
    Schedule,
    alpha_of,
    h_of,
    integrate,
    objective,
    switch_profile,
    w_of,
    z_of,
)
from sirquarantine.switching import (
    Jtilde_parts,
    SwitchIntegrals,
    dJ_deta,
    dJ_dt1,
    z_decreasing_window,
)

from conftest import COSTED, INITIAL, LEAKY, STRICT

# fast epidemic whose mild run crosses 1/sigma0 before the corner, so the
# z-monotonicity window is non-empty (a zero-transmission window freezes x
# and leaves it empty)
FAST_PARAMS = ModelParams(gamma=0.01, sigma0=3.0, sigma1=0.5, sigma2=3.0,
                          T=1500.0, tau=150.0)


class TestIntegrals:
    def test_reciprocal_infection_identity_per_segment(self):
        # (1/y)' = -gamma*(sigma*x - 1)/y, so on a constant-sigma stretch
        # 1/y(a) - 1/y(b) = gamma * I_sigma(a, b, sigma)
        for params, sched in [
            (STRICT, Schedule(800.0, 260.0)),
            (COSTED, Schedule(1500.0, 200.0)),
        ]:
            traj = integrate(params, INITIAL, sched)
            ints = SwitchIntegrals(traj)
            for seg in traj.segments:
                if seg.b <= seg.a:
                    continue
                ya, yb = float(traj.y[seg.i0]), float(traj.y[seg.i1])
                lhs = 1.0 / ya - 1.0 / yb
                rhs = params.gamma * ints.I_sigma(seg.a, seg.b, seg.sigma)
                assert lhs == pytest.approx(rhs, abs=1e-8 * max(1.0 / ya, 1.0 / yb))


class TestGradients:
    # schedules kept clear of gradient zero crossings so relative error
    # is meaningful
    PROBES = [
        (STRICT, 800.0, 130.0),
        (STRICT, 2000.0, 200.0),
        (LEAKY, 1000.0, 150.0),
        (LEAKY, 2100.0, 80.0),
        (COSTED, 1500.0, 200.0),
        (COSTED, 2600.0, 120.0),
    ]

    def test_matches_finite_differences(self):
        h = 1e-2
        for params, t1, eta in self.PROBES:
            sched = Schedule(t1, eta)
            a_t1 = dJ_dt1(params, INITIAL, sched)
            a_eta = dJ_deta(params, INITIAL, sched)
            f_t1 = (objective(params, INITIAL, Schedule(t1 + h, eta))
                    - objective(params, INITIAL, Schedule(t1 - h, eta))) / (2 * h)
            f_eta = (objective(params, INITIAL, Schedule(t1, eta + h))
                     - objective(params, INITIAL, Schedule(t1, eta - h))) / (2 * h)
            assert abs(a_t1 - f_t1) <= 1e-4 * max(abs(a_t1), abs(f_t1))
            assert abs(a_eta - f_eta) <= 1e-4 * max(abs(a_eta), abs(f_eta))

    def test_general_and_reduced_t1_forms_agree(self):
        for params in (STRICT, LEAKY):
            for t1, eta in [(300.0, 100.0), (1500.0, 200.0), (2200.0, 50.0)]:
                g = dJ_dt1(params, INITIAL, Schedule(t1, eta), form="general")
                r = dJ_dt1(params, INITIAL, Schedule(t1, eta), form="reduced")
                assert abs(g - r) <= 1e-8 * max(1.0, abs(g))

    def test_reduced_form_needs_matching_rates(self):
        with pytest.raises(DomainError, match="reduced"):
            dJ_dt1(COSTED, INITIAL, Schedule(1500.0, 200.0), form="reduced")
        with pytest.raises(DomainError, match="form"):
            dJ_dt1(STRICT, INITIAL, Schedule(1500.0, 200.0), form="exotic")
        with pytest.raises(DomainError, match="form"):
            dJ_deta(STRICT, INITIAL, Schedule(1500.0, 200.0), form=3)

    def test_eta_forms_agree(self):
        for params in (STRICT, COSTED):
            for t1, eta in [(400.0, 120.0), (1800.0, 250.0)]:
                v1 = dJ_deta(params, INITIAL, Schedule(t1, eta), form=1)
                v2 = dJ_deta(params, INITIAL, Schedule(t1, eta), form=2)
                assert abs(v1 - v2) <= 1e-8 * max(1.0, abs(v1))

    def test_eta_gradient_positive_without_cost(self):
        # kappa = 0 with sigma2 = sigma0: lengthening the window always helps
        vals = [dJ_deta(STRICT, INITIAL, Schedule(t1, eta))
                for t1 in (300.0, 1500.0, 2300.0) for eta in (30.0, 130.0, 250.0)]
        assert all(v > 0.0 for v in vals)

    def test_eta_gradient_negative_above_cost_ceiling(self, costed_bounds):
        _, bmax = costed_bounds
        pk = replace(COSTED, kappa=2.0 * bmax)
        vals = [dJ_deta(pk, INITIAL, Schedule(t1, eta))
                for t1 in (300.0, 1500.0, 2800.0) for eta in (30.0, 170.0, 310.0)]
        assert all(v < 0.0 for v in vals)


class TestIndicators:
    def test_w_closed_form_under_full_shutdown(self):
        # sigma1 = 0 freezes x in the window, giving
        # w = y2*(sigma0*x(t) - 1)*(e^{gamma tau} - 1) / (gamma yT y(t))
        p = STRICT
        g, s0, tau, T = p.gamma, p.sigma0, p.tau, p.T
        rows = []
        for t in np.linspace(0.0, T - tau, 25):
            t = float(t)
            traj = integrate(p, INITIAL, Schedule(t, tau))
            st = traj.state_at(t)
            s2 = traj.state_at(t + tau)
            yT = float(traj.y[-1])
            closed = (s2.y * (s0 * st.x - 1.0) / (g * yT * st.y)
                      * (math.exp(g * tau) - 1.0))
            rows.append((t, w_of(p, INITIAL, t), closed))
        scale = max(abs(c) for _, _, c in rows)
        for t, w, closed in rows:
            # the general evaluation cancels catastrophically where y is
            # tiny, so the sharp bound is scale-relative
            assert abs(w - closed) <= 2e-4 * scale
            if 1500.0 <= t <= 2300.0:
                assert w == pytest.approx(closed, rel=1e-6)

    def test_w_reduces_when_rates_match(self):
        # sigma2 = sigma0 collapses w to (y2/yT) * I_sigma0(t, t2)
        p = LEAKY
        rows = []
        for t in np.linspace(0.0, p.T - p.tau, 24):
            t = float(t)
            t2 = t + p.tau
            traj = integrate(p, INITIAL, Schedule(t, p.tau))
            ints = SwitchIntegrals(traj)
            y2 = traj.state_at(t2).y
            yT = float(traj.y[-1])
            reduced = (y2 / yT) * ints.I_sigma(t, t2, p.sigma0)
            rows.append((t, w_of(p, INITIAL, t), reduced))
        scale = max(abs(r) for _, _, r in rows)
        for t, w, reduced in rows:
            assert abs(w - reduced) <= 2e-4 * scale
            if 1500.0 <= t <= 2300.0:
                assert w == pytest.approx(reduced, rel=1e-6)

    def test_w_sign_tracks_mild_run_threshold(self):
        # before the corner, sign(w) = sign(sigma0 * x_free(t) - 1)
        p = replace(STRICT, tau=60.0)
        free = integrate(p, INITIAL, Schedule(p.T, 0.0))
        for t in np.linspace(0.0, p.T - p.tau, 14):
            t = float(t)
            gap = p.sigma0 * free.state_at(t).x - 1.0
            if abs(gap) < 1e-3:
                continue
            assert math.copysign(1.0, w_of(p, INITIAL, t)) == math.copysign(1.0, gap)

    def test_w_nonpositive_below_threshold_start(self):
        p = STRICT
        low = EpidemicState(0.6, 1e-3)
        for t in (0.0, 500.0, 1500.0, 2340.0):
            assert w_of(p, low, t) <= 0.0

    def test_w_matches_alpha_near_spend_boundary(self):
        # at the budget level where full spend stops paying, w at the corner
        # sits on the kappa = 0 threshold 1/(gamma y)
        p = replace(STRICT, tau=212.2)
        corner = p.T - p.tau
        wc = w_of(p, INITIAL, corner)
        yc = integrate(p, INITIAL, Schedule(corner, p.tau)).state_at(corner).y
        assert wc * p.gamma * yc == pytest.approx(1.0, abs=1e-2)

    def test_alpha_inverts_infection_without_cost(self):
        p = STRICT
        for t in (2400.0, 2500.0, 2580.0):
            yt = integrate(p, INITIAL, Schedule(t, p.T - t)).state_at(t).y
            assert alpha_of(p, INITIAL, t) * p.gamma * yt == pytest.approx(1.0, abs=1e-10)

    def test_alpha_negative_under_heavy_cost(self):
        pk = replace(COSTED, kappa=1e3)
        assert alpha_of(pk, INITIAL, 3000.0) < 0.0

    def test_h_positive_decreasing_and_zero_at_horizon(self):
        p = STRICT
        ts = np.linspace(p.T - p.tau, p.T, 9)
        vals = [h_of(p, INITIAL, float(t)) for t in ts]
        assert all(v > 0.0 for v in vals[:-1])
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert h_of(p, INITIAL, p.T) == 0.0

    def test_h_w_alpha_tied_on_truncated_stretch(self):
        # gamma*yT*(w - 1/(gamma*y)) = gamma*(sigma0 - sigma1)*h - 1
        p = STRICT
        for t in np.linspace(p.T - p.tau + 1.0, p.T - 1.0, 9):
            t = float(t)
            traj = integrate(p, INITIAL, Schedule(t, p.T - t))
            yt = traj.state_at(t).y
            yT = float(traj.y[-1])
            lhs = p.gamma * yT * (w_of(p, INITIAL, t) - 1.0 / (p.gamma * yt))
            rhs = p.gamma * (p.sigma0 - p.sigma1) * h_of(p, INITIAL, t) - 1.0
            assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-12)

    def test_z_negative_below_threshold(self):
        low = EpidemicState(0.6, 1e-3)
        for t in (0.0, 800.0, 2000.0):
            assert z_of(STRICT, low, t) < 0.0

    def test_z_decreasing_on_reported_window(self):
        a, b = z_decreasing_window(FAST_PARAMS, INITIAL)
        assert b > a
        zs = [z_of(FAST_PARAMS, INITIAL, float(t))
              for t in np.linspace(a + 0.1, b - 0.1, 7)]
        assert all(v2 < v1 for v1, v2 in zip(zs, zs[1:]))

    def test_z_window_empty_when_x_frozen(self):
        # sigma1 = 0 makes both window-edge crossings coincide
        a, b = z_decreasing_window(STRICT, INITIAL)
        assert a == b

    def test_z_closed_form_under_full_shutdown(self):
        # sigma1 = 0: z = (sigma0*x(t) - 1)*(e^{gamma tau} - 1)/(gamma*y(t))
        for tau in (0.25, 260.0):
            p = replace(STRICT, tau=tau)
            for t in (0.0, 500.0, 1200.0, 2000.0):
                traj = integrate(p, INITIAL, Schedule(t, tau))
                st = traj.state_at(t)
                closed = ((p.sigma0 * st.x - 1.0)
                          * (math.exp(p.gamma * tau) - 1.0) / (p.gamma * st.y))
                assert z_of(p, INITIAL, t) == pytest.approx(closed, rel=1e-5)

    def test_z_scales_linearly_in_small_budgets(self):
        r = (z_of(replace(STRICT, tau=0.5), INITIAL, 1200.0)
             / z_of(replace(STRICT, tau=0.25), INITIAL, 1200.0))
        want = (math.exp(0.01 * 0.5) - 1.0) / (math.exp(0.01 * 0.25) - 1.0)
        assert r == pytest.approx(want, rel=1e-6)

    def test_domain_limits(self):
        p = STRICT
        with pytest.raises(DomainError):
            w_of(p, INITIAL, -1.0)
        with pytest.raises(DomainError):
            w_of(p, INITIAL, p.T + 1.0)
        with pytest.raises(DomainError):
            alpha_of(p, INITIAL, p.T - p.tau - 1.0)
        with pytest.raises(DomainError):
            h_of(p, INITIAL, 100.0)
        with pytest.raises(DomainError):
            z_of(p, INITIAL, p.T - p.tau + 1.0)


class TestProfile:
    def test_branches_join_at_corner(self):
        p = replace(STRICT, tau=60.0)
        prof = switch_profile(p, INITIAL, n=81)
        scale = np.max(np.abs(prof.w))
        assert prof.joint_mismatch <= 1e-12 * scale

    def test_masks_respect_branch_domains(self):
        p = replace(STRICT, tau=60.0)
        prof = switch_profile(p, INITIAL, n=81)
        corner = p.T - p.tau
        before = prof.t < corner - 1e-9
        after = prof.t > corner + 1e-9
        assert np.all(np.isnan(prof.alpha[before]))
        assert np.all(np.isnan(prof.h[before]))
        assert np.all(np.isnan(prof.z[after]))
        assert np.all(np.isfinite(prof.w))
        at_corner = np.isclose(prof.t, corner)
        assert np.all(np.isfinite(prof.alpha[~before]))
        assert at_corner.any() and np.isfinite(prof.z[at_corner]).all()

    def test_profile_agrees_with_pointwise_w(self):
        p = replace(STRICT, tau=60.0)
        prof = switch_profile(p, INITIAL, n=41)
        scale = np.max(np.abs(prof.w))
        for i in (0, 20, 40):
            t = float(prof.t[i])
            assert abs(prof.w[i] - w_of(p, INITIAL, t)) <= 1e-12 * scale

    def test_w_changes_sign_once_before_corner(self):
        p = replace(STRICT, tau=60.0)
        prof = switch_profile(p, INITIAL, n=161)
        corner = p.T - p.tau
        w = prof.w[prof.t <= corner + 1e-9]
        live = w[np.abs(w) > 1e-9 * np.max(np.abs(w))]
        changes = int(np.count_nonzero(np.diff(np.sign(live)) != 0))
        assert changes == 1

    def test_too_few_points_rejected(self):
        with pytest.raises(DomainError):
            switch_profile(STRICT, INITIAL, n=1)


class TestBorderDerivative:
    def test_factored_parts_consistent(self):
        p = LEAKY
        for t in (500.0, 2000.0, 2450.0):
            parts = Jtilde_parts(p, INITIAL, t)
            assert parts.prefactor > 0.0
            assert parts.value == parts.prefactor * parts.sign_carrier
            assert Jtilde_derivative(p, INITIAL, t) == parts.value

    def test_sign_flips_across_interior_optimum(self, strict_plans):
        p = replace(STRICT, tau=60.0)
        t_star = strict_plans[60.0].schedule.t1
        left = Jtilde_derivative(p, INITIAL, t_star - 20.0)
        right = Jtilde_derivative(p, INITIAL, t_star + 20.0)
        at = Jtilde_derivative(p, INITIAL, t_star)
        assert left > 0.0 > right
        assert abs(at) < min(abs(left), abs(right))

    def test_outside_horizon_rejected(self):
        with pytest.raises(DomainError):
            Jtilde_derivative(STRICT, INITIAL, STRICT.T + 2.0)
