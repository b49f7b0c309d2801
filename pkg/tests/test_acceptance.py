"""End-to-end acceptance checks with pinned reference values.

Each test reproduces a published benchmark number or a cross-validation
gate on the three benchmark configurations.  Tolerances are fixed here
and never widened to make a run pass; a genuine disagreement with a
pinned value is reported as a failure with the measured number.
"""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np
import pytest

from sirquarantine import (
    Schedule,
    conserved_residual,
    grid_search,
    integrate,
    objective,
    plan,
    plan_corollary_sigma1_zero,
    refine,
    regime_boundaries,
    verify_necessary_conditions,
)

from conftest import (
    COSTED,
    COSTED_TAUS,
    INITIAL,
    LEAKY,
    LEAKY_TAUS,
    STRICT,
    STRICT_TAUS,
)


def brute_force(params, n_t1=200, n_eta=60):
    coarse = grid_search(params, INITIAL, n_t1=n_t1, n_eta=n_eta)
    spacing = max(params.T / (n_t1 - 1), params.tau / (n_eta - 1))
    sched = refine(params, INITIAL, coarse.schedule, spacing, step_floor=1e-6)
    return sched, objective(params, INITIAL, sched)


def acceptance_windows(strict_plans, leaky_plans, costed_regime):
    """The fifteen planned optima every trajectory-level gate runs on."""
    out = []
    for tau in STRICT_TAUS:
        out.append((replace(STRICT, tau=tau), strict_plans[tau].schedule))
    for tau in LEAKY_TAUS:
        out.append((replace(LEAKY, tau=tau), leaky_plans[tau].schedule))
    for row in costed_regime.rows:
        out.append((replace(COSTED, tau=row.tau), Schedule(row.t_start, row.eta)))
    return out


class TestBenchmarkSweeps:
    def test_strict_sweep_boundaries_and_times(self):
        taus = [float(t) for t in np.linspace(20.0, 300.0, 40)]
        start = time.perf_counter()
        table = regime_boundaries(STRICT, INITIAL, taus)
        elapsed = time.perf_counter() - start
        assert elapsed < 30.0
        assert table.tau_bar == pytest.approx(72.9, abs=0.5)
        assert table.tau_tilde == pytest.approx(212.2, abs=0.5)
        by_case = {2: [], 4: []}
        for row in table.rows:
            if row.case_id in by_case:
                by_case[row.case_id].append(row.t_start)
        assert by_case[2] and by_case[4]
        for t in by_case[2]:
            assert t == pytest.approx(2527.1, abs=0.5)
        for t in by_case[4]:
            assert t == pytest.approx(2387.8, abs=0.5)

    def test_leaky_sweep_boundaries_and_times(self):
        table = regime_boundaries(
            LEAKY, INITIAL, [20.0, 60.0, 100.0, 160.0, 200.0, 240.0, 300.0])
        assert table.tau_bar == pytest.approx(80.1, abs=0.5)
        assert table.tau_tilde == pytest.approx(238.7, abs=0.5)
        starts = {row.tau: row.t_start for row in table.rows}
        assert starts[20.0] == pytest.approx(2525.1, abs=0.5)
        assert starts[160.0] == pytest.approx(2440.0, abs=0.5)
        assert starts[300.0] == pytest.approx(2361.3, abs=0.5)
        for row in table.rows:
            if row.case_id == 4:
                assert row.t_start == pytest.approx(2361.3, abs=0.5)

    def test_costed_sweep_boundaries_and_times(self, costed_regime):
        failures = []

        def check(label, got, want, tol=0.5):
            if got != pytest.approx(want, abs=tol):
                failures.append(f"{label}: expected {want} +/- {tol}, got {got:.4f}")

        check("tau_bar", costed_regime.tau_bar, 96.5)
        check("tau_tilde", costed_regime.tau_tilde, 285.4)
        starts = {row.tau: row.t_start for row in costed_regime.rows}
        check("t_start at tau=50", starts[50.0], 3103.5)
        check("t_start at tau=180", starts[180.0], 3020.0)
        check("t_start at tau=340", starts[340.0], 2914.6)
        if failures:
            pytest.fail(
                "pinned-value mismatches:\n  " + "\n  ".join(failures) + "\n"
                "the tau=50 reference start time is not reproducible: the "
                "planner and an independent grid search with pattern "
                "refinement independently place that optimum at 3104.80, "
                "1.30 outside the pinned 3103.5 +/- 0.5, while every other "
                "value in this sweep reproduces.  The pin is left as is; "
                "see README.md, section \"Known acceptance deviation\"."
            )


class TestPlannerAgainstBruteForce:
    def test_strict_windows(self, strict_plans):
        for tau in STRICT_TAUS:
            sched, J = brute_force(replace(STRICT, tau=tau))
            res = strict_plans[tau]
            assert abs(res.objective - J) <= 1e-8
            assert res.schedule.t1 == pytest.approx(sched.t1, abs=0.05)
            assert res.schedule.eta == pytest.approx(sched.eta, abs=0.05)

    def test_leaky_windows(self, leaky_plans):
        for tau in LEAKY_TAUS:
            sched, J = brute_force(replace(LEAKY, tau=tau))
            res = leaky_plans[tau]
            assert abs(res.objective - J) <= 1e-8
            assert res.schedule.t1 == pytest.approx(sched.t1, abs=0.05)
            assert res.schedule.eta == pytest.approx(sched.eta, abs=0.05)

    def test_costed_windows(self, costed_regime):
        for row in costed_regime.rows:
            sched, J = brute_force(replace(COSTED, tau=row.tau))
            assert abs(row.objective - J) <= 1e-8
            assert row.t_start == pytest.approx(sched.t1, abs=0.05)
            assert row.eta == pytest.approx(sched.eta, abs=0.05)


class TestGradientGate:
    def test_analytic_gradients_match_finite_differences(self):
        from sirquarantine.switching import dJ_deta, dJ_dt1

        rng = np.random.default_rng(20260818)
        h = 1e-2
        for params in (STRICT, LEAKY, COSTED):
            for _ in range(20):
                eta = float(rng.uniform(0.1, 0.9)) * params.tau
                t1 = float(rng.uniform(0.1, 0.85)) * (params.T - eta - 2 * h)
                a_t1 = dJ_dt1(params, INITIAL, Schedule(t1, eta))
                a_eta = dJ_deta(params, INITIAL, Schedule(t1, eta))
                f_t1 = (objective(params, INITIAL, Schedule(t1 + h, eta))
                        - objective(params, INITIAL, Schedule(t1 - h, eta))) / (2 * h)
                f_eta = (objective(params, INITIAL, Schedule(t1, eta + h))
                         - objective(params, INITIAL, Schedule(t1, eta - h))) / (2 * h)
                assert abs(a_t1 - f_t1) <= 1e-4 * max(abs(a_t1), abs(f_t1))
                assert abs(a_eta - f_eta) <= 1e-4 * max(abs(a_eta), abs(f_eta))


class TestTrajectoryGates:
    def test_conservation_on_every_planned_window(self, strict_plans,
                                                   leaky_plans, costed_regime):
        for params, sched in acceptance_windows(strict_plans, leaky_plans,
                                                costed_regime):
            traj = integrate(params, INITIAL, sched)
            for k in range(len(traj.segments)):
                assert conserved_residual(traj, k) <= 1e-9

    def test_necessary_conditions_at_every_planned_window(
            self, strict_plans, leaky_plans, costed_regime):
        for params, sched in acceptance_windows(strict_plans, leaky_plans,
                                                costed_regime):
            rep = verify_necessary_conditions(params, INITIAL, sched)
            assert rep.contradictions == 0, (params.tau, params.kappa)
            assert rep.sign_changes <= 2
            assert rep.hamiltonian_deviation <= 1e-5
            assert rep.passed


class TestFastPathGate:
    def test_corollary_tracks_planner_across_budgets(self):
        t_bar = None
        for tau in np.linspace(30.0, 290.0, 20):
            p = replace(STRICT, tau=float(tau))
            a = plan(p, INITIAL)
            b = plan_corollary_sigma1_zero(p, INITIAL)
            assert b.case_id == a.case_id
            assert abs(b.schedule.t1 - a.schedule.t1) <= 1e-3
            assert abs(b.schedule.eta - a.schedule.eta) <= 1e-3
            if a.case_id == 2 and t_bar is None:
                t_bar = b.schedule.t1
        assert t_bar is not None
        # the interior start sits where the uncontrolled run crosses the
        # herd-immunity threshold
        free = integrate(STRICT, INITIAL, Schedule(STRICT.T, 0.0))
        assert STRICT.sigma0 * free.state_at(t_bar).x == pytest.approx(1.0, abs=1e-6)


class TestHeavyCostGate:
    def test_planner_and_oracle_close_the_window(self, planned, costed_bounds):
        _, bmax = costed_bounds
        pk = replace(COSTED, kappa=10.0 * bmax)
        res = planned(pk)
        assert res.schedule.eta == 0.0
        assert res.case_id == "kappa-large"
        best = grid_search(pk, INITIAL, n_t1=100, n_eta=30).schedule
        assert best.eta == 0.0
