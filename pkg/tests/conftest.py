"""Shared fixtures and the three benchmark configurations.

The planner and the Pontryagin verifier are exercised repeatedly on the
same optima across modules, so plans are memoized per parameter set for
the whole session.  A warm-up fixture triggers JIT compilation before any
timed assertion runs.
"""

from __future__ import annotations

from dataclasses import replace

import pytest

from sirquarantine import (
    EpidemicState,
    ModelParams,
    Schedule,
    grid_search,
    objective,
    plan,
    regime_boundaries,
    verify_necessary_conditions,
    w_of,
)
from sirquarantine.planner import kappa_bound_range

STRICT = ModelParams(gamma=0.01, sigma0=1.5, sigma1=0.0, sigma2=1.5,
                     T=2600.0, tau=260.0)
LEAKY = ModelParams(gamma=0.01, sigma0=1.5, sigma1=0.3, sigma2=1.5,
                    T=2600.0, tau=300.0)
COSTED = ModelParams(gamma=0.01, sigma0=2.2, sigma1=0.3, sigma2=1.5,
                     T=3200.0, tau=340.0, kappa=1e-5)
INITIAL = EpidemicState(x=1.0 - 1e-6, y=1e-6)

# budget values shared between the brute-force comparison, the conservation
# sweep, and the optimality-condition sweep
STRICT_TAUS = (40.0, 60.0, 150.0, 250.0, 300.0)
LEAKY_TAUS = (20.0, 80.0, 160.0, 240.0, 300.0)
COSTED_TAUS = (50.0, 90.0, 180.0, 250.0, 340.0)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Compile every JIT kernel on a tiny problem before tests run."""
    p = ModelParams(gamma=0.1, sigma0=1.5, sigma1=0.0, sigma2=1.5,
                    T=50.0, tau=10.0)
    objective(p, INITIAL, Schedule(10.0, 5.0))
    w_of(p, INITIAL, 10.0)
    grid_search(p, INITIAL, n_t1=2, n_eta=2)
    verify_necessary_conditions(p, INITIAL, Schedule(10.0, 5.0))
    kappa_bound_range(p, INITIAL, n_t1=4, n_eta=4)


@pytest.fixture(scope="session")
def planned():
    """plan() memoized on (params, initial); frozen dataclasses hash."""
    cache = {}

    def run(params: ModelParams, initial: EpidemicState = INITIAL):
        key = (params, initial)
        if key not in cache:
            cache[key] = plan(params, initial)
        return cache[key]

    return run


@pytest.fixture(scope="session")
def strict_plans(planned):
    return {tau: planned(replace(STRICT, tau=tau)) for tau in STRICT_TAUS}


@pytest.fixture(scope="session")
def leaky_plans(planned):
    return {tau: planned(replace(LEAKY, tau=tau)) for tau in LEAKY_TAUS}


@pytest.fixture(scope="session")
def costed_regime():
    """Budget sweep for the cost-bearing configuration.

    Every row goes through the brute-force fallback, which dominates the
    suite's runtime, so the sweep is computed once and shared.
    """
    return regime_boundaries(COSTED, INITIAL, list(COSTED_TAUS))


@pytest.fixture(scope="session")
def costed_bounds():
    """(bound_min, bound_max) of the window-cost threshold for COSTED."""
    return kappa_bound_range(COSTED, INITIAL)
