"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the mathematical domain (bad state, schedule, or parameters)."""


class IntegrationError(RuntimeError):
    """The integrator produced a non-finite or non-physical state."""


class TheoremInapplicableError(RuntimeError):
    """The closed-form planner's hypotheses do not hold for these parameters.

    Raised when the sign of dJ/deta is mixed over the admissible region, so
    neither the four-case characterization nor the large-cost shortcut applies.
    Use the brute-force oracle (grid_search + refine) instead, or call
    plan(..., fallback=True) to do that automatically.
    """
