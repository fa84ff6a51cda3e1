"""Exception hierarchy shared across the toolkit.

Every error raised by library code derives from ContestError so callers
(and the CLI) can distinguish domain failures from programming bugs.
"""


class ContestError(Exception):
    """Base class for all toolkit errors."""


class SpecValidationError(ContestError):
    """A density/contest/intervention spec violates its invariants."""


class DomainBoundsError(ContestError):
    """An argument lies outside the mathematical domain of an operation."""


class InfiniteMeanError(ContestError):
    """The requested expectation diverges (e.g. Pareto shape <= 1)."""


class NonUniqueThresholdError(ContestError):
    """The combined support has a gap straddling the target level.

    Carries the flat interval so callers can report it.
    """

    def __init__(self, gap_lo: float, gap_hi: float, level: float):
        self.gap_lo = gap_lo
        self.gap_hi = gap_hi
        self.level = level
        super().__init__(
            f"selection level {level:g} is attained on the whole gap "
            f"[{gap_lo:g}, {gap_hi:g}]; the threshold is not unique"
        )


class FiniteShiftPreconditionError(ContestError):
    """n is too small for the finite-population shift to be defined."""

    def __init__(self, n: int, n_min: int):
        self.n = n
        self.n_min = n_min
        super().__init__(f"n={n} is below the minimum population size n_t={n_min}")


class DegenerateMetricError(ContestError):
    """A metric ratio is undefined because one group selects nobody."""


class InfeasibleTargetError(ContestError):
    """No intervention within bounds reaches the fairness target."""

    def __init__(self, tau: float, max_achievable: float):
        self.tau = tau
        self.max_achievable = max_achievable
        super().__init__(
            f"target ratio {tau:g} unreachable; maximum achievable is "
            f"{max_achievable:g}"
        )


class CalibrationRangeError(ContestError):
    """The implied bias parameter falls outside (0, 1]."""

    def __init__(self, rho: float):
        self.rho = rho
        super().__init__(f"calibrated bias parameter {rho:g} is outside (0, 1]")


class UnsupportedConfigurationError(ContestError):
    """The operation is only defined for a restricted configuration."""
