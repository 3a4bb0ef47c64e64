"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class DecoyAnonError(Exception):
    exit_code = 1


class ValidationError(DecoyAnonError, ValueError):
    """Malformed input: bad schema, bad value, bad parameter."""

    exit_code = 2


class InfeasibleError(DecoyAnonError):
    """No lattice node satisfies k within the suppression limit."""

    exit_code = 2


class CapacityError(DecoyAnonError):
    """Not enough decoy or removable classes for the requested recipients."""

    exit_code = 3


class BudgetError(CapacityError):
    """Hardening would exceed the removal budget."""
