"""Exception types shared across the package."""


class OTConfError(Exception):
    """Base class for all otconf errors."""


class ValidationError(OTConfError, ValueError):
    """Invalid inputs: malformed files, broken invariants, violated preconditions.

    The CLI maps these to exit code 2.
    """


class NumericError(OTConfError, ArithmeticError):
    """Numerical failure at runtime (divergence, non-finite intermediates).

    The CLI maps these to exit code 1.
    """
