"""Exception types raised across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """A parameter or configuration value is out of its admissible range."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class ParseError(ValueError):
    """A configuration file line could not be parsed."""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class BracketFailure(RuntimeError):
    """No sign change was found while expanding a root bracket."""


class NonConvergence(RuntimeError):
    """An iterative solver hit its iteration cap.

    ``last_iterate`` and ``trace`` carry whatever the solver had when it gave up.
    """

    def __init__(self, message: str, last_iterate=None, trace=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.trace = trace if trace is not None else []


class BoundaryArgmax(RuntimeError):
    """A grid-search maximizer kept landing on the upper edge of its window."""


class NonFiniteIntegrand(ValueError):
    """A quadrature integrand returned NaN or inf on an unmasked node."""


class PropositionWarning(UserWarning):
    """Parameters fall outside the region where the effort comparative statics are signed."""
