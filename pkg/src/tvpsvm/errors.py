"""Exception types raised across the package."""


class DomainError(ValueError):
    """A distribution or transform was called outside its parameter domain."""


class InputError(ValueError):
    """Malformed or insufficient input data."""


class ParseError(InputError):
    """A vintage file could not be parsed.

    ``row`` and ``col`` are 1-based positions in the raw file (the header is
    row 1) when known.
    """

    def __init__(self, message, row=None, col=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if col is not None:
            loc.append(f"col {col}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.col = col


class CoverageError(LookupError):
    """Requested date is not covered by the available vintages."""


class NumericalError(ArithmeticError):
    """Non-finite values or degenerate variances inside a numerical kernel."""


class StationarityError(NumericalError):
    """Rejection loop enforcing |phi| < 1 exceeded its cap."""


class DegenerateBenchmarkError(ZeroDivisionError):
    """Benchmark RMSE is zero, so a ratio cannot be formed."""


class MCMCError(RuntimeError):
    """An MCMC run was aborted after repeated numerical failures."""

    def __init__(self, message, iteration):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class ExerciseError(RuntimeError):
    """A forecast exercise cannot be aggregated (too many failed origins, no benchmark)."""
