"""Exception hierarchy shared across the package."""


class DataError(ValueError):
    """Invalid or unusable input data."""


class DegenerateDataError(DataError):
    """Valid data that cannot support the requested fit (empty arm, single label, ...)."""


class DomainError(ValueError):
    """A linear index fell outside the link function's domain."""

    def __init__(self, row: int, value: float, link: str = "exponential"):
        self.row = row
        self.value = value
        super().__init__(f"{link} link index out of domain [0, inf) at row {row}: {value!r}")


class NumericalError(RuntimeError):
    """Solver failure (divergence, or non-convergence under strict mode)."""
