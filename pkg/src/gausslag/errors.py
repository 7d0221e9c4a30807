"""Exception types shared across the library."""


class SpectrumViolation(ValueError):
    """An integral operator's spectrum touches or exceeds 1.

    The market transforms and the windowed Fredholm solves are only defined
    for symmetric kernels whose operator spectrum stays strictly below 1;
    this error reports the offending spectral bound when available.
    """

    def __init__(self, message: str, spectral_bound: float | None = None):
        super().__init__(message)
        self.spectral_bound = spectral_bound


class ConditioningError(ArithmeticError):
    """A matrix that must be positive definite failed factorization."""

    def __init__(self, message: str, smallest_eigenvalue: float | None = None):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


class InvalidPerturbation(ValueError):
    """A strategy perturbation is not adapted to the delayed information flow."""
