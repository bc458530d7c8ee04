"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: input problems exit 2,
degenerate statistics exit 3.
"""


class CcievalError(Exception):
    """Base class for all errors raised by this package."""


class DataValidationError(CcievalError, ValueError):
    """Invalid input data (bad file, broken invariant, mismatched join).

    Carries optional location info so the CLI can print a usable diagnostic.
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:" if line is None else f"{path}:{line}:"
            prefix += " "
        super().__init__(prefix + message)


class GranularityMismatchError(DataValidationError):
    """File-level and condition-level tables were mixed in one join."""


class DegenerateStatisticError(CcievalError, ValueError):
    """A statistic is undefined for this input (zero variance, all ties)."""


class EmptyConstrainedSetError(DegenerateStatisticError):
    """No stimulus pair has a statistically distinguishable MOS difference."""
