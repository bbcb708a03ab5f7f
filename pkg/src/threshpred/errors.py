"""Exception hierarchy shared across the package.

Every error carries a ``category`` used by the command-line tool to map
failures onto process exit codes: ``config`` -> 2, ``data`` -> 3,
``numerical`` -> 4, ``missing-critical-values`` -> 5.
"""


class ThreshpredError(Exception):
    """Base class for all package errors."""

    category = "numerical"
    exit_code = 4


class ConfigError(ThreshpredError):
    category = "config"
    exit_code = 2


class DataError(ThreshpredError):
    category = "data"
    exit_code = 3


class NumericalError(ThreshpredError):
    category = "numerical"
    exit_code = 4


# -- configuration ----------------------------------------------------------

class InvalidConfig(ConfigError):
    """A parameter value violates its documented domain."""


# -- data / input -----------------------------------------------------------

class InvalidSampleSize(DataError):
    """Sample too short for the requested operation."""


class DimensionMismatch(DataError):
    """Array shapes are inconsistent with the declared dimensions."""


class DegenerateThresholdVariable(DataError):
    """Threshold variable has too little variation to form a candidate grid."""


class MissingExogenousDraws(DataError):
    """Operation requires the stored exogenous coefficient shocks."""


class MissingColumn(DataError):
    """A mapped column name is absent from the file header."""


class TooFewRows(DataError):
    """Dataset has fewer usable rows than the documented minimum."""


class ParseError(DataError):
    """A cell failed numeric parsing. Carries 1-based row and column name."""

    def __init__(self, row: int, col: str, message: str = ""):
        self.row = row
        self.col = col
        super().__init__(message or f"unparseable value at row {row}, column {col!r}")


# -- numerical --------------------------------------------------------------

class NotPositiveDefinite(NumericalError):
    """Assembled covariance matrix failed its Cholesky factorization."""


class OverflowDetected(NumericalError):
    """Simulated path left the representable floating-point range."""


class EmptyRegime(NumericalError):
    """A candidate threshold leaves one regime with too few observations."""


class RankDeficient(NumericalError):
    """Design Gram matrix is singular beyond the rank tolerance."""


class NearSingularInstrumentGram(NumericalError):
    """Instrument/regressor cross-moment matrix is numerically singular."""


class SingularLimitGram(NumericalError):
    """Simulated limit moment matrix was singular even after one resample."""


class ArgmaxAtBoundary(NumericalError):
    """Two-sided argmax hit the truncation boundary; enlarge the range."""


# -- critical values --------------------------------------------------------

class MissingCriticalValues(ThreshpredError):
    category = "missing-critical-values"
    exit_code = 5
