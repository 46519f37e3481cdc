"""Exception types shared across the package.

Every error raised by library code derives from StagecpError so callers
(and the CLI exit-code mapping) can catch one base class.
"""


class StagecpError(Exception):
    """Base class for all package errors."""


class InsufficientData(StagecpError):
    """Requested split sizes exceed the available points."""


class WindowTooShort(StagecpError):
    """Sliding window requested before enough history exists."""


class RankDeficient(StagecpError):
    """Least-squares design matrix is numerically singular."""


class DimensionMismatch(StagecpError):
    """Vector dimensions are inconsistent with the fitted models."""


class TooFewStages(StagecpError):
    """Multi-stage decomposition needs at least two stages."""


class EmptyScores(StagecpError):
    """Quantile requested over an empty score set."""


class LengthMismatch(StagecpError):
    """Paired sequences have different lengths."""


class AllZeroWeights(StagecpError):
    """Weighted quantile requires at least one positive weight."""


class InvalidLevel(StagecpError):
    """Test level outside its valid range."""


class InvalidMixingCoefficients(StagecpError):
    """Mixing coefficients must be nonnegative and non-increasing."""


class EmptyCalibration(StagecpError):
    """Empirical risk requested over an empty calibration set."""


class InvalidSpec(StagecpError):
    """Synthetic scenario specification is malformed."""


class ConfigError(StagecpError):
    """Experiment configuration is invalid."""


class IoError(StagecpError):
    """File could not be read or written."""


class ParseError(StagecpError):
    """Malformed CSV content; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SchemaError(StagecpError):
    """CSV header is missing a required column."""

    def __init__(self, column: str):
        super().__init__(f"missing required column: {column}")
        self.column = column
