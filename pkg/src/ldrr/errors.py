"""Typed errors raised across the package.

Grouped by what the CLI maps them to: data errors (bad input files or
datasets) and numeric errors (singular or ill-posed linear algebra).
"""


class LdrrError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(LdrrError):
    """Input dimensions do not match what the model was fitted with."""


class NotCenteredError(LdrrError):
    """Operation requires a centered model (prior-weighted mean of zero)."""


class SingularMatrixError(LdrrError):
    """A matrix required to be invertible is numerically singular."""


class SingularSigmaError(SingularMatrixError):
    """Marginal feature covariance is singular."""


class SingularSigmaWError(SingularMatrixError):
    """Within-class covariance is singular."""


class SingularDesignError(SingularMatrixError):
    """Gram matrix of the design is singular and no ridge term was given."""


class CholeskyFailureError(SingularMatrixError):
    """Covariance passed to a sampler is not positive definite."""


class EmptyClassError(LdrrError):
    """A class has no samples where at least one is required."""


class KTooLargeError(LdrrError):
    """Requested more discriminant directions than the data supports."""


class ClassMissingInFoldError(LdrrError):
    """Stratified splitting impossible: some class has fewer samples than folds."""


class CsvParseError(LdrrError):
    """Malformed CSV input; message names the offending row and column."""


class MissingLabelColumnError(CsvParseError):
    """The label column is absent from the CSV header."""


class NonNumericFeatureError(CsvParseError):
    """A feature cell could not be parsed as a number."""


class ModelFileError(LdrrError):
    """Model file is missing, unreadable, or structurally invalid."""


class VersionMismatchError(ModelFileError):
    """Model file was written with an unsupported format version."""
