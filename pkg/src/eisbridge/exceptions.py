"""Exception hierarchy.

Every error raised by this package derives from :class:`EisBridgeError` so
callers (and the CLI exit-code mapping) can distinguish configuration, data
validation, missing-artifact, and model/routing failures.
"""


class EisBridgeError(Exception):
    """Base class for all package errors."""


class ConfigError(EisBridgeError):
    """Bad or unresolvable configuration (CLI exit code 2)."""


class DataValidationError(EisBridgeError):
    """Invalid input data (CLI exit code 3)."""


class ArtifactError(EisBridgeError):
    """Missing or unreadable model artifact (CLI exit code 4)."""


class ModelError(EisBridgeError):
    """Model training/routing failure (CLI exit code 5)."""


# -- data validation ---------------------------------------------------------

class MissingFieldError(DataValidationError):
    pass


class NonMonotonicGridError(DataValidationError):
    pass


class DuplicateRptError(DataValidationError):
    pass


class UnknownSchemaVersionError(DataValidationError):
    pass


class GroupTooSmallError(DataValidationError):
    pass


class EmptyInputError(DataValidationError):
    pass


class NonMonotonicXError(DataValidationError):
    pass


class GridOutOfRangeError(DataValidationError):
    pass


class InvalidConfigError(ConfigError):
    # synthetic-generator and pipeline config problems
    pass


class TooShortError(DataValidationError):
    pass


class GridMismatchError(DataValidationError):
    pass


class KindMismatchError(DataValidationError):
    pass


class MissingReferenceError(DataValidationError):
    pass


class MissingImaginaryError(DataValidationError):
    pass


class BandEmptyError(DataValidationError):
    pass


class ZeroReferenceError(DataValidationError):
    pass


# -- ML core -----------------------------------------------------------------

class LengthMismatchError(ModelError):
    pass


class ShapeMismatchError(ModelError):
    pass


class ConstantInputError(ModelError):
    pass


class TooFewPointsError(ModelError):
    pass


class EmptyGridError(ModelError):
    pass


class SingularSystemError(ModelError):
    pass


# -- routing / training ------------------------------------------------------

class NoDataError(ModelError):
    pass


class NoModelAvailableError(ModelError):
    pass


class AllConstantError(ModelError):
    pass


# -- artifacts ----------------------------------------------------------------

class MissingArtifactError(ArtifactError):
    pass


class MissingPrerequisiteError(ArtifactError):
    pass


class UnknownFormatError(ArtifactError):
    pass
