"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit-code contract: 2 usage/config, 3 parse, 4 numerical or
registration failure, 5 external executor failure.
"""


class FloorposeError(Exception):
    exit_code = 1


class ConfigError(FloorposeError):
    """Bad configuration file, unknown key, or invalid override."""

    exit_code = 2


class ParseError(FloorposeError):
    """Malformed input file."""

    exit_code = 3


class BinaryParseError(ParseError):
    """Malformed sparse-model binary stream; ``offset`` is the byte position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class TruncatedStreamError(BinaryParseError):
    pass


class UnknownCameraModelError(BinaryParseError):
    pass


class DuplicateIdError(BinaryParseError):
    pass


class TextParseError(ParseError):
    """Malformed text record; ``line`` is the 1-based line number."""

    def __init__(self, message, line):
        super().__init__(f"{message} (line {line})")
        self.line = line


class ModelIntegrityError(ParseError):
    """Referential-integrity violation inside a parsed sparse model."""


class ExportError(ParseError):
    """Model cannot be serialized to a dataset artifact."""


class FloorPlanLoadError(ParseError):
    """Floor-plan raster, label map, and metadata do not agree."""


class NumericalError(FloorposeError):
    exit_code = 4


class InvalidQuaternionError(NumericalError):
    pass


class InvalidRotationError(NumericalError):
    pass


class InsufficientAnchorsError(NumericalError):
    pass


class DegenerateConfigurationError(NumericalError):
    pass


class RegistrationFailedError(NumericalError):
    pass


class MissingAnchorError(NumericalError):
    def __init__(self, names):
        super().__init__(f"anchor images not in model: {sorted(names)}")
        self.names = list(names)


class DensificationExhaustedError(NumericalError):
    """Frame interval is already 1 but the reconstruction still breaks."""


class ReconstructionFailedError(NumericalError):
    """SfM executor failed or produced an unreadable model."""

    exit_code = 5

    def __init__(self, message, log_path=None):
        if log_path is not None:
            message = f"{message} (log: {log_path})"
        super().__init__(message)
        self.log_path = log_path


class UndefinedHeadingError(NumericalError):
    pass


class OutOfBoundsError(NumericalError):
    pass


class MissingGroundTruthError(NumericalError):
    def __init__(self, paths):
        super().__init__(f"predictions without ground truth: {sorted(paths)}")
        self.paths = list(paths)


class EmptySampleError(NumericalError):
    pass


class DescriptorError(NumericalError):
    pass
