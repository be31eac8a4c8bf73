"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
data problems (bad files, bad meshes, degenerate inputs) exit 3.
"""


class GraspGaugeError(Exception):
    """Base class for all errors raised by graspgauge."""


class ConfigError(GraspGaugeError):
    """Invalid configuration file or CLI flag combination."""


class ParameterError(GraspGaugeError, ValueError):
    """An argument violates an operation's precondition."""


class DataError(GraspGaugeError):
    """Problem with input data files or geometric content."""


class FormatError(DataError):
    """A file could not be parsed; message carries line/byte context."""


class ContentError(DataError):
    """A file parsed but its content is unusable (empty mesh, zero volume, ...)."""


class SamplingError(GraspGaugeError):
    """Grasp sampling exhausted its attempt budget without a single accept."""


class UndefinedRateError(GraspGaugeError):
    """A success rate was requested over an empty denominator."""
