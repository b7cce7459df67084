"""Exception types raised across the package.

Each CLI-facing error carries an ``exit_code``: 2 for configuration problems,
3 for numerical failures and 4 for file I/O or format problems.
"""


class TwinbeamError(Exception):
    exit_code = 3


class OutOfRangeError(TwinbeamError, ValueError):
    """A frequency or wavelength lies outside a declared validity window."""


class CutoffError(TwinbeamError, ValueError):
    """Frequency below the waveguide cutoff (negative effective index squared)."""


class NotFoundError(TwinbeamError, ValueError):
    pass


class AmbiguityError(TwinbeamError, ValueError):
    pass


class AliasingError(TwinbeamError, ValueError):
    """The numerical grid is too narrow for the requested pulse."""


class EmptySpectrumError(TwinbeamError, ValueError):
    pass


class CoverageError(TwinbeamError, ValueError):
    pass


class FlatPhaseError(TwinbeamError, ValueError):
    """Covariance has too much negative mass for square-root reconstruction."""


class SamplerOverflowError(TwinbeamError, OverflowError):
    pass


class StiffnessError(TwinbeamError, RuntimeError):
    pass


class DivergenceError(TwinbeamError, RuntimeError):
    pass


class StatisticsError(TwinbeamError, ValueError):
    pass


class ConfigError(TwinbeamError, ValueError):
    exit_code = 2


class FileFormatError(TwinbeamError, IOError):
    exit_code = 4
    code = "format"


class MagicError(FileFormatError):
    code = "bad-magic"


class TruncatedError(FileFormatError):
    code = "truncated"


class VersionError(FileFormatError):
    code = "version"
