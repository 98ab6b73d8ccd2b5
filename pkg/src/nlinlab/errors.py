"""Exception hierarchy shared across the workbench."""


class NlinLabError(Exception):
    """Base class for all workbench errors."""


class ConfigError(NlinLabError):
    """Invalid or inconsistent configuration (CLI exit code 1)."""


class NumericalError(NlinLabError):
    """Numerical failure during integration or quadrature (CLI exit code 2)."""


class ReportError(NlinLabError):
    """I/O failure while emitting results (CLI exit code 3)."""


class AlignmentError(NlinLabError):
    """Frame alignment failed (ambiguous correlation peak)."""


class CalibrationMissing(NlinLabError):
    """Requested equalizer coefficients are not in the store."""


class ZeroNoiseError(NlinLabError):
    """Noise statistics requested on a noise-free frame."""
