"""Exception hierarchy.

Every error carries a short ``kind`` slug that the CLI prints on the
diagnostic stream, so failures stay machine-parseable.
"""


class UcpError(Exception):
    kind = "error"


class InvalidParameter(UcpError, ValueError):
    kind = "invalid-parameter"


class ConfigError(UcpError, ValueError):
    kind = "config"


class GridMismatch(UcpError, ValueError):
    kind = "grid-mismatch"


class WindowTooSmall(UcpError, ValueError):
    kind = "window-too-small"


class ScaleNotNormalized(UcpError, ValueError):
    kind = "scale-not-normalized"


class ZeroField(UcpError, ValueError):
    kind = "zero-field"


class NoConvergence(UcpError, RuntimeError):
    kind = "no-convergence"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnreachableResidual(UcpError, RuntimeError):
    kind = "unreachable-residual"

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class DegenerateSweep(UcpError, ValueError):
    kind = "degenerate-sweep"


class NonpositiveRatio(UcpError, ValueError):
    kind = "nonpositive-ratio"


class IntervalTooWide(UcpError, ValueError):
    kind = "interval-too-wide"
