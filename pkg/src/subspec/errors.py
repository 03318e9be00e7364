"""Exception types shared across the package."""


class SubspecError(Exception):
    """Base class for all package errors."""


class InvalidWarpError(SubspecError):
    """Warp profile is nonpositive or malformed on the requested domain."""


class InvalidModelError(SubspecError):
    """Model-space parameters out of range."""


class SUndefinedError(SubspecError):
    """Volume-potential operator requested for a fiber without finite volume."""


class SingularPotentialError(SubspecError):
    """Analytic potential diverges at a pole endpoint (warp not pole-regular)."""


class AssemblyError(SubspecError):
    """Operator assembly failed (nonpositive weight, degenerate range, ...)."""


class UnsupportedCaseError(SubspecError):
    """Requested path not available for this case (e.g. tensor with non-circle fiber)."""


class GridMismatchError(SubspecError):
    """Grid functions defined on incompatible grids."""


class SolverError(SubspecError):
    """Eigenvalue solver failed to converge; message carries diagnostics."""


class ProbeError(SubspecError):
    """Exhaustion probe could not be evaluated (region too small, bad radii)."""


class InvariantViolationError(SubspecError):
    """A structural invariant (e.g. probe monotonicity) failed."""


class ConfigError(SubspecError):
    """Configuration file invalid; carries a line-anchored message."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
