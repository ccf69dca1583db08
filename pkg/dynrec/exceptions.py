"""
Error kinds raised by the recovery library.

Library code raises these; management commands turn them into
``CommandError`` and views into JSON error responses.
"""
from typing import Optional


class DynrecError(Exception):
    """Base class for every error raised by the dynrec package."""


class NonFiniteValues(DynrecError):
    pass


class ConvergenceFailure(DynrecError):
    """The SVD did not converge; the current solve is aborted."""


class DimMismatch(DynrecError):
    pass


class InvalidDims(DynrecError):
    pass


class IndexOutOfRange(DynrecError):
    pass


class EmptyWindow(DynrecError):
    """No kernel weight (or no observation) inside the smoothing window."""


class UnsupportedKernel(DynrecError):
    pass


class UnsupportedFamily(DynrecError):
    pass


class EmptyGrid(DynrecError):
    pass


class InvalidCvPlan(DynrecError):
    pass


class DegenerateFit(DynrecError):
    pass


class EmptyBin(DynrecError):
    pass


class EmptyTestBatch(DynrecError):
    pass


class MatrixFormatError(DynrecError):
    pass


class InvalidConfig(DynrecError):
    """An experiment configuration is missing fields or holds bad values."""


class ParseError(DynrecError):
    """Malformed input row; ``line`` is the 1-based line number in the file."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PathSolveError(DynrecError):
    """A per-time solve failed inside a path solve."""

    def __init__(self, t: int, cause: Exception):
        self.t = t
        self.cause = cause
        super().__init__(f"solve failed at t={t}: {cause}")


class ExperimentStageError(DynrecError):
    """An experiment stage failed; partial outputs were flushed."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"experiment stage '{stage}' failed: {cause}")
