"""Exception types shared across the package.

Every failure mode callers are expected to handle maps to one of these, so
`except SpecsenseError` at a boundary (CLI, service) catches exactly the
anticipated errors and nothing else.
"""


class SpecsenseError(Exception):
    """Base class for all errors raised by this package."""


class DataFormatError(SpecsenseError, ValueError):
    """Malformed file content: bad magic, wrong column count, unparsable row."""


class ShapeError(SpecsenseError, ValueError):
    """Array arguments have incompatible or unexpected shapes."""


class DegenerateDataError(SpecsenseError, ValueError):
    """Data admits no meaningful result (e.g. zero variance before scaling)."""


class InsufficientDataError(SpecsenseError, ValueError):
    """Fewer samples than the operation structurally requires."""


class RankDeficiencyError(SpecsenseError, ValueError):
    """Requested subspace dimension exceeds the achieved numerical rank."""

    def __init__(self, message: str, achieved_rank: int):
        super().__init__(message)
        self.achieved_rank = achieved_rank


class UndefinedMetricError(SpecsenseError, ValueError):
    """Metric is mathematically undefined for the given inputs."""


class NumericError(SpecsenseError, ArithmeticError):
    """Non-finite values appeared where finite numbers are required."""


class ContractError(SpecsenseError, ValueError):
    """A documented precondition was violated by the caller."""


class ArtifactIntegrityError(SpecsenseError, ValueError):
    """Persisted model artifact is inconsistent or corrupted."""
