"""Error types shared across the package.

Each error kind maps 1:1 to a CLI exit code so batch drivers can tell
failure modes apart without parsing stderr.
"""


class HomoboltzError(Exception):
    """Base class for all package-specific errors."""


class UnsupportedDimension(HomoboltzError):
    """Requested spatial dimension is not 2 or 3."""


class KernelNormalizationError(HomoboltzError):
    """Kernel quadrature sum is zero or non-finite (non-integrable profile)."""


class DominanceViolation(HomoboltzError):
    """Top eigenvalue of the second-moment generator is complex or nearly
    degenerate; the deformation is too large for the perturbative regime."""


class NotPositiveDefinite(HomoboltzError):
    """Normalized dominant eigenvector is not a positive definite matrix."""


class InvariantViolation(HomoboltzError):
    """A characteristic-function grid invariant failed during evolution."""


class ContractionFailure(HomoboltzError):
    """Profile iteration stopped contracting."""


class GeometryMismatch(HomoboltzError):
    """Two grids do not share geometry (dimension, axis, radius or reference)."""


class IllConditionedFit(HomoboltzError):
    """Least-squares recovery of polynomial coefficients is too ill conditioned."""


class SingularSystem(HomoboltzError):
    """A dense moment-hierarchy solve failed (deformation beyond the regime)."""


class SingularGram(HomoboltzError):
    """Truncated-Hermite Gram matrix is numerically singular."""


class NegativeDensity(HomoboltzError):
    """Reconstructed density goes negative on the check grid."""


class ConfigError(HomoboltzError):
    """Invalid experiment configuration."""


# CLI exit codes; 0 is success, 1 is reserved for unexpected crashes.
EXIT_CODES = {
    ConfigError: 2,
    DominanceViolation: 3,
    NotPositiveDefinite: 4,
    InvariantViolation: 5,
    ContractionFailure: 6,
    IllConditionedFit: 7,
    SingularSystem: 8,
    NegativeDensity: 9,
    SingularGram: 10,
    GeometryMismatch: 11,
    UnsupportedDimension: 12,
    KernelNormalizationError: 13,
}


def exit_code_for(exc: BaseException) -> int:
    for klass, code in EXIT_CODES.items():
        if isinstance(exc, klass):
            return code
    return 1
