"""Exception hierarchy.

Two families matter for the command-line front-end: :class:`InputDataError`
(malformed files, incompatible shapes, bad configuration) maps to exit code 2,
:class:`NumericalError` (rank deficiency, indefinite matrices, spectral nulls)
maps to exit code 3.
"""


class GlsfitError(Exception):
    """Base class for all package errors."""


class InputDataError(GlsfitError):
    """Invalid user input: files, shapes, or configuration."""


class NumericalError(GlsfitError):
    """A numerical precondition failed (rank, definiteness, spectrum)."""


class DimensionMismatchError(InputDataError):
    """Operands have incompatible shapes or sampling steps."""


class InvalidBasisError(InputDataError):
    """A basis specification cannot be evaluated."""


class GridTooCoarseError(InputDataError):
    """The frequency grid has fewer points than the sequence support."""


class GridMismatchError(InputDataError):
    """Two spectral objects live on incompatible grids."""


class NotHermitianError(InputDataError):
    """A matrix required to be Hermitian is not, beyond tolerance."""


class RankDeficientError(NumericalError):
    """A design or normal matrix is numerically rank deficient."""


class NotPositiveDefiniteError(NumericalError):
    """A weight matrix is not positive definite."""


class NotPositiveSemidefiniteError(NumericalError):
    """A covariance matrix is not positive semidefinite."""


class SpectralZeroError(NumericalError):
    """A kernel spectrum has an in-band null; the kernel is not invertible."""


class EmbeddingFailedError(NumericalError):
    """Both circulant embedding and Cholesky synthesis paths failed."""


class PerturbationTooLargeError(NumericalError):
    """A spectral perturbation exceeds the density it perturbs."""
