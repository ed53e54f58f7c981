"""Input validation helpers shared by the estimators and the spectral code.

All fitting routines accept plain ndarrays next to the package's own
container types, so the coercions here are the single place where shapes,
finiteness and Hermitian symmetry get checked.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatchError,
    NotHermitianError,
    NotPositiveDefiniteError,
    NotPositiveSemidefiniteError,
)

EPS = float(np.finfo(float).eps)


def as_complex_vector(x, name: str = "array") -> np.ndarray:
    """Coerce to a finite 1-D complex vector."""
    arr = np.asarray(x, dtype=complex)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be one-dimensional, got shape {arr.shape}")
    check_finite(arr, name)
    return arr


def as_complex_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D complex matrix (column vectors get one column)."""
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be two-dimensional, got shape {arr.shape}")
    check_finite(arr, name)
    return arr


def check_finite(arr: np.ndarray, name: str = "array") -> None:
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise DimensionMismatchError(f"{name} contains non-finite values")


def check_square(a: np.ndarray, name: str = "matrix") -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {a.shape}")


def check_same_length(a: np.ndarray, b: np.ndarray, name_a: str, name_b: str) -> None:
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            f"{name_a} has length {a.shape[0]} but {name_b} has length {b.shape[0]}"
        )


def check_hermitian(a: np.ndarray, rtol: float = 1e-12, name: str = "matrix") -> None:
    """Raise :class:`NotHermitianError` if ``a`` deviates from its adjoint."""
    check_square(a, name)
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale == 0.0:
        return
    dev = float(np.max(np.abs(a - a.conj().T)))
    if dev > rtol * scale:
        raise NotHermitianError(f"{name} is not Hermitian: max deviation {dev:.3e} (scale {scale:.3e})")


def check_positive_definite(a: np.ndarray, name: str = "matrix") -> None:
    """Raise :class:`NotPositiveDefiniteError` unless Cholesky succeeds."""
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{name} is not positive definite") from exc


def validate_covariance(v: np.ndarray, name: str = "covariance") -> np.ndarray:
    """Check the Hermitian / almost-PSD contract for reported covariances.

    Hermitian within 1e-12 relative; eigenvalues allowed down to
    ``-1e-10 * trace`` to absorb roundoff.
    """
    v = np.asarray(v, dtype=complex)
    check_hermitian(v, rtol=1e-12, name=name)
    trace = float(np.real(np.trace(v)))
    eigmin = float(np.min(np.linalg.eigvalsh(hermitian_part(v)))) if v.size else 0.0
    if eigmin < -1e-10 * max(trace, 0.0) - 10 * EPS:
        raise NotPositiveSemidefiniteError(
            f"{name} has eigenvalue {eigmin:.3e} below the PSD tolerance"
        )
    return v


def hermitian_part(a: np.ndarray) -> np.ndarray:
    """Discard the anti-Hermitian roundoff of an analytically Hermitian matrix."""
    return 0.5 * (a + a.conj().T)


def consistent_dt(*dts: float | None, rtol: float = 1e-9) -> float | None:
    """Return the common sampling step of the non-None entries.

    Raises :class:`DimensionMismatchError` when two entries disagree.
    """
    out: float | None = None
    for dt in dts:
        if dt is None:
            continue
        if out is None:
            out = float(dt)
        elif abs(float(dt) - out) > rtol * out:
            raise DimensionMismatchError(f"sampling steps differ: {out} vs {dt}")
    return out
