"""Least-squares estimators for signals in stationary colored noise.

Functional layer
    :func:`ols`, :func:`gls_time`, :func:`gls_spectral` return
    :class:`~glsfit.model.Estimate` objects; covariance helpers evaluate the
    parameter covariance in the time domain or from the noise density.

Estimator classes
    :class:`OrdinaryLeastSquares` and :class:`GeneralizedLeastSquares` wrap
    the functional layer behind the scikit-learn ``fit``/``predict``/
    ``get_params`` protocol so fits compose with the wider ecosystem.

The sampled-noise covariance is never inverted explicitly: time-domain GLS
whitens through a Cholesky factor and runs the weighted Gram-Schmidt solve,
and the spectral variant works on zero-extended sequences through the
generalized deconvolution by the correlation kernel.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator

from .errors import (
    DimensionMismatchError,
    NotPositiveSemidefiniteError,
    RankDeficientError,
)
from .linalg import loewner_leq, orthonormalize
from .model import (
    Estimate,
    sandwich_covariance,
    weighted_least_squares,
    _design_entries,
    _signal_values,
)
from .noise import NoiseModel, ToeplitzCovariance, build_covariance
from .spectral import (
    band_integral,
    dtft,
    gen_deconvolve,
    matrix_scalar_product,
    zero_extend,
)
from .validation import (
    as_complex_matrix,
    consistent_dt,
    hermitian_part,
    validate_covariance,
)

__all__ = [
    "ols",
    "ols_covariance_time",
    "ols_covariance_freq",
    "gls_time",
    "gls_spectral",
    "transitivity_residual",
    "orthonormalize",
    "loewner_leq",
    "OrdinaryLeastSquares",
    "GeneralizedLeastSquares",
]


def ols(design, signal, solve_path: str = "gram_schmidt") -> Estimate:
    """Unweighted least squares, ``x* = (X'X)^{-1} X' m``."""
    return weighted_least_squares(design, signal, weights=None, solve_path=solve_path)


def ols_covariance_time(design, noise_covariance) -> np.ndarray:
    """OLS parameter covariance ``(X'X)^{-1} X' Omega X (X'X)^{-1}``."""
    omega = noise_covariance.dense() if isinstance(noise_covariance, ToeplitzCovariance) \
        else noise_covariance
    return sandwich_covariance(design, omega, weights=None)


def ols_covariance_freq(
    design,
    noise: NoiseModel,
    n_grid: int | None = None,
    grid_factor: int = 8,
) -> np.ndarray:
    """OLS parameter covariance evaluated from the noise density.

    The middle matrix is the band integral
    ``W_kl = (1/dt^2) * integral S(f) conj(F{X}_k) F{X}_l df``; the result is
    ``(X'X)^{-1} W (X'X)^{-1}``. Agrees with :func:`ols_covariance_time` as
    the grid refines.
    """
    x_mat, dt_x, origin = _design_entries(design)
    dt = consistent_dt(dt_x, noise.dt) or noise.dt
    spec = dtft(zero_extend(x_mat, origin), dt, n_grid=n_grid, grid_factor=grid_factor)
    s = noise.psd_values(spec.freqs)
    w = np.asarray(
        band_integral(spec.values.conj()[:, :, None] * s[:, None, None] * spec.values[:, None, :], dt)
    ) / dt**2
    a = hermitian_part(x_mat.conj().T @ x_mat)
    half = np.linalg.solve(a, hermitian_part(w))
    cov = np.linalg.solve(a, half.conj().T).conj().T
    return validate_covariance(hermitian_part(cov))


def _coerce_covariance(noise_covariance, n: int) -> np.ndarray:
    if isinstance(noise_covariance, NoiseModel):
        return build_covariance(noise_covariance, n).dense()
    if isinstance(noise_covariance, ToeplitzCovariance):
        return noise_covariance.dense()
    return as_complex_matrix(noise_covariance, "noise covariance")


def _whitening_factor(omega: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of the covariance, with a last-resort jitter."""
    scale = float(np.max(np.abs(np.diagonal(omega).real))) if omega.size else 0.0
    try:
        return np.linalg.cholesky(omega)
    except np.linalg.LinAlgError:
        try:
            return np.linalg.cholesky(omega + 1e-10 * scale * np.eye(omega.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise NotPositiveSemidefiniteError(
                "noise covariance is not positive definite"
            ) from exc


def gls_time(design, signal, noise_covariance) -> Estimate:
    """Generalized least squares with the sampled-noise covariance.

    Whitens both operands by the Cholesky factor of ``Omega`` and solves the
    resulting unweighted problem; the covariance is
    ``(X' Omega^{-1} X)^{-1}``, assembled from the same factorization.
    """
    x_mat, dt_x, _ = _design_entries(design)
    y_vec, dt_y, _ = _signal_values(signal)
    consistent_dt(dt_x, dt_y)
    if x_mat.shape[0] != y_vec.shape[0]:
        raise DimensionMismatchError("design and signal lengths differ")
    omega = _coerce_covariance(noise_covariance, x_mat.shape[0])
    if omega.shape[0] != x_mat.shape[0]:
        raise DimensionMismatchError("noise covariance size does not match the data")

    chol = _whitening_factor(omega)
    x_white = scipy.linalg.solve_triangular(chol, x_mat, lower=True)
    y_white = scipy.linalg.solve_triangular(chol, y_vec, lower=True)

    ortho = orthonormalize(x_white)
    coeffs = scipy.linalg.solve_triangular(ortho.r_factor, ortho.basis.conj().T @ y_white)
    cov = ortho.change_of_basis @ ortho.change_of_basis.conj().T
    resid = y_white - x_white @ coeffs
    return Estimate(
        x_star=coeffs,
        covariance=validate_covariance(hermitian_part(cov)),
        method="gls_time",
        residual_norm=float(np.linalg.norm(resid)),
        condition_number=ortho.condition_number,
        solve_path="cholesky_whitening+gram_schmidt",
    )


def gls_spectral(
    design,
    signal,
    noise: NoiseModel,
    pad: int | None = None,
    grid_factor: int = 8,
) -> Estimate:
    """Generalized least squares on the zero-extended sequences.

    Both the design columns and the data are extended by zeros beyond the
    observation window, and the covariance inverse is realized as the
    generalized deconvolution by the correlation kernel ``R(k * dt)``:

    ``x* = <X | Linv(X)>^{-1} <X | Linv(m)>``,  ``V = <X | Linv(X)>^{-1}``.

    ``pad`` controls the truncation of the deconvolution kernel (default
    ``4 n``); the estimate converges to the infinite-extension limit as the
    pad grows.
    """
    x_mat, dt_x, origin_x = _design_entries(design)
    y_vec, dt_y, origin_y = _signal_values(signal)
    dt = consistent_dt(dt_x, dt_y, noise.dt) or noise.dt
    if x_mat.shape[0] != y_vec.shape[0]:
        raise DimensionMismatchError("design and signal lengths differ")
    if origin_x != origin_y:
        raise DimensionMismatchError("design and signal index origins differ")
    n = x_mat.shape[0]
    if pad is None:
        pad = 4 * n

    kernel = noise.correlation_sequence()
    x_ext = zero_extend(x_mat, origin_x)
    y_ext = zero_extend(y_vec, origin_y)
    linv_x = gen_deconvolve(kernel, x_ext, pad=pad, grid_factor=grid_factor, dt=dt)
    linv_y = gen_deconvolve(kernel, y_ext, pad=pad, grid_factor=grid_factor, dt=dt)

    a = hermitian_part(matrix_scalar_product(x_ext, linv_x))
    b = matrix_scalar_product(x_ext, linv_y)[:, 0]
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] <= n * np.finfo(float).eps * sv[0]:
        raise RankDeficientError("spectral normal matrix is numerically singular")
    coeffs = np.linalg.solve(a, b)
    cov = np.linalg.inv(a)
    resid = y_vec - x_mat @ coeffs
    return Estimate(
        x_star=coeffs,
        covariance=validate_covariance(hermitian_part(cov)),
        method="gls_spectral",
        residual_norm=float(np.linalg.norm(resid)),
        condition_number=float(sv[0] / sv[-1]),
        solve_path="spectral_deconvolution",
    )


def estimator_linear_map(design, noise_covariance=None) -> tuple[np.ndarray, np.ndarray]:
    """Matrix ``G`` with ``x* = G m`` and the covariance of the estimator.

    ``noise_covariance`` None gives the OLS map with covariance left as the
    identity-noise expression ``(X'X)^{-1}``; otherwise the GLS map with
    ``(X' Omega^{-1} X)^{-1}``. Used by Monte Carlo drivers so each trial is
    a single matrix-vector product.
    """
    x_mat, _, _ = _design_entries(design)
    if noise_covariance is None:
        ortho = orthonormalize(x_mat)
        g = scipy.linalg.solve_triangular(ortho.r_factor, ortho.basis.conj().T)
        cov = ortho.change_of_basis @ ortho.change_of_basis.conj().T
        return g, hermitian_part(cov)
    omega = _coerce_covariance(noise_covariance, x_mat.shape[0])
    chol = _whitening_factor(omega)
    x_white = scipy.linalg.solve_triangular(chol, x_mat, lower=True)
    ortho = orthonormalize(x_white)
    white_map = scipy.linalg.solve_triangular(ortho.r_factor, ortho.basis.conj().T)
    g = scipy.linalg.solve_triangular(chol, white_map.conj().T, lower=True,
                                      trans="C").conj().T
    cov = ortho.change_of_basis @ ortho.change_of_basis.conj().T
    return g, hermitian_part(cov)


def transitivity_residual(
    weights_first,
    weights_second,
    weights_direct,
    design_first,
    design_second,
) -> float:
    """Defect of collapsing a two-stage reduction into a single one.

    Stage one fits ``design_first`` under ``weights_first``; stage two fits
    ``design_second`` to the stage-one parameters under ``weights_second``.
    The returned value is the max-abs entry of the difference between the
    chained estimator map and the one-shot map for
    ``design_first @ design_second`` under ``weights_direct``; zero means the
    chain is equivalent to the direct fit for every data vector.
    """
    j0 = as_complex_matrix(design_first, "design_first")
    j1 = as_complex_matrix(design_second, "design_second")
    p0 = np.asarray(getattr(weights_first, "entries", weights_first), dtype=complex)
    p1 = np.asarray(getattr(weights_second, "entries", weights_second), dtype=complex)
    p0t = np.asarray(getattr(weights_direct, "entries", weights_direct), dtype=complex)
    n0, n1 = j0.shape
    if j1.shape[0] != n1:
        raise DimensionMismatchError("design_second rows must match design_first columns")
    if p0.shape != (n0, n0) or p0t.shape != (n0, n0) or p1.shape != (n1, n1):
        raise DimensionMismatchError("weight sizes do not match the designs")

    def _ls_map(p: np.ndarray, j: np.ndarray) -> np.ndarray:
        a = hermitian_part(j.conj().T @ p @ j)
        sv = np.linalg.svd(a, compute_uv=False)
        if sv[-1] <= j.shape[0] * np.finfo(float).eps * sv[0]:
            raise RankDeficientError("normal matrix in transitivity check is singular")
        return np.linalg.solve(a, j.conj().T @ p)

    chained = _ls_map(p1, j1) @ _ls_map(p0, j0)
    direct = _ls_map(p0t, j0 @ j1)
    return float(np.max(np.abs(chained - direct)))


# ---------------------------------------------------------------------------
# scikit-learn style estimators
# ---------------------------------------------------------------------------


class _BaseSignalEstimator(BaseEstimator):
    """Shared fit plumbing for the signal regressors."""

    def _unpack(self, X, y):
        x_mat, dt_x, origin = _design_entries(X)
        y_vec, dt_y, origin_y = _signal_values(y)
        if x_mat.shape[0] != y_vec.shape[0]:
            raise DimensionMismatchError("X and y must have the same number of samples")
        return x_mat, y_vec

    def _finalize(self, X, estimate: Estimate):
        x_mat, _, _ = _design_entries(X)
        self.estimate_ = estimate
        self.coef_ = estimate.x_star
        self.covariance_ = estimate.covariance
        self.stderr_ = estimate.stderr
        self.residual_norm_ = estimate.residual_norm
        self.condition_number_ = estimate.condition_number
        self.n_features_in_ = x_mat.shape[1]
        return self

    def predict(self, X):
        """Model prediction ``X @ coef_``."""
        if not hasattr(self, "coef_"):
            raise RuntimeError("estimator is not fitted; call fit first")
        x_mat, _, _ = _design_entries(X)
        return x_mat @ self.coef_


class OrdinaryLeastSquares(_BaseSignalEstimator):
    """Unweighted least-squares fit of a sampled signal.

    Parameters
    ----------
    noise : NoiseModel, ToeplitzCovariance or ndarray, optional
        Noise description used only to evaluate the parameter covariance of
        the (noise-agnostic) OLS point estimate.
    covariance_domain : {"time", "frequency"}
        Evaluate the covariance from the sampled covariance matrix or from
        the spectral density (requires a NoiseModel).
    grid_factor : int
        Oversampling of the frequency grid for the spectral covariance.

    Attributes
    ----------
    coef_ : ndarray
        Fitted parameters.
    covariance_ : ndarray or None
        Parameter covariance when a noise description was supplied.
    """

    def __init__(self, noise=None, covariance_domain: str = "time", grid_factor: int = 8):
        self.noise = noise
        self.covariance_domain = covariance_domain
        self.grid_factor = grid_factor

    def fit(self, X, y):
        x_mat, y_vec = self._unpack(X, y)
        estimate = ols(X, y)
        if self.noise is not None:
            if self.covariance_domain == "frequency":
                if not isinstance(self.noise, NoiseModel):
                    raise DimensionMismatchError(
                        "frequency-domain covariance requires a NoiseModel"
                    )
                cov = ols_covariance_freq(X, self.noise, grid_factor=self.grid_factor)
            elif self.covariance_domain == "time":
                omega = _coerce_covariance(self.noise, x_mat.shape[0])
                cov = ols_covariance_time(X, omega)
            else:
                raise ValueError(f"unknown covariance_domain {self.covariance_domain!r}")
            estimate = estimate.with_covariance(cov)
        return self._finalize(X, estimate)


class GeneralizedLeastSquares(_BaseSignalEstimator):
    """Minimum-variance linear fit under a known noise covariance.

    Parameters
    ----------
    noise : NoiseModel, ToeplitzCovariance or ndarray
        Noise description; the spectral domain requires a NoiseModel.
    domain : {"time", "spectral"}
        "time" solves with the sampled covariance matrix; "spectral" uses the
        zero-extension estimator driven by the correlation kernel.
    pad_factor : int
        Kernel truncation for the spectral domain, in units of the sample
        count.
    grid_factor : int
        Frequency-grid oversampling for the spectral domain.
    """

    def __init__(self, noise=None, domain: str = "time", pad_factor: int = 4,
                 grid_factor: int = 8):
        self.noise = noise
        self.domain = domain
        self.pad_factor = pad_factor
        self.grid_factor = grid_factor

    def fit(self, X, y):
        x_mat, y_vec = self._unpack(X, y)
        if self.noise is None:
            raise DimensionMismatchError("GeneralizedLeastSquares requires a noise description")
        if self.domain == "time":
            estimate = gls_time(X, y, self.noise)
        elif self.domain == "spectral":
            if not isinstance(self.noise, NoiseModel):
                raise DimensionMismatchError("spectral GLS requires a NoiseModel")
            estimate = gls_spectral(
                X, y, self.noise,
                pad=self.pad_factor * x_mat.shape[0],
                grid_factor=self.grid_factor,
            )
        else:
            raise ValueError(f"unknown domain {self.domain!r}")
        return self._finalize(X, estimate)
