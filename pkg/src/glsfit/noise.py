"""Stationary Gaussian noise: spectral densities, covariances, synthesis.

A noise model pairs a power spectral density ``S(f)`` on the Nyquist band
with the correlation sequence ``R(k * dt)`` obtained from it by band
quadrature (Wiener-Khintchine). The sampled covariance is the Hermitian
Toeplitz matrix ``Omega_ij = R((i - j) dt)``. Synthetic draws use circulant
embedding of the Toeplitz first row, with a Cholesky fallback when the
embedding is indefinite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatchError,
    EmbeddingFailedError,
    InputDataError,
    NotPositiveSemidefiniteError,
)
from .model import SampledSignal
from .spectral import band_integral, frequency_grid, zero_extend, ZeroExtendedSequence

__all__ = [
    "WhitePsd",
    "PowerLawPsd",
    "TabulatedPsd",
    "psd_from_spec",
    "NoiseModel",
    "psd_to_correlation",
    "ToeplitzCovariance",
    "build_covariance",
    "NoiseSynthesizer",
    "synthesize_noise",
]

DEFAULT_CORRELATION_GRID_FACTOR = 16


@dataclass(frozen=True)
class WhitePsd:
    """Flat density ``S(f) = level``; a sampled variance of ``sigma^2``
    corresponds to ``level = sigma^2 * dt``."""

    level: float

    def __post_init__(self) -> None:
        if self.level < 0:
            raise InputDataError("white PSD level must be nonnegative")

    def evaluate(self, freqs: np.ndarray, f_min: float | None = None) -> np.ndarray:
        return np.full(freqs.shape, float(self.level))


@dataclass(frozen=True)
class PowerLawPsd:
    """Density ``S(f) = amplitude * max(|f|, f_min)^exponent``.

    The clip at ``f_min`` regularizes the divergence at zero frequency for
    negative exponents; when ``f_min`` is None the enclosing model derives it
    from its correlation length.
    """

    amplitude: float
    exponent: float
    f_min: float | None = None

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise InputDataError("power-law amplitude must be nonnegative")
        if not -2.0 <= self.exponent <= 2.0:
            raise InputDataError("power-law exponent must lie in [-2, 2]")

    def evaluate(self, freqs: np.ndarray, f_min: float | None = None) -> np.ndarray:
        clip = self.f_min if self.f_min is not None else f_min
        if clip is None or clip <= 0:
            raise InputDataError("power-law PSD needs a positive low-frequency clip")
        return self.amplitude * np.maximum(np.abs(freqs), clip) ** self.exponent


@dataclass(frozen=True)
class TabulatedPsd:
    """Piecewise-linear density through ``(frequency, value)`` pairs.

    Entries covering only nonnegative frequencies are mirrored evenly onto
    the negative half of the band.
    """

    freqs: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        freqs = np.asarray(self.freqs, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if freqs.ndim != 1 or freqs.shape != values.shape or freqs.size == 0:
            raise InputDataError("tabulated PSD needs matching 1-D frequency/value arrays")
        order = np.argsort(freqs)
        freqs, values = freqs[order], values[order]
        if np.any(np.diff(freqs) <= 0):
            raise InputDataError("tabulated PSD frequencies must be distinct")
        if np.any(values < 0):
            raise InputDataError("tabulated PSD values must be nonnegative")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "values", values)

    def evaluate(self, freqs: np.ndarray, f_min: float | None = None) -> np.ndarray:
        query = np.abs(freqs) if self.freqs[0] >= 0.0 else np.asarray(freqs, dtype=float)
        return np.interp(query, self.freqs, self.values)


def psd_from_spec(spec: dict):
    """Instantiate a PSD family from its JSON description."""
    if not isinstance(spec, dict):
        raise InputDataError(f"PSD spec must be a dict, got {type(spec).__name__}")
    kind = spec.get("type")
    if kind == "white":
        return WhitePsd(level=float(spec["level"]))
    if kind == "power_law":
        return PowerLawPsd(
            amplitude=float(spec["amplitude"]),
            exponent=float(spec["exponent"]),
            f_min=float(spec["f_min"]) if "f_min" in spec else None,
        )
    if kind == "tabulated":
        entries = np.asarray(spec["entries"], dtype=float)
        if entries.ndim != 2 or entries.shape[1] != 2:
            raise InputDataError("tabulated entries must be [frequency, value] pairs")
        return TabulatedPsd(freqs=entries[:, 0], values=entries[:, 1])
    raise InputDataError(f"unknown PSD type {kind!r}")


def psd_to_correlation(
    psd,
    n_lags: int,
    dt: float,
    grid_factor: int = DEFAULT_CORRELATION_GRID_FACTOR,
    f_min: float | None = None,
) -> np.ndarray:
    """Correlation ``R(k * dt)`` for ``k = 0..n_lags`` by band quadrature.

    ``R(k dt) = integral over the Nyquist band of S(f) exp(i 2 pi k f dt)``.
    Negative lags follow from ``R(-k dt) = conj(R(k dt))``.
    """
    m = grid_factor * (2 * n_lags + 1)
    freqs = frequency_grid(dt, m)
    s = np.asarray(psd.evaluate(freqs, f_min=f_min), dtype=float)
    k = np.arange(n_lags + 1)
    phases = np.exp(2j * np.pi * np.outer(k * dt, freqs))
    return (phases @ s) / (m * dt)


@dataclass
class NoiseModel:
    """Stationary noise description on a sampling step ``dt``.

    Attributes set during construction:

    correlation_ : ndarray
        ``R(k * dt)`` for ``k = 0..n_lags``.
    psd_floor_ : float
        Lower clamp applied by :meth:`psd_values`; ``floor_rel`` times the
        in-band maximum (zero only for the degenerate all-zero density).
    f_min_ : float
        Low-frequency clip resolved for power-law densities.
    """

    psd: WhitePsd | PowerLawPsd | TabulatedPsd
    dt: float
    n_lags: int = 256
    grid_factor: int = DEFAULT_CORRELATION_GRID_FACTOR
    floor_rel: float = 1e-12

    correlation_: np.ndarray = field(init=False, repr=False)
    psd_floor_: float = field(init=False)
    f_min_: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise InputDataError("dt must be positive")
        if self.n_lags < 0:
            raise InputDataError("n_lags must be nonnegative")
        # Default clip for power-law divergence: a decade below the lowest
        # frequency resolved by the tabulated correlation span.
        self.f_min_ = 1.0 / (10.0 * (self.n_lags + 1) * self.dt)
        self.correlation_ = psd_to_correlation(
            self.psd, self.n_lags, self.dt, self.grid_factor, f_min=self.f_min_
        )
        probe = self.psd_values(frequency_grid(self.dt, 4096), floored=False)
        peak = float(np.max(probe))
        self.psd_floor_ = self.floor_rel * peak
        r0 = self.correlation_[0]
        if peak > 0 and not r0.real > 0:
            raise NotPositiveSemidefiniteError("correlation at lag zero must be positive")
        if np.any(np.abs(self.correlation_) > abs(r0) * (1 + 1e-8) + 1e-30):
            raise NotPositiveSemidefiniteError("|R(tau)| exceeds R(0); inconsistent density")

    def psd_values(self, freqs: np.ndarray, floored: bool = True) -> np.ndarray:
        s = np.asarray(self.psd.evaluate(np.asarray(freqs, dtype=float), f_min=self.f_min_),
                       dtype=float)
        if floored and self.psd_floor_ > 0:
            s = np.maximum(s, self.psd_floor_)
        return s

    def correlation(self, lag: int) -> complex:
        if abs(lag) > self.n_lags:
            raise DimensionMismatchError(f"lag {lag} outside the tabulated range")
        value = self.correlation_[abs(lag)]
        return complex(value if lag >= 0 else np.conj(value))

    def correlation_sequence(self, max_lag: int | None = None) -> ZeroExtendedSequence:
        """Correlation on lags ``-max_lag..max_lag`` as a convolution kernel."""
        k = self.n_lags if max_lag is None else int(max_lag)
        if k > self.n_lags:
            raise DimensionMismatchError(f"max_lag {k} exceeds tabulated {self.n_lags}")
        pos = self.correlation_[: k + 1]
        full = np.concatenate([np.conj(pos[:0:-1]), pos])
        return zero_extend(full, support_start=-k)

    @property
    def variance(self) -> float:
        return float(self.correlation_[0].real)

    @property
    def is_silent(self) -> bool:
        return self.psd_floor_ == 0.0 and self.variance == 0.0

    @classmethod
    def from_spec(cls, spec: dict, dt: float, n_lags: int = 256, **kwargs) -> "NoiseModel":
        return cls(psd=psd_from_spec(spec), dt=dt, n_lags=n_lags, **kwargs)

    @classmethod
    def from_file(cls, path, dt: float, n_lags: int = 256, **kwargs) -> "NoiseModel":
        try:
            with open(path) as fh:
                spec = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputDataError(f"cannot read noise spec {path}: {exc}") from exc
        return cls.from_spec(spec, dt=dt, n_lags=n_lags, **kwargs)


@dataclass(frozen=True)
class ToeplitzCovariance:
    """Hermitian Toeplitz covariance ``Omega_ij = R((i - j) dt)``."""

    first_row: np.ndarray
    n: int

    def __post_init__(self) -> None:
        row = np.asarray(self.first_row, dtype=complex)
        if row.ndim != 1 or row.shape[0] != self.n:
            raise DimensionMismatchError("first_row must hold n correlation values")
        object.__setattr__(self, "first_row", row)

    def dense(self) -> np.ndarray:
        return scipy.linalg.toeplitz(self.first_row, np.conj(self.first_row))

    @property
    def lag_zero(self) -> float:
        return float(self.first_row[0].real)


def build_covariance(model: NoiseModel, n: int) -> ToeplitzCovariance:
    """Toeplitz covariance of ``n`` consecutive samples of the noise.

    Requires ``model.n_lags >= n - 1``. Positive semidefiniteness is checked
    by a Cholesky factorization with diagonal jitter up to ``1e-10 * R(0)``.
    """
    if n < 1:
        raise DimensionMismatchError("covariance size must be at least 1")
    if model.n_lags < n - 1:
        raise DimensionMismatchError(
            f"model tabulates {model.n_lags} lags, need {n - 1} for size {n}"
        )
    cov = ToeplitzCovariance(first_row=model.correlation_[:n], n=n)
    r0 = cov.lag_zero
    if r0 > 0:
        dense = cov.dense()
        try:
            np.linalg.cholesky(dense)
        except np.linalg.LinAlgError:
            try:
                np.linalg.cholesky(dense + 1e-10 * r0 * np.eye(n))
            except np.linalg.LinAlgError as exc:
                raise NotPositiveSemidefiniteError(
                    "Toeplitz covariance is not positive semidefinite"
                ) from exc
    return cov


class NoiseSynthesizer:
    """Reusable sampler of zero-mean Gaussian vectors with a Toeplitz covariance.

    Precomputes the circulant embedding (or the Cholesky fallback) once so
    Monte Carlo loops pay only the per-draw FFT. Draws are deterministic
    given a seed; per-trial streams should derive from ``(seed, trial)``.
    """

    def __init__(self, model: NoiseModel, n: int):
        if model.n_lags < n - 1:
            raise DimensionMismatchError(
                f"model tabulates {model.n_lags} lags, need {n - 1} for size {n}"
            )
        self.model = model
        self.n = int(n)
        r = model.correlation_[: self.n]
        self._real_noise = bool(np.max(np.abs(r.imag)) <= 1e-14 * max(abs(r[0]), 1e-300))
        self._eigs: np.ndarray | None = None
        self._chol: np.ndarray | None = None
        if self.n == 1:
            self._eigs = np.array([max(r[0].real, 0.0)])
            return
        circ = np.concatenate([r, np.conj(r[-2:0:-1])])
        eigs = np.fft.fft(circ)
        eigs_real = eigs.real
        tol = 1e-10 * max(float(np.max(eigs_real)), 0.0)
        if float(np.min(eigs_real)) >= -tol and float(np.max(np.abs(eigs.imag))) <= tol + 1e-30:
            self._eigs = np.clip(eigs_real, 0.0, None)
            return
        try:
            cov = build_covariance(model, self.n).dense()
            jitter = 1e-10 * max(model.variance, 0.0)
            self._chol = np.linalg.cholesky(cov + jitter * np.eye(self.n))
        except (np.linalg.LinAlgError, NotPositiveSemidefiniteError) as exc:
            raise EmbeddingFailedError(
                "circulant embedding is indefinite and Cholesky fallback failed"
            ) from exc

    def draw(self, seed) -> SampledSignal:
        """One noise vector; ``seed`` is anything ``default_rng`` accepts."""
        rng = np.random.default_rng(seed)
        if self._eigs is not None:
            m = self._eigs.shape[0]
            w = np.sqrt(self._eigs) * (
                rng.standard_normal(m) + 1j * rng.standard_normal(m)
            )
            y = np.sqrt(m) * np.fft.ifft(w)
            e = y[: self.n].real if self._real_noise else y[: self.n] / np.sqrt(2.0)
        else:
            if self._real_noise:
                e = self._chol @ rng.standard_normal(self.n)
            else:
                z = rng.standard_normal(self.n) + 1j * rng.standard_normal(self.n)
                e = self._chol @ (z / np.sqrt(2.0))
        return SampledSignal(values=np.asarray(e, dtype=complex), dt=self.model.dt)


def synthesize_noise(model: NoiseModel, n: int, seed) -> SampledSignal:
    """Zero-mean Gaussian vector with covariance ``build_covariance(model, n)``."""
    return NoiseSynthesizer(model, n).draw(seed)
