"""Single-template amplitude estimation and matched filtering.

For one basis column ``g`` the frequency-domain estimator collapses to band
integrals weighted by the inverse noise density:

``x* = (int |F{g}|^2 / S)^{-1} * int conj(F{g}) F{m} / S``,
``V  = (int |F{g}|^2 / S)^{-1}``.

The matched filter realizes the same estimate as a linear filter with
spectrum ``K conj(F{g}) / S * exp(-i 2 pi f t0)``; with the gain ``K`` set to
the estimator variance, the filter output at the alignment time equals the
amplitude estimate. The sensitivity helper quantifies the variance excess
incurred by processing with a perturbed density ``S + eps * w``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    GridMismatchError,
    GridTooCoarseError,
    PerturbationTooLargeError,
    SpectralZeroError,
)
from .model import Estimate, _signal_values
from .noise import NoiseModel, psd_from_spec
from .spectral import Spectrum, band_integral, dtft, frequency_grid, zero_extend, ZeroExtendedSequence
from .validation import consistent_dt

__all__ = [
    "MatchedFilter",
    "MismatchReport",
    "spectral_amplitude_fit",
    "matched_filter_gain",
    "build_matched_filter",
    "apply_filter",
    "psd_mismatch_variance",
]


def _template_sequence(template, origin: int = 1) -> ZeroExtendedSequence:
    if isinstance(template, ZeroExtendedSequence):
        if template.columns != 1:
            raise DimensionMismatchError("template must have a single column")
        return template
    values, _, origin_t = _signal_values(template)
    return zero_extend(values, origin_t if origin is None else origin)


def _band_setup(template, noise: NoiseModel, n_grid, grid_factor, signal=None):
    """Common grid, template spectrum, data spectrum and floored density."""
    g_seq = _template_sequence(template)
    y_vec = None
    origin_y = 1
    if signal is not None:
        y_vec, dt_y, origin_y = _signal_values(signal)
        consistent_dt(dt_y, noise.dt)
        n = y_vec.shape[0]
        if not (origin_y <= g_seq.support_start and g_seq.support_end <= origin_y + n - 1):
            raise DimensionMismatchError("template support must lie inside the observation window")
    dt = noise.dt
    support = g_seq.length if y_vec is None else max(g_seq.length, y_vec.shape[0])
    m = int(n_grid) if n_grid is not None else grid_factor * support
    if m < support:
        raise GridTooCoarseError(f"grid of {m} points cannot resolve a support of {support}")
    fg = dtft(g_seq, dt, n_grid=m).values[:, 0]
    freqs = frequency_grid(dt, m)
    s = noise.psd_values(freqs)
    if not np.all(s > 0):
        raise SpectralZeroError("noise density vanishes on the band")
    fy = None
    if y_vec is not None:
        fy = dtft(zero_extend(y_vec, origin_y), dt, n_grid=m).values[:, 0]
    return g_seq, freqs, fg, s, fy, dt


def spectral_amplitude_fit(
    template,
    signal,
    noise: NoiseModel,
    n_grid: int | None = None,
    grid_factor: int = 8,
) -> Estimate:
    """Amplitude of one template in noisy data, fitted on the frequency grid.

    Parameters
    ----------
    template : ZeroExtendedSequence, SampledSignal or array_like
        Template samples; support must lie inside the observation window.
    signal : SampledSignal or array_like
        Measured data.
    noise : NoiseModel
        Density ``S`` used as the inverse weight.

    Returns
    -------
    Estimate
        Single-parameter estimate with variance ``(int |F{g}|^2 / S)^{-1}``.
    """
    g_seq, freqs, fg, s, fy, dt = _band_setup(template, noise, n_grid, grid_factor, signal)
    denom = float(np.real(band_integral(np.abs(fg) ** 2 / s, dt)))
    if denom <= 0:
        raise SpectralZeroError("template spectrum carries no in-band weight")
    numer = complex(band_integral(fg.conj() * fy / s, dt))
    amplitude = numer / denom
    y_vec, _, origin_y = _signal_values(signal)
    g_window = g_seq.restricted(origin_y, origin_y + y_vec.shape[0] - 1).entries[:, 0]
    resid = float(np.linalg.norm(y_vec - amplitude * g_window))
    return Estimate(
        x_star=np.array([amplitude]),
        covariance=np.array([[1.0 / denom]], dtype=complex),
        method="matched_filter",
        residual_norm=resid,
        condition_number=1.0,
        solve_path="band_quadrature",
    )


def matched_filter_gain(
    template,
    noise: NoiseModel,
    n_grid: int | None = None,
    grid_factor: int = 8,
) -> float:
    """Unit-response gain ``K = (int |F{g}|^2 / S df)^{-1}``.

    Identical to the variance reported by :func:`spectral_amplitude_fit` on
    the same grid.
    """
    _, _, fg, s, _, dt = _band_setup(template, noise, n_grid, grid_factor)
    denom = float(np.real(band_integral(np.abs(fg) ** 2 / s, dt)))
    if denom <= 0:
        raise SpectralZeroError("template spectrum carries no in-band weight")
    return 1.0 / denom


@dataclass(frozen=True)
class MatchedFilter:
    """Filter maximizing output signal-to-noise against noise of density S."""

    spectrum: Spectrum
    gain: float
    t0: float = 0.0
    template_label: str = ""

    def apply(self, signal) -> complex:
        return apply_filter(self, signal)


def build_matched_filter(
    template,
    noise: NoiseModel,
    t0: float = 0.0,
    gain: float | None = None,
    n_grid: int | None = None,
    grid_factor: int = 8,
    template_label: str = "",
) -> MatchedFilter:
    """Matched filter ``F{h} = K conj(F{g}) / S * exp(-i 2 pi f t0)``.

    ``gain`` defaults to :func:`matched_filter_gain`, which normalizes the
    response to the template at the alignment time to one.
    """
    _, freqs, fg, s, _, dt = _band_setup(template, noise, n_grid, grid_factor)
    if gain is None:
        denom = float(np.real(band_integral(np.abs(fg) ** 2 / s, dt)))
        if denom <= 0:
            raise SpectralZeroError("template spectrum carries no in-band weight")
        gain = 1.0 / denom
    values = gain * fg.conj() / s * np.exp(-2j * np.pi * freqs * t0)
    return MatchedFilter(
        spectrum=Spectrum(freqs=freqs, values=values[:, None], dt=dt),
        gain=float(gain),
        t0=float(t0),
        template_label=template_label,
    )


def apply_filter(filt: MatchedFilter, signal) -> complex:
    """Filter output at the alignment time, by band quadrature.

    With the default gain and ``t0 = 0`` this equals the amplitude estimate
    of :func:`spectral_amplitude_fit` on the same grid.
    """
    y_vec, dt_y, origin_y = _signal_values(signal)
    dt = filt.spectrum.dt
    if dt_y is not None and abs(dt_y - dt) > 1e-9 * dt:
        raise GridMismatchError(f"filter grid step {dt} does not match signal step {dt_y}")
    m = filt.spectrum.n_grid
    if m < y_vec.shape[0]:
        raise GridMismatchError(
            f"filter grid of {m} points cannot resolve {y_vec.shape[0]} samples"
        )
    fy = dtft(zero_extend(y_vec, origin_y), dt, n_grid=m).values[:, 0]
    integrand = filt.spectrum.values[:, 0] * fy * np.exp(2j * np.pi * filt.spectrum.freqs * filt.t0)
    return complex(band_integral(integrand, dt))


# ---------------------------------------------------------------------------
# Sensitivity to a misspecified density
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MismatchReport:
    """Variance bookkeeping for processing with a perturbed density."""

    v_used: float
    v_true: float
    predicted_rel_excess: float
    epsilon: float

    @property
    def measured_rel_excess(self) -> float:
        return (self.v_used - self.v_true) / self.v_true


def evaluate_perturbation(perturbation, freqs: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Evaluate a density perturbation ``w(f)`` on the grid.

    Accepts a callable of frequency, an array matching the grid, a PSD
    family, or a dict: ``{"type": "proportional", "factor": c}`` gives
    ``w = c S``; ``{"type": "sign_modulated", "factor": c, "cycles": k}``
    gives ``w = c S cos(2 pi k f / f_band)``; ``{"type": "tabulated", ...}``
    interpolates pairs like the tabulated PSD.
    """
    if callable(perturbation):
        return np.asarray(perturbation(freqs), dtype=float)
    if isinstance(perturbation, np.ndarray):
        if perturbation.shape != freqs.shape:
            raise DimensionMismatchError("perturbation array must match the frequency grid")
        return perturbation.astype(float)
    if isinstance(perturbation, dict):
        kind = perturbation.get("type")
        if kind == "proportional":
            return float(perturbation.get("factor", 1.0)) * s
        if kind == "sign_modulated":
            factor = float(perturbation.get("factor", 1.0))
            cycles = float(perturbation.get("cycles", 3.0))
            band = freqs[-1] - freqs[0]
            return factor * s * np.cos(2.0 * np.pi * cycles * (freqs - freqs[0]) / band)
        if kind in ("white", "power_law", "tabulated"):
            return np.asarray(psd_from_spec(perturbation).evaluate(freqs, f_min=None),
                              dtype=float)
        raise DimensionMismatchError(f"unknown perturbation type {kind!r}")
    if hasattr(perturbation, "evaluate"):
        return np.asarray(perturbation.evaluate(freqs, f_min=None), dtype=float)
    raise DimensionMismatchError(
        f"cannot interpret perturbation of type {type(perturbation).__name__}"
    )


def psd_mismatch_variance(
    template,
    noise: NoiseModel,
    perturbation,
    epsilon: float,
    n_grid: int | None = None,
    grid_factor: int = 8,
) -> MismatchReport:
    """Variance cost of processing with the density ``S + epsilon * w``.

    ``v_used`` is the exact sampling variance of the estimator built with the
    perturbed density but operating on noise of true density ``S``;
    ``v_true`` is the matched-density variance. ``predicted_rel_excess`` is
    the second-order expansion

    ``eps^2 [ V int (w^2/S^3) |F{g}|^2 - V^2 (int (w/S^2) |F{g}|^2)^2 ]``.

    Raises
    ------
    PerturbationTooLargeError
        If ``|w| > S`` anywhere on the grid.
    """
    if epsilon < 0:
        raise DimensionMismatchError("epsilon must be nonnegative")
    if epsilon > 0.3:
        warnings.warn("epsilon above 0.3: the second-order expansion degrades",
                      stacklevel=2)
    _, freqs, fg, s, _, dt = _band_setup(template, noise, n_grid, grid_factor)
    w = evaluate_perturbation(perturbation, freqs, s)
    if np.any(np.abs(w) > s * (1 + 1e-12)):
        raise PerturbationTooLargeError("perturbation exceeds the density somewhere on the band")

    power = np.abs(fg) ** 2
    i0 = float(np.real(band_integral(power / s, dt)))
    if i0 <= 0:
        raise SpectralZeroError("template spectrum carries no in-band weight")
    v_true = 1.0 / i0

    s_used = s + epsilon * w
    if np.any(s_used <= 0):
        raise SpectralZeroError("perturbed density is not positive on the band")
    a = float(np.real(band_integral(power / s_used, dt)))
    b = float(np.real(band_integral(power * s / s_used**2, dt)))
    v_used = b / a**2

    i_w = float(np.real(band_integral(power * w / s**2, dt)))
    i_w2 = float(np.real(band_integral(power * w**2 / s**3, dt)))
    predicted = epsilon**2 * (v_true * i_w2 - v_true**2 * i_w**2)
    return MismatchReport(
        v_used=v_used, v_true=v_true, predicted_rel_excess=predicted, epsilon=epsilon
    )
