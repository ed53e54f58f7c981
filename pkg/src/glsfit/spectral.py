"""Discrete-time Fourier analysis on finite-support sequences.

Conventions:

* DTFT with the ``dt`` prefactor: ``F{G}_l(f) = dt * sum_k G_kl exp(-i 2 pi k f dt)``.
* Band integrals run over the Nyquist band ``[-1/(2 dt), +1/(2 dt))`` on a
  uniform M-point grid; the quadrature weight is ``1/(M dt)`` (periodic
  trapezoid, exact for trigonometric polynomials of degree < M).
* Sequences are stored as a finite block plus an integer support start;
  entries outside the block are exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, GridTooCoarseError, SpectralZeroError
from .validation import as_complex_matrix

__all__ = [
    "Spectrum",
    "ZeroExtendedSequence",
    "zero_extend",
    "frequency_grid",
    "band_integral",
    "dtft",
    "idtft",
    "matrix_scalar_product",
    "parseval_product",
    "gen_convolve",
    "gen_deconvolve",
]

DEFAULT_GRID_FACTOR = 8
SPECTRAL_FLOOR_REL = 1e-10


@dataclass(frozen=True)
class ZeroExtendedSequence:
    """Finite block of a sequence on the integers, zero outside the block."""

    entries: np.ndarray
    support_start: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", as_complex_matrix(self.entries, "entries"))

    @property
    def support_end(self) -> int:
        return self.support_start + self.entries.shape[0] - 1

    @property
    def length(self) -> int:
        return self.entries.shape[0]

    @property
    def columns(self) -> int:
        return self.entries.shape[1]

    @property
    def indices(self) -> np.ndarray:
        return self.support_start + np.arange(self.length)

    def restricted(self, start: int, end: int) -> "ZeroExtendedSequence":
        """Block on ``[start, end]``; positions outside the support are zero."""
        if end < start:
            raise DimensionMismatchError(f"empty restriction [{start}, {end}]")
        out = np.zeros((end - start + 1, self.columns), dtype=complex)
        lo = max(start, self.support_start)
        hi = min(end, self.support_end)
        if lo <= hi:
            out[lo - start : hi - start + 1] = self.entries[
                lo - self.support_start : hi - self.support_start + 1
            ]
        return ZeroExtendedSequence(entries=out, support_start=start)

    def column(self, l: int) -> "ZeroExtendedSequence":
        return ZeroExtendedSequence(self.entries[:, [l]], self.support_start)


def zero_extend(values, support_start: int = 1) -> ZeroExtendedSequence:
    """Wrap a vector or matrix as a sequence supported from ``support_start``."""
    return ZeroExtendedSequence(entries=np.asarray(values, dtype=complex),
                                support_start=support_start)


@dataclass(frozen=True)
class Spectrum:
    """Complex spectrum sampled on a uniform grid over the Nyquist band."""

    freqs: np.ndarray
    values: np.ndarray
    dt: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", as_complex_matrix(self.values, "spectrum values"))
        freqs = np.asarray(self.freqs, dtype=float)
        object.__setattr__(self, "freqs", freqs)
        if freqs.shape[0] != self.values.shape[0]:
            raise DimensionMismatchError("one frequency per spectrum row required")
        if np.any(np.diff(freqs) <= 0):
            raise DimensionMismatchError("frequencies must be strictly increasing")

    @property
    def n_grid(self) -> int:
        return self.freqs.shape[0]


def frequency_grid(dt: float, n_grid: int) -> np.ndarray:
    """Uniform grid of ``n_grid`` frequencies on ``[-1/(2 dt), +1/(2 dt))``."""
    if n_grid < 1:
        raise GridTooCoarseError("frequency grid needs at least one point")
    return -0.5 / dt + np.arange(n_grid) / (n_grid * dt)


def band_integral(values: np.ndarray, dt: float) -> np.ndarray | complex:
    """Integrate grid samples over the Nyquist band (periodic trapezoid)."""
    values = np.asarray(values)
    n_grid = values.shape[0]
    return values.sum(axis=0) / (n_grid * dt)


def _resolve_grid(support_length: int, n_grid: int | None, grid_factor: int) -> int:
    m = int(n_grid) if n_grid is not None else grid_factor * support_length
    if m < support_length:
        raise GridTooCoarseError(
            f"grid of {m} points cannot resolve a support of {support_length}"
        )
    return m


def dtft(
    seq: ZeroExtendedSequence,
    dt: float,
    n_grid: int | None = None,
    grid_factor: int = DEFAULT_GRID_FACTOR,
) -> Spectrum:
    """DTFT of a finite-support sequence, evaluated exactly on the grid.

    Direct evaluation of ``dt * sum_k G_kl exp(-i 2 pi k f dt)``; the grid
    defaults to ``grid_factor`` times the support length.
    """
    m = _resolve_grid(seq.length, n_grid, grid_factor)
    freqs = frequency_grid(dt, m)
    phases = np.exp(-2j * np.pi * np.outer(freqs, seq.indices * dt))
    return Spectrum(freqs=freqs, values=dt * (phases @ seq.entries), dt=dt)


def idtft(spectrum: Spectrum, k_start: int, k_end: int) -> ZeroExtendedSequence:
    """Inverse DTFT onto integer lags ``k_start..k_end`` by band quadrature."""
    if k_end < k_start:
        raise DimensionMismatchError("k_end must not precede k_start")
    k = np.arange(k_start, k_end + 1)
    phases = np.exp(2j * np.pi * np.outer(k * spectrum.dt, spectrum.freqs))
    entries = (phases @ spectrum.values) / (spectrum.n_grid * spectrum.dt)
    return ZeroExtendedSequence(entries=entries, support_start=k_start)


def matrix_scalar_product(a: ZeroExtendedSequence, b: ZeroExtendedSequence) -> np.ndarray:
    """Time-domain product ``out[k, l] = sum_j conj(A_jk) B_jl``."""
    lo = max(a.support_start, b.support_start)
    hi = min(a.support_end, b.support_end)
    if hi < lo:
        return np.zeros((a.columns, b.columns), dtype=complex)
    a_block = a.restricted(lo, hi).entries
    b_block = b.restricted(lo, hi).entries
    return a_block.conj().T @ b_block


def parseval_product(
    a: ZeroExtendedSequence,
    b: ZeroExtendedSequence,
    dt: float,
    n_grid: int | None = None,
    grid_factor: int = DEFAULT_GRID_FACTOR,
) -> np.ndarray:
    """Frequency-domain evaluation of :func:`matrix_scalar_product`.

    ``out[k, l] = (1/dt) * integral of conj(F{A}_k) F{B}_l`` over the band.
    """
    m = _resolve_grid(max(a.length, b.length), n_grid, grid_factor)
    fa = dtft(a, dt, n_grid=m)
    fb = dtft(b, dt, n_grid=m)
    integrand = fa.values.conj()[:, :, None] * fb.values[:, None, :]
    return np.asarray(band_integral(integrand, dt)) / dt


def gen_convolve(q: ZeroExtendedSequence, x: ZeroExtendedSequence) -> ZeroExtendedSequence:
    """Generalized convolution ``out_kl = sum_i q_{k-i} x_il``.

    The output support is the Minkowski sum of the operand supports.
    """
    if q.columns != 1:
        raise DimensionMismatchError("convolution kernel must have a single column")
    kernel = q.entries[:, 0]
    cols = [np.convolve(kernel, x.entries[:, l]) for l in range(x.columns)]
    return ZeroExtendedSequence(
        entries=np.column_stack(cols),
        support_start=q.support_start + x.support_start,
    )


def gen_deconvolve(
    q: ZeroExtendedSequence,
    y: ZeroExtendedSequence,
    pad: int,
    grid_factor: int = DEFAULT_GRID_FACTOR,
    dt: float = 1.0,
) -> ZeroExtendedSequence:
    """Apply the inverse of the generalized convolution by kernel ``q``.

    The inverse kernel is the inverse DTFT of ``dt^2 / F{q}``, truncated to
    the lags needed to populate the support of ``y`` widened by ``pad`` on
    both sides. The truncation length is the accuracy knob: the roundtrip
    defect of ``gen_convolve(q, gen_deconvolve(q, y, pad))`` on the support
    of ``y`` decreases as ``pad`` grows.

    Raises
    ------
    SpectralZeroError
        If ``|F{q}|`` dips below ``1e-10`` of its maximum on the grid.
    """
    if q.columns != 1:
        raise DimensionMismatchError("deconvolution kernel must have a single column")
    if pad < 0:
        raise DimensionMismatchError("pad must be nonnegative")
    out_start = y.support_start - pad
    out_end = y.support_end + pad
    max_lag = pad + y.length - 1
    n_lags = 2 * max_lag + 1
    m = _resolve_grid(max(n_lags, q.length), None, grid_factor)
    fq = dtft(q, dt, n_grid=m).values[:, 0]
    peak = float(np.max(np.abs(fq)))
    if peak == 0.0 or float(np.min(np.abs(fq))) < SPECTRAL_FLOOR_REL * peak:
        raise SpectralZeroError(
            "kernel spectrum has an in-band null; generalized convolution is not invertible"
        )
    inverse_spectrum = Spectrum(
        freqs=frequency_grid(dt, m), values=(dt * dt / fq)[:, None], dt=dt
    )
    w = idtft(inverse_spectrum, -max_lag, max_lag)
    return gen_convolve(w, y).restricted(out_start, out_end)
