"""Measurement model: sampled signals, design matrices, weighted fitting.

A deterministic signal sampled at times ``k * dt`` (``k`` starting at
``origin_index``) is modeled as a linear combination of basis functions,
``s_k = sum_l x_l f_l(k * dt)``. Fitting minimizes ``|m - X x|`` in the norm
induced by a Hermitian positive-definite weight matrix. The default solve
path goes through the weighted Gram-Schmidt factorization instead of forming
and inverting normal equations; the explicit normal-equation route is kept
behind a flag for cross-checking.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatchError,
    InvalidBasisError,
    RankDeficientError,
)
from .linalg import orthonormalize
from .validation import (
    EPS,
    as_complex_matrix,
    as_complex_vector,
    check_hermitian,
    check_positive_definite,
    check_same_length,
    consistent_dt,
    hermitian_part,
    validate_covariance,
)

__all__ = [
    "SampledSignal",
    "DesignMatrix",
    "WeightMatrix",
    "Estimate",
    "BasisFunction",
    "constant",
    "polynomial",
    "sinusoid",
    "tabulated",
    "basis_from_spec",
    "build_design_matrix",
    "weighted_inner",
    "weighted_least_squares",
    "sandwich_covariance",
]


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled complex time series.

    Sample ``k`` (``k = origin_index, origin_index + 1, ...``) is the value at
    time ``k * dt``.
    """

    values: np.ndarray
    dt: float
    origin_index: int = 1

    def __post_init__(self) -> None:
        vals = as_complex_vector(self.values, "signal values")
        object.__setattr__(self, "values", vals)
        if vals.shape[0] < 1:
            raise DimensionMismatchError("signal must contain at least one sample")
        if not self.dt > 0:
            raise DimensionMismatchError(f"dt must be positive, got {self.dt}")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return (self.origin_index + np.arange(self.n_samples)) * self.dt


@dataclass(frozen=True)
class DesignMatrix:
    """Matrix of basis-function samples, column ``l`` holding ``f_l(k * dt)``.

    Full column rank is verified at construction; the numerical rank uses a
    singular-value cutoff of ``n * eps * sigma_max``.
    """

    entries: np.ndarray
    dt: float
    basis_labels: tuple[str, ...]
    origin_index: int = 1

    def __post_init__(self) -> None:
        entries = as_complex_matrix(self.entries, "design entries")
        object.__setattr__(self, "entries", entries)
        n, p = entries.shape
        if not (1 <= p <= n):
            raise DimensionMismatchError(f"need 1 <= p <= n, got n={n}, p={p}")
        if not self.dt > 0:
            raise DimensionMismatchError(f"dt must be positive, got {self.dt}")
        if len(self.basis_labels) != p:
            raise DimensionMismatchError("one label per column required")
        sv = np.linalg.svd(entries, compute_uv=False)
        rank = int(np.sum(sv > n * EPS * sv[0])) if sv[0] > 0 else 0
        if rank < p:
            raise RankDeficientError(f"design has numerical rank {rank} < {p} columns")
        object.__setattr__(self, "_singular_values", sv)

    @property
    def n_samples(self) -> int:
        return self.entries.shape[0]

    @property
    def n_parameters(self) -> int:
        return self.entries.shape[1]

    @property
    def rank(self) -> int:
        return self.entries.shape[1]

    @property
    def condition_number(self) -> float:
        sv = self._singular_values
        return float(sv[0] / sv[-1])


@dataclass(frozen=True)
class WeightMatrix:
    """Hermitian positive-definite weight defining the fitting metric."""

    entries: np.ndarray
    kind: str = "custom"

    def __post_init__(self) -> None:
        entries = as_complex_matrix(self.entries, "weight entries")
        object.__setattr__(self, "entries", entries)
        check_hermitian(entries, rtol=1e-12, name="weight matrix")
        check_positive_definite(entries, "weight matrix")

    @classmethod
    def identity(cls, n: int) -> "WeightMatrix":
        return cls(entries=np.eye(n, dtype=complex), kind="identity")

    @classmethod
    def from_inverse_covariance(cls, cov) -> "WeightMatrix":
        """Weight ``P = cov^{-1}``, computed through a Cholesky solve."""
        cov = as_complex_matrix(cov, "covariance")
        cho = scipy.linalg.cho_factor(cov)
        inv = scipy.linalg.cho_solve(cho, np.eye(cov.shape[0], dtype=complex))
        return cls(entries=hermitian_part(inv), kind="inverse_covariance")

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Estimate:
    """Fitted parameters with diagnostics.

    ``covariance`` stays None until a noise description is supplied (see
    :func:`sandwich_covariance`); when set it must be Hermitian PSD within
    the reporting tolerances.
    """

    x_star: np.ndarray
    covariance: np.ndarray | None
    method: str
    residual_norm: float
    condition_number: float
    solve_path: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "x_star", as_complex_vector(self.x_star, "x_star"))
        if self.covariance is not None:
            object.__setattr__(
                self, "covariance", validate_covariance(self.covariance)
            )

    @property
    def stderr(self) -> np.ndarray | None:
        """Standard errors ``sqrt(V_ii)``, or None without a covariance."""
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diagonal(self.covariance).real, 0.0, None))

    def with_covariance(self, covariance: np.ndarray) -> "Estimate":
        return dataclasses.replace(self, covariance=covariance)


# ---------------------------------------------------------------------------
# Basis functions and design construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BasisFunction:
    """One column of the design: either a callable of time or raw samples."""

    label: str
    fn: Callable[[np.ndarray], np.ndarray] | None = None
    samples: np.ndarray | None = None

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        if self.samples is not None:
            samples = np.asarray(self.samples, dtype=complex)
            if samples.shape[0] != times.shape[0]:
                raise InvalidBasisError(
                    f"basis '{self.label}' has {samples.shape[0]} samples, "
                    f"need {times.shape[0]}"
                )
            return samples
        try:
            out = np.asarray(self.fn(times), dtype=complex)
        except Exception as exc:
            raise InvalidBasisError(f"basis '{self.label}' failed to evaluate: {exc}") from exc
        if out.shape != times.shape:
            raise InvalidBasisError(
                f"basis '{self.label}' returned shape {out.shape}, expected {times.shape}"
            )
        return out


def constant(value: complex = 1.0) -> BasisFunction:
    label = "constant" if value == 1.0 else f"constant({value})"
    return BasisFunction(label=label, fn=lambda t: np.full_like(t, value, dtype=complex))


def polynomial(degree: int) -> BasisFunction:
    if degree < 0:
        raise InvalidBasisError("polynomial degree must be nonnegative")
    return BasisFunction(label=f"t^{degree}", fn=lambda t: t.astype(complex) ** degree)


def sinusoid(frequency: float, phase: float = 0.0) -> BasisFunction:
    return BasisFunction(
        label=f"sin(2*pi*{frequency:g}*t{'+%g' % phase if phase else ''})",
        fn=lambda t: np.sin(2.0 * np.pi * frequency * t + phase).astype(complex),
    )


def tabulated(values, label: str = "tabulated") -> BasisFunction:
    return BasisFunction(label=label, samples=np.asarray(values, dtype=complex))


def basis_from_spec(spec) -> BasisFunction:
    """Build a basis function from a JSON-style dict, callable, or array."""
    if isinstance(spec, BasisFunction):
        return spec
    if callable(spec):
        return BasisFunction(label=getattr(spec, "__name__", "callable"), fn=spec)
    if isinstance(spec, (list, tuple, np.ndarray)):
        return tabulated(spec)
    if isinstance(spec, dict):
        kind = spec.get("type")
        if kind == "constant":
            return constant(spec.get("value", 1.0))
        if kind == "polynomial":
            return polynomial(int(spec["degree"]))
        if kind == "sinusoid":
            return sinusoid(float(spec["frequency"]), float(spec.get("phase", 0.0)))
        if kind == "tabulated":
            return tabulated(spec["values"])
        raise InvalidBasisError(f"unknown basis type {kind!r}")
    raise InvalidBasisError(f"cannot interpret basis spec of type {type(spec).__name__}")


def build_design_matrix(
    basis: Sequence, n_samples: int, dt: float, origin_index: int = 1
) -> DesignMatrix:
    """Sample ``p`` basis functions at ``t = k * dt`` into an ``n x p`` design.

    Raises
    ------
    RankDeficientError
        If the sampled columns are numerically rank deficient.
    InvalidBasisError
        If a basis spec cannot be evaluated on the time grid.
    """
    if n_samples < 1 or len(basis) < 1:
        raise DimensionMismatchError("need n_samples >= 1 and at least one basis function")
    times = (origin_index + np.arange(n_samples)) * float(dt)
    funcs = [basis_from_spec(b) for b in basis]
    columns = [f.evaluate(times) for f in funcs]
    return DesignMatrix(
        entries=np.column_stack(columns),
        dt=float(dt),
        basis_labels=tuple(f.label for f in funcs),
        origin_index=origin_index,
    )


# ---------------------------------------------------------------------------
# Weighted scalar product and least squares
# ---------------------------------------------------------------------------


def _weight_entries(weights) -> np.ndarray | None:
    if weights is None:
        return None
    if isinstance(weights, WeightMatrix):
        return weights.entries
    return WeightMatrix(entries=np.asarray(weights, dtype=complex)).entries


def _design_entries(design) -> tuple[np.ndarray, float | None, int]:
    if isinstance(design, DesignMatrix):
        return design.entries, design.dt, design.origin_index
    return as_complex_matrix(design, "design"), None, 1


def _signal_values(signal) -> tuple[np.ndarray, float | None, int]:
    if isinstance(signal, SampledSignal):
        return signal.values, signal.dt, signal.origin_index
    return as_complex_vector(signal, "signal"), None, 1


def weighted_inner(y, z, weights=None) -> complex:
    """Weighted scalar product ``y' P z`` (``y'`` the conjugate transpose)."""
    yv = as_complex_vector(y, "y")
    zv = as_complex_vector(z, "z")
    check_same_length(yv, zv, "y", "z")
    p = _weight_entries(weights)
    if p is not None and p.shape[0] != yv.shape[0]:
        raise DimensionMismatchError(
            f"weight has size {p.shape[0]}, vectors have length {yv.shape[0]}"
        )
    return complex(np.vdot(yv, zv if p is None else p @ zv))


def weighted_least_squares(
    design,
    signal,
    weights=None,
    solve_path: str = "gram_schmidt",
) -> Estimate:
    """Minimize ``|m - X x|`` in the metric of ``weights``.

    Parameters
    ----------
    design : DesignMatrix or array_like, shape (n, p)
    signal : SampledSignal or array_like, shape (n,)
    weights : WeightMatrix or array_like, optional
        Hermitian positive-definite metric; identity when omitted.
    solve_path : {"gram_schmidt", "normal_equations"}
        Default goes through the weighted Gram-Schmidt factorization; the
        explicit normal-equation solve is retained for cross-checks.

    Returns
    -------
    Estimate
        With ``covariance`` unset; attach one via :func:`sandwich_covariance`.
    """
    x_mat, dt_x, _ = _design_entries(design)
    y_vec, dt_y, _ = _signal_values(signal)
    consistent_dt(dt_x, dt_y)
    check_same_length(x_mat, y_vec, "design", "signal")
    p_mat = _weight_entries(weights)
    if p_mat is not None and p_mat.shape[0] != x_mat.shape[0]:
        raise DimensionMismatchError("weight size does not match the design")

    method = "ols" if p_mat is None or _is_identity(weights) else "wls"
    py = y_vec if p_mat is None else p_mat @ y_vec
    if solve_path == "gram_schmidt":
        ortho = orthonormalize(x_mat, weights=p_mat)
        z = ortho.basis.conj().T @ py
        coeffs = scipy.linalg.solve_triangular(ortho.r_factor, z)
        cond = ortho.condition_number
    elif solve_path == "normal_equations":
        a = hermitian_part(x_mat.conj().T @ (x_mat if p_mat is None else p_mat @ x_mat))
        sv = np.linalg.svd(a, compute_uv=False)
        if sv[-1] <= x_mat.shape[0] * EPS * sv[0]:
            raise RankDeficientError("normal matrix is numerically singular")
        coeffs = np.linalg.solve(a, x_mat.conj().T @ py)
        cond = float(sv[0] / sv[-1])
    else:
        raise ValueError(f"unknown solve_path {solve_path!r}")

    resid = y_vec - x_mat @ coeffs
    rnorm = float(np.sqrt(max(weighted_inner(resid, resid, weights).real, 0.0)))
    return Estimate(
        x_star=coeffs,
        covariance=None,
        method=method,
        residual_norm=rnorm,
        condition_number=cond,
        solve_path=solve_path,
    )


def _is_identity(weights) -> bool:
    return isinstance(weights, WeightMatrix) and weights.kind == "identity"


def sandwich_covariance(design, noise_covariance, weights=None) -> np.ndarray:
    """Parameter covariance of the weighted estimator under a noise covariance.

    Evaluates ``(X'PX)^{-1} X'P Omega P X (X'PX)^{-1}`` through the
    Gram-Schmidt factorization; with ``P = Omega^{-1}`` this collapses to
    ``(X' Omega^{-1} X)^{-1}``.
    """
    x_mat, _, _ = _design_entries(design)
    omega = as_complex_matrix(noise_covariance, "noise covariance")
    if omega.shape[0] != x_mat.shape[0]:
        raise DimensionMismatchError("noise covariance size does not match the design")
    check_hermitian(omega, rtol=1e-10, name="noise covariance")
    p_mat = _weight_entries(weights)

    ortho = orthonormalize(x_mat, weights=p_mat)
    pq = ortho.basis if p_mat is None else p_mat @ ortho.basis
    middle = pq.conj().T @ (omega @ pq)
    cov = ortho.change_of_basis @ middle @ ortho.change_of_basis.conj().T
    return validate_covariance(hermitian_part(cov))
