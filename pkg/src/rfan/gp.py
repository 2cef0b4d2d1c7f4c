"""
Exact Gaussian-process regression.

Zero prior mean, RBF or Matern covariance, Gaussian likelihood. Targets are
standardized inside the fit and predictions are mapped back to the original
scale. Hyperparameters are chosen from a fixed finite grid by exact log
marginal likelihood.

Typical use::

    fit = fit_gp(X, y)                 # default grid
    mean, var = predict(fit, X_new)    # vectorized
    draws = sample_posterior(fit, X_new, 100, np.random.default_rng(0))
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from .errors import InputError, NumericalError

JITTER_SCHEDULE = (1e-10, 1e-8, 1e-6)
VARIANCE_FLOOR = 1e-12
STD_FLOOR = 1e-6
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class KernelSpec:
    """Stationary covariance: ``kind`` is ``"rbf"`` or ``"matern"`` (with ``nu``)."""

    kind: str = "rbf"
    lengthscale: float = 1.0
    signal_variance: float = 1.0
    nu: float | None = None

    def __post_init__(self):
        if self.kind not in ("rbf", "matern"):
            raise InputError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "matern" and self.nu not in (0.5, 1.5, 2.5):
            raise InputError(f"Matern nu must be 0.5, 1.5 or 2.5, got {self.nu}")
        if self.kind == "rbf" and self.nu is not None:
            raise InputError("RBF kernel takes no nu")
        if not self.lengthscale > 0:
            raise InputError("lengthscale must be positive")
        if not self.signal_variance > 0:
            raise InputError("signal_variance must be positive")

    @classmethod
    def rbf(cls, lengthscale=1.0, signal_variance=1.0):
        return cls("rbf", lengthscale, signal_variance)

    @classmethod
    def matern(cls, nu, lengthscale=1.0, signal_variance=1.0):
        return cls("matern", lengthscale, signal_variance, nu)

    def label(self) -> str:
        name = "RBF" if self.kind == "rbf" else f"Matern{self.nu}"
        return f"{name}(l={self.lengthscale:g}, s2={self.signal_variance:g})"


def _unit_correlation(kind: str, nu: float | None, r: np.ndarray, lengthscale: float) -> np.ndarray:
    """Kernel with unit signal variance as a function of distance ``r``."""
    if kind == "rbf":
        return np.exp(-0.5 * (r / lengthscale) ** 2)
    s = r / lengthscale
    if nu == 0.5:
        return np.exp(-s)
    if nu == 1.5:
        a = math.sqrt(3.0) * s
        return (1.0 + a) * np.exp(-a)
    a = math.sqrt(5.0) * s
    return (1.0 + a + a * a / 3.0) * np.exp(-a)


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(-1, 1)
    elif X.ndim != 2:
        raise InputError(f"covariates must be at most 2-d, got shape {X.shape}")
    return X


def kernel_matrix(spec: KernelSpec, X1, X2) -> np.ndarray:
    X1, X2 = _as_2d(X1), _as_2d(X2)
    if X1.shape[1] != X2.shape[1]:
        raise InputError(f"dimension mismatch: {X1.shape[1]} vs {X2.shape[1]}")
    r = cdist(X1, X2)
    return spec.signal_variance * _unit_correlation(spec.kind, spec.nu, r, spec.lengthscale)


def kernel_eval(spec: KernelSpec, x1, x2) -> float:
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x1.shape != x2.shape or x1.ndim != 1:
        raise InputError(f"dimension mismatch: {x1.shape} vs {x2.shape}")
    return float(kernel_matrix(spec, x1[None, :], x2[None, :])[0, 0])


def default_grid() -> list[tuple[KernelSpec, float]]:
    """{RBF, Matern-1.5} x lengthscale x signal variance x noise variance (54 points)."""
    grid = []
    for kind, ell, sf2, sn2 in itertools.product(
        ("rbf", "matern1.5"), (0.5, 1.0, 2.0), (0.5, 1.0, 2.0), (0.01, 0.1, 1.0)
    ):
        spec = KernelSpec.rbf(ell, sf2) if kind == "rbf" else KernelSpec.matern(1.5, ell, sf2)
        grid.append((spec, sn2))
    return grid


DEFAULT_GRID = tuple(default_grid())


def _cholesky_with_jitter(A: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(A, lower=True)
    except linalg.LinAlgError:
        pass
    eye = np.eye(A.shape[0])
    for jitter in JITTER_SCHEDULE:
        try:
            return linalg.cholesky(A + jitter * eye, lower=True)
        except linalg.LinAlgError:
            continue
    raise NumericalError(
        f"matrix of size {A.shape[0]} not positive definite after jitter {JITTER_SCHEDULE[-1]:g}"
    )


@dataclass(frozen=True)
class GPFit:
    """A fitted GP. Immutable; arrays are read-only.

    ``train_targets`` are on the original scale; ``weight_vector`` and
    ``chol_factor`` refer to the standardized targets
    ``(y - y_mean) / y_scale``.
    """

    train_inputs: np.ndarray
    train_targets: np.ndarray
    kernel: KernelSpec
    noise_variance: float
    chol_factor: np.ndarray
    weight_vector: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0
    log_marginal_likelihood: float = field(default=float("nan"))

    @property
    def n(self) -> int:
        return self.train_inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.train_inputs.shape[1]

    @property
    def noise_variance_original(self) -> float:
        """Observation-noise variance expressed on the target scale."""
        return self.noise_variance * self.y_scale**2


def _standardize(y: np.ndarray, normalize: bool) -> tuple[np.ndarray, float, float]:
    if not normalize:
        return y, 0.0, 1.0
    mu = float(y.mean())
    scale = max(float(y.std()), STD_FLOOR)
    return (y - mu) / scale, mu, scale


def _check_data(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = _as_2d(X)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise InputError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
    if X.shape[0] < 1:
        raise InputError("need at least one training point")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputError("training data contains non-finite values")
    return X, y


def _build_fit(X, y, z, mu, scale, spec, noise, L=None, corr=None) -> GPFit:
    if L is None:
        if corr is None:
            corr = _unit_correlation(spec.kind, spec.nu, cdist(X, X), spec.lengthscale)
        K = spec.signal_variance * corr
        K[np.diag_indices_from(K)] += noise
        L = _cholesky_with_jitter(K)
    alpha = linalg.cho_solve((L, True), z)
    lml = -0.5 * z @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(z) * _LOG_2PI
    for arr in (X, y, L, alpha):
        arr.setflags(write=False)
    return GPFit(X, y, spec, float(noise), L, alpha, mu, scale, float(lml))


def fit_gp_fixed(X, y, kernel: KernelSpec, noise_variance: float, normalize: bool = True) -> GPFit:
    """Fit with given hyperparameters (no selection)."""
    if not noise_variance > 0:
        raise InputError("noise_variance must be positive")
    X, y = _check_data(X, y)
    z, mu, scale = _standardize(y, normalize)
    return _build_fit(X.copy(), y.copy(), z, mu, scale, kernel, noise_variance)


def fit_gp(
    X,
    y,
    grid: Iterable[tuple[KernelSpec, float]] = DEFAULT_GRID,
    normalize: bool = True,
) -> GPFit:
    """Return the grid candidate with the highest exact log marginal likelihood.

    Ties go to the earliest grid entry. Distances and per-lengthscale
    correlation matrices are shared across candidates.
    """
    grid = list(grid)
    if not grid:
        raise InputError("hyperparameter grid is empty")
    X, y = _check_data(X, y)
    z, mu, scale = _standardize(y, normalize)
    r = cdist(X, X)
    corr_cache: dict[tuple, np.ndarray] = {}
    best = None
    best_lml = -np.inf
    for spec, noise in grid:
        key = (spec.kind, spec.nu, spec.lengthscale)
        if key not in corr_cache:
            corr_cache[key] = _unit_correlation(spec.kind, spec.nu, r, spec.lengthscale)
        K = spec.signal_variance * corr_cache[key]
        K[np.diag_indices_from(K)] += noise
        L = _cholesky_with_jitter(K)
        alpha = linalg.cho_solve((L, True), z)
        lml = -0.5 * z @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(z) * _LOG_2PI
        if best is None or lml > best_lml:
            best, best_lml = (spec, noise, L), lml
    spec, noise, L = best
    return _build_fit(X.copy(), y.copy(), z, mu, scale, spec, noise, L=L)


def predict(fit: GPFit, Xs, full_cov: bool = False):
    """Posterior mean and variance of the latent function at ``Xs``.

    Returns arrays on the original target scale. With ``full_cov`` the
    second value is the joint covariance matrix instead of the diagonal.
    """
    Xs = _as_2d(Xs)
    if Xs.shape[1] != fit.dim:
        raise InputError(f"dimension mismatch: model has {fit.dim}, query has {Xs.shape[1]}")
    Ks = kernel_matrix(fit.kernel, fit.train_inputs, Xs)
    mean = Ks.T @ fit.weight_vector
    V = linalg.solve_triangular(fit.chol_factor, Ks, lower=True)
    s2 = fit.y_scale**2
    mean = fit.y_mean + fit.y_scale * mean
    if full_cov:
        cov = kernel_matrix(fit.kernel, Xs, Xs) - V.T @ V
        cov = 0.5 * (cov + cov.T)
        return mean, s2 * cov
    var = fit.kernel.signal_variance - np.einsum("ij,ij->j", V, V)
    return mean, np.maximum(s2 * var, VARIANCE_FLOOR)


def posterior(fit: GPFit, x) -> tuple[float, float]:
    mean, var = predict(fit, np.atleast_1d(np.asarray(x, dtype=float))[None, :])
    return float(mean[0]), float(var[0])


def sample_posterior(fit: GPFit, Xs, n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """Joint posterior function draws, shape ``(n_draws, len(Xs))``."""
    if n_draws < 1:
        raise InputError("n_draws must be >= 1")
    mean, cov = predict(fit, Xs, full_cov=True)
    L = _cholesky_with_jitter(cov)
    z = rng.standard_normal((n_draws, mean.shape[0]))
    return mean[None, :] + z @ L.T


__all__: Sequence[str] = [
    "KernelSpec",
    "GPFit",
    "DEFAULT_GRID",
    "default_grid",
    "kernel_eval",
    "kernel_matrix",
    "fit_gp",
    "fit_gp_fixed",
    "predict",
    "posterior",
    "sample_posterior",
]
