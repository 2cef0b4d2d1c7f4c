"""T-learner causal posterior: one exact GP per arm."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gp
from .errors import FitError, InputError


@dataclass(frozen=True)
class CausalPosterior:
    gp_arm0: gp.GPFit
    gp_arm1: gp.GPFit

    def arm(self, w: int) -> gp.GPFit:
        return self.gp_arm1 if w == 1 else self.gp_arm0

    def predict_arm(self, X, w: int):
        return gp.predict(self.arm(w), X)

    @property
    def noise_variances(self) -> tuple[float, float]:
        return self.gp_arm0.noise_variance_original, self.gp_arm1.noise_variance_original


def _split_arms(X, w, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    w = np.asarray(w).astype(int)
    y = np.asarray(y, dtype=float)
    if not (X.shape[0] == w.shape[0] == y.shape[0]):
        raise InputError("X, w and y lengths differ")
    out = []
    for arm in (0, 1):
        m = w == arm
        if not m.any():
            raise FitError(f"arm {arm} has no observations")
        out.append((X[m], y[m]))
    return out


def fit_causal(X, w, y, grid=gp.DEFAULT_GRID) -> CausalPosterior:
    """Fit each arm's GP on its own observations, selecting by marginal likelihood."""
    (X0, y0), (X1, y1) = _split_arms(X, w, y)
    return CausalPosterior(gp.fit_gp(X0, y0, grid), gp.fit_gp(X1, y1, grid))


def _validation_pick(Xtr, ytr, Xva, yva, grid):
    best, best_mse = None, np.inf
    for spec, noise in grid:
        fit = gp.fit_gp_fixed(Xtr, ytr, spec, noise)
        mse = float(np.mean((gp.predict(fit, Xva)[0] - yva) ** 2))
        if mse < best_mse:
            best, best_mse = (spec, noise), mse
    return best


def tune_causal(X, w, y, is_train, grid=gp.DEFAULT_GRID) -> CausalPosterior:
    """Pick hyperparameters per arm by validation MSE, then refit on all data.

    Candidates are fit on the training rows and scored on the validation
    rows of the same arm; summed over arms the criterion separates, so each
    arm is tuned independently. An arm without validation rows falls back
    to marginal-likelihood selection over all of its data.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    w = np.asarray(w).astype(int)
    y = np.asarray(y, dtype=float)
    is_train = np.asarray(is_train, dtype=bool)
    fits = []
    for arm in (0, 1):
        m = w == arm
        if not m.any():
            raise FitError(f"arm {arm} has no observations")
        tr, va = m & is_train, m & ~is_train
        if tr.any() and va.any():
            spec, noise = _validation_pick(X[tr], y[tr], X[va], y[va], grid)
            fits.append(gp.fit_gp_fixed(X[m], y[m], spec, noise))
        else:
            fits.append(gp.fit_gp(X[m], y[m], grid))
    return CausalPosterior(*fits)


def cate_predict(model: CausalPosterior, X):
    """Vectorized CATE posterior: (mean, variance) arrays."""
    m0, v0 = model.predict_arm(X, 0)
    m1, v1 = model.predict_arm(X, 1)
    return m1 - m0, v0 + v1


def cate_posterior(model: CausalPosterior, x) -> tuple[float, float]:
    x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    mean, var = cate_predict(model, x)
    return float(mean[0]), float(var[0])


def policy_from_cate(cate_mean) -> np.ndarray:
    # exact zero goes to control
    return (np.asarray(cate_mean) > 0).astype(int)


def policy_predict(model: CausalPosterior, X) -> np.ndarray:
    return policy_from_cate(cate_predict(model, X)[0])


def policy_decide(model: CausalPosterior, x) -> int:
    return int(cate_posterior(model, x)[0] > 0)
