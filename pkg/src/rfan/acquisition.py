"""
Acquisition scores and batch selection.

Every acquisition kind returns ``b`` distinct (pool index, arm) pairs. The
model-based kinds score patients pointwise and take the top ``b``; ties go
to the lowest pool index, and ties between arms go to arm 0.

=============  ==========================================  ======================
kind           patients ranked by                          arm assigned
=============  ==========================================  ======================
UNIFORM        random, without replacement                 fair coin
MU_PI          Var[mu(x, pi(x))]                           pi(x)
MU_MAX         max_w Var[mu(x, w)]                         argmax_w Var[mu(x, w)]
MU_PI_MAX      Var[mu(x, pi(x))]                           argmax_w Var[mu(x, w)]
MU_PI_UNF      Var[mu(x, pi(x))]                           fair coin
SIGN_TAU_PI    BALD score of the label 1{Y1 > Y0}          pi(x)
=============  ==========================================  ======================

Entropies are in nats.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .causal import CausalPosterior, cate_predict, policy_from_cate
from .errors import AcquisitionError, ConfigurationError, InputError
from .stats import normal_cdf

DEFAULT_SIGN_DRAWS = 256


class AcquisitionKind(enum.Enum):
    UNIFORM = "uniform"
    MU_PI = "mu_pi"
    MU_MAX = "mu_max"
    MU_PI_MAX = "mu_pi_max"
    MU_PI_UNF = "mu_pi_unf"
    SIGN_TAU_PI = "sign_tau_pi"

    @classmethod
    def parse(cls, value) -> "AcquisitionKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for kind in cls:
            if kind.value == key or kind.name.lower() == key:
                return kind
        raise ConfigurationError(f"unknown acquisition kind {value!r}")


@dataclass(frozen=True)
class BatchSelection:
    picks: tuple[tuple[int, int], ...]

    @property
    def indices(self) -> np.ndarray:
        return np.array([i for i, _ in self.picks], dtype=np.int64)

    @property
    def arms(self) -> np.ndarray:
        return np.array([w for _, w in self.picks], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.picks)


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def mu_scores(model: CausalPosterior, X) -> np.ndarray:
    """Posterior variance of each arm's mean function, shape ``(n, 2)``."""
    X = _as_2d(X)
    return np.column_stack([model.predict_arm(X, 0)[1], model.predict_arm(X, 1)[1]])


def score_mu(model: CausalPosterior, x, w: int) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    return float(model.predict_arm(x, w)[1][0])


def binary_entropy(p) -> np.ndarray:
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    out = np.zeros_like(p)
    for q in (p, 1.0 - p):
        m = q > 0
        out[m] -= q[m] * np.log(q[m])
    return out


def bald_from_probs(probs) -> np.ndarray:
    """Mutual information of a Bernoulli label given per-draw probabilities.

    ``probs`` has draws along axis 0. Returns ``H(E p) - E H(p)`` clamped at 0.
    """
    probs = np.asarray(probs, dtype=float)
    mi = binary_entropy(probs.mean(axis=0)) - binary_entropy(probs).mean(axis=0)
    return np.maximum(mi, 0.0)


def sign_tau_scores(model: CausalPosterior, X, n_draws: int, rng: np.random.Generator) -> np.ndarray:
    if n_draws < 2:
        raise InputError("sign BALD needs n_draws >= 2")
    X = _as_2d(X)
    m0, v0 = model.predict_arm(X, 0)
    m1, v1 = model.predict_arm(X, 1)
    n = X.shape[0]
    # arms are independent, so per-point draws of (f0, f1) are the joint posterior
    f0 = m0 + np.sqrt(v0) * rng.standard_normal((n_draws, n))
    f1 = m1 + np.sqrt(v1) * rng.standard_normal((n_draws, n))
    s0, s1 = model.noise_variances
    p = normal_cdf((f1 - f0) / np.sqrt(s0 + s1))
    return bald_from_probs(p)


def score_sign_tau(model: CausalPosterior, x, n_draws: int, rng: np.random.Generator) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    return float(sign_tau_scores(model, x, n_draws, rng)[0])


def _top(scores: np.ndarray, b: int) -> np.ndarray:
    return np.argsort(-scores, kind="stable")[:b]


def select_batch(
    pool_X,
    model: CausalPosterior | None,
    kind: AcquisitionKind,
    b: int,
    rng: np.random.Generator,
    n_draws: int = DEFAULT_SIGN_DRAWS,
) -> BatchSelection:
    """Choose ``b`` patients from ``pool_X`` (rows) and an arm for each."""
    kind = AcquisitionKind.parse(kind)
    pool_X = _as_2d(pool_X)
    n = pool_X.shape[0]
    if b < 1:
        raise InputError("batch size must be >= 1")
    if n < b:
        raise AcquisitionError(f"pool has {n} patients, batch needs {b}")
    if kind is AcquisitionKind.UNIFORM:
        idx = rng.choice(n, size=b, replace=False)
        arms = rng.integers(0, 2, size=b)
        return BatchSelection(tuple(zip(idx.tolist(), arms.tolist())))
    if model is None:
        raise ConfigurationError(f"acquisition {kind.value} requires a fitted model")

    if kind is AcquisitionKind.SIGN_TAU_PI:
        score = sign_tau_scores(model, pool_X, n_draws, rng)
        idx = _top(score, b)
        arms = policy_from_cate(cate_predict(model, pool_X[idx])[0])
        return BatchSelection(tuple(zip(idx.tolist(), arms.tolist())))

    var = mu_scores(model, pool_X)
    best_arm = (var[:, 1] > var[:, 0]).astype(int)
    if kind is AcquisitionKind.MU_MAX:
        idx = _top(var.max(axis=1), b)
        arms = best_arm[idx]
    else:
        pi = policy_from_cate(cate_predict(model, pool_X)[0])
        idx = _top(var[np.arange(n), pi], b)
        if kind is AcquisitionKind.MU_PI:
            arms = pi[idx]
        elif kind is AcquisitionKind.MU_PI_MAX:
            arms = best_arm[idx]
        else:
            arms = rng.integers(0, 2, size=b)
    return BatchSelection(tuple(zip(idx.tolist(), np.asarray(arms).tolist())))
