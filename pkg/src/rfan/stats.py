"""
Regulatory testing layer.

Normal CDF/quantile, Student's pooled two-sample t-test, O'Brien-Fleming
alpha spending and the interim switching rule used by early-stopping trials.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .errors import InputError, StatTestError


def normal_cdf(z):
    return special.ndtr(z)


def normal_quantile(p):
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0.0) | (p_arr >= 1.0)) or np.any(np.isnan(p_arr)):
        raise InputError("normal_quantile needs p strictly inside (0, 1)")
    return special.ndtri(p)


@dataclass(frozen=True)
class TestResult:
    t_statistic: float
    degrees_of_freedom: float
    p_value: float
    positive_direction: bool
    rejected: bool = False

    __test__ = False  # keep pytest from collecting this class


def t_test(treated: Sequence[float], control: Sequence[float], alpha: float | None = None) -> TestResult:
    """Student's two-sided pooled-variance t-test.

    ``rejected`` is only set when ``alpha`` is given, and then requires both
    ``p < alpha`` and a treated mean above the control mean.
    """
    a = np.asarray(treated, dtype=float)
    b = np.asarray(control, dtype=float)
    n1, n2 = a.size, b.size
    if n1 < 2 or n2 < 2:
        raise StatTestError(f"need >= 2 samples per group, got {n1} and {n2}")
    df = n1 + n2 - 2
    diff = a.mean() - b.mean()
    ss = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
    pooled = ss / df
    if pooled <= 0.0:
        raise StatTestError("zero pooled variance")
    t = diff / math.sqrt(pooled * (1.0 / n1 + 1.0 / n2))
    p = float(special.betainc(0.5 * df, 0.5, df / (df + t * t)))
    p = min(max(p, 0.0), 1.0)
    positive = bool(diff > 0)
    rejected = alpha is not None and p < alpha and positive
    return TestResult(float(t), float(df), p, positive, bool(rejected))


def obf_alpha(epsilon: float, f: float) -> float:
    """O'Brien-Fleming cumulative alpha spent at information fraction ``f``."""
    if not 0.0 < epsilon < 1.0:
        raise InputError("epsilon must lie in (0, 1)")
    if not 0.0 < f <= 1.0:
        raise InputError(f"information fraction must lie in (0, 1], got {f}")
    z = normal_quantile(1.0 - epsilon / 2.0)
    # 2 - 2*Phi(z/sqrt(f)) written through the lower tail to keep precision
    return float(2.0 * normal_cdf(-z / math.sqrt(f)))


@dataclass(frozen=True)
class SpendingSchedule:
    overall_epsilon: float = 0.05
    information_fractions: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)

    def __post_init__(self):
        fr = tuple(float(f) for f in self.information_fractions)
        object.__setattr__(self, "information_fractions", fr)
        if not 0.0 < self.overall_epsilon < 1.0:
            raise InputError("overall_epsilon must lie in (0, 1)")
        if not fr:
            raise InputError("schedule needs at least one fraction")
        if any(not 0.0 < f <= 1.0 for f in fr):
            raise InputError("fractions must lie in (0, 1]")
        if any(b <= a for a, b in zip(fr, fr[1:])):
            raise InputError("fractions must be strictly increasing")
        if fr[-1] != 1.0:
            raise InputError("last fraction must be 1")

    @classmethod
    def from_fractions(cls, fractions, epsilon=0.05):
        """Build a schedule, dropping a leading 0 (a look with no data)."""
        fr = [float(f) for f in fractions]
        if fr and fr[0] == 0.0:
            fr = fr[1:]
        return cls(epsilon, tuple(fr))

    def threshold(self, look_index: int, information_fraction: float | None = None) -> float:
        f = self.information_fractions[look_index] if information_fraction is None else information_fraction
        return obf_alpha(self.overall_epsilon, f)


class InterimDecision(enum.Enum):
    CONTINUE_RANDOMIZED = "continue"
    REJECT = "reject"


def interim_decision(
    w,
    y,
    schedule: SpendingSchedule,
    look_index: int,
    information_fraction: float | None = None,
) -> InterimDecision:
    """Test randomized-stage outcomes ``y`` split by arm ``w`` at one look.

    The nominal threshold is the cumulative O'Brien-Fleming spend at the
    look's fraction, or at ``information_fraction`` when the realized
    fraction differs from the planned one.
    """
    if not 0 <= look_index < len(schedule.information_fractions):
        raise InputError(f"look_index {look_index} outside schedule")
    w = np.asarray(w)
    y = np.asarray(y, dtype=float)
    alpha = schedule.threshold(look_index, information_fraction)
    try:
        res = t_test(y[w == 1], y[w == 0], alpha=alpha)
    except StatTestError:
        return InterimDecision.CONTINUE_RANDOMIZED
    return InterimDecision.REJECT if res.rejected else InterimDecision.CONTINUE_RANDOMIZED
