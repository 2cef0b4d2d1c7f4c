"""
Post-trial evaluation.

Policy values use the noiseless conditional means when the cohort knows
them and the realized potential outcomes otherwise. PTMB and PTF mix the
deployed policy's value (trial succeeded) with the control value (trial
failed); PTF takes the minimum over subgroups of the seed-averaged mix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Cohort, PatientTable
from .errors import InputError, MetricError

PER_SEED_FIELDS = (
    "policy_value",
    "worst_case_policy_value",
    "success",
    "sqrt_pehe",
    "policy_error_rate",
    "ptmb_term",
)


def _check(values, test: PatientTable) -> np.ndarray:
    values = np.asarray(values)
    if values.shape != (len(test),):
        raise InputError(f"{values.shape[0] if values.ndim else 0} values for {len(test)} test patients")
    return values


def _outcomes_under(policy: np.ndarray, test: PatientTable) -> np.ndarray:
    t0, t1 = test.truth()
    return np.where(policy == 1, t1, t0)


def policy_value(policy_on_test, test: PatientTable) -> float:
    policy = _check(policy_on_test, test).astype(int)
    return float(_outcomes_under(policy, test).mean())


def control_value(test: PatientTable) -> float:
    return policy_value(np.zeros(len(test), dtype=int), test)


def subgroup_policy_values(policy_on_test, test: PatientTable, subgroups: Sequence[str]) -> dict[str, float]:
    policy = _check(policy_on_test, test).astype(int)
    outcomes = _outcomes_under(policy, test)
    out = {}
    for s in subgroups:
        mask = np.ones(len(test), dtype=bool) if s == "*" else test.subgroup_mask(s)
        if not mask.any():
            raise MetricError(f"subgroup {s!r} is empty in the test set")
        out[s] = float(outcomes[mask].mean())
    return out


def worst_case_policy_value(policy_on_test, test: PatientTable, subgroups: Sequence[str]) -> float:
    """Minimum subgroup-conditional policy value. ``"*"`` denotes everyone."""
    if not subgroups:
        raise MetricError("no subgroups declared")
    return min(subgroup_policy_values(policy_on_test, test, subgroups).values())


def sqrt_pehe(cate_on_test, test: PatientTable) -> float:
    cate = _check(cate_on_test, test).astype(float)
    return float(np.sqrt(np.mean((cate - test.true_cate()) ** 2)))


def policy_error_rate(policy_on_test, test: PatientTable) -> float:
    """Percentage of test patients whose arm differs from 1{true CATE > 0}."""
    policy = _check(policy_on_test, test).astype(int)
    oracle = (test.true_cate() > 0).astype(int)
    return float(100.0 * np.mean(policy != oracle))


def _tests(cohorts) -> list[PatientTable]:
    return [c.test if isinstance(c, Cohort) else c for c in cohorts]


def ptmb(results, cohorts) -> float:
    tests = _tests(cohorts)
    if not results or len(results) != len(tests):
        raise InputError("need one cohort per trial result and at least one result")
    terms = [
        r.eta * policy_value(r.policy_on_test, t) + (1 - r.eta) * control_value(t)
        for r, t in zip(results, tests)
    ]
    return float(np.mean(terms))


def _ptf_terms(results, tests, subgroups) -> dict[str, list[float]]:
    terms: dict[str, list[float]] = {s: [] for s in subgroups}
    for r, t in zip(results, tests):
        pol = subgroup_policy_values(r.policy_on_test, t, subgroups)
        ctl = subgroup_policy_values(np.zeros(len(t), dtype=int), t, subgroups)
        for s in subgroups:
            terms[s].append(r.eta * pol[s] + (1 - r.eta) * ctl[s])
    return terms


def ptf(results, cohorts, subgroups: Sequence[str]) -> float:
    """min over subgroups of the seed-mean mixed value (min of means)."""
    tests = _tests(cohorts)
    if not results or len(results) != len(tests):
        raise InputError("need one cohort per trial result and at least one result")
    if not subgroups:
        raise MetricError("no subgroups declared")
    terms = _ptf_terms(results, tests, subgroups)
    return float(min(np.mean(v) for v in terms.values()))


def mean_sem(values) -> tuple[float, float | None]:
    v = np.asarray(values, dtype=float)
    if v.size == 1:
        return float(v[0]), None
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


@dataclass
class MetricsReport:
    per_seed: list[dict]
    subgroups: list[str]
    aggregate: dict[str, dict] = field(default_factory=dict)
    ptmb: float = float("nan")
    ptf: float = float("nan")

    @classmethod
    def from_per_seed(cls, per_seed: list[dict], subgroups: Sequence[str]) -> "MetricsReport":
        """Aggregate per-seed records; the inverse of what :func:`evaluate` stores."""
        subgroups = list(subgroups)
        agg = {}
        for name in PER_SEED_FIELDS:
            m, s = mean_sem([rec[name] for rec in per_seed])
            agg[name] = {"mean": m, "sem": s}
        ptf_val = min(float(np.mean([rec["ptf_terms"][s] for rec in per_seed])) for s in subgroups)
        return cls(per_seed, subgroups, agg, agg["ptmb_term"]["mean"], ptf_val)

    @property
    def success_rate(self) -> float:
        return self.aggregate["success"]["mean"]

    def to_dict(self) -> dict:
        return {
            "subgroups": self.subgroups,
            "aggregate": self.aggregate,
            "ptmb": self.ptmb,
            "ptf": self.ptf,
            "per_seed": self.per_seed,
        }


def evaluate(results, cohorts, subgroups: Sequence[str]) -> MetricsReport:
    """Per-seed metrics plus mean/SEM aggregates, PTMB and PTF."""
    tests = _tests(cohorts)
    if not results or len(results) != len(tests):
        raise InputError("need one cohort per trial result and at least one result")
    subgroups = list(subgroups)
    per_seed = []
    for r, t in zip(results, tests):
        v_pi = policy_value(r.policy_on_test, t)
        v_0 = control_value(t)
        pol_s = subgroup_policy_values(r.policy_on_test, t, subgroups)
        ctl_s = subgroup_policy_values(np.zeros(len(t), dtype=int), t, subgroups)
        per_seed.append(
            {
                "seed": int(r.seed),
                "policy_value": v_pi,
                "worst_case_policy_value": min(pol_s.values()),
                "success": int(r.eta),
                "sqrt_pehe": sqrt_pehe(r.cate_on_test, t),
                "policy_error_rate": policy_error_rate(r.policy_on_test, t),
                "ptmb_term": r.eta * v_pi + (1 - r.eta) * v_0,
                "ptf_terms": {s: r.eta * pol_s[s] + (1 - r.eta) * ctl_s[s] for s in subgroups},
                "realized_switch_step": int(r.realized_switch_step),
                "p_value": None if r.test_result is None else r.test_result.p_value,
            }
        )
    return MetricsReport.from_per_seed(per_seed, subgroups)
