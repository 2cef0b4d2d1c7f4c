"""
One two-stage trial, step by step
=================================

Randomize the first 15 batches, test the treatment on those patients only,
then spend the remaining 15 batches where the model is least sure about the
arm its current policy recommends.
"""

import numpy as np

from rfan import data, metrics, trial
from rfan.acquisition import AcquisitionKind

cohort = data.gen_synthetic(n_pool=10_000, n_test=2_000, seed=0)
config = trial.TrialConfig.fixed(15, AcquisitionKind.MU_PI_UNF, seed=0)
result = trial.run_trial(config, cohort)

print("treatment effect significant:", bool(result.eta), " p =", f"{result.test_result.p_value:.2e}")
print("switched to active acquisition after step", result.realized_switch_step)

# who got recruited in each stage
for stage in ("randomized", "augmented"):
    steps = [s for s in result.per_step_trace if s["stage"] == stage]
    s1 = sum(s["subgroups"]["s1"] for s in steps)
    s2 = sum(s["subgroups"]["s2"] for s in steps)
    print(f"{stage:>10}: {10 * len(steps)} patients, s1={s1}, s2={s2}")

test = cohort.test
print("policy value:", round(metrics.policy_value(result.policy_on_test, test), 3))
print("worst subgroup value:", round(metrics.worst_case_policy_value(result.policy_on_test, test, ["s1", "s2"]), 3))
print("sqrt PEHE:", round(metrics.sqrt_pehe(result.cate_on_test, test), 3))
print("final hyperparameters:", result.final_hyperparameters)

x = result.dataset.X[:, 0]
print("share of acquired patients with x < -1.2:",
      round(float(np.mean(x[result.dataset.randomized] < -1.2)), 3), "(randomized) vs",
      round(float(np.mean(x[~result.dataset.randomized] < -1.2)), 3), "(augmented)")
