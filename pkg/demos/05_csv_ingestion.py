"""
Running a trial on a potential-outcomes CSV
===========================================

Semi-synthetic benchmarks ship both potential outcomes per patient. This
writes a small binary-outcome file (exactly one arm helps each patient),
loads it with a seeded pool/test split and runs a short two-stage trial.
"""

import tempfile
from pathlib import Path

import numpy as np

from rfan import data, metrics, trial
from rfan.acquisition import AcquisitionKind

rng = np.random.default_rng(0)
n = 600
x = rng.standard_normal((n, 2))
best_arm = (x[:, 0] + 0.5 * x[:, 1] > 0).astype(int)
sex = np.where(rng.random(n) < 0.5, "sex=F", "sex=M")
race = np.where(rng.random(n) < 0.3, "race=A", "race=B")

path = Path(tempfile.mkdtemp()) / "binary.csv"
with open(path, "w") as fh:
    fh.write("id,subgroup,x_0,x_1,y0,y1\n")
    for i in range(n):
        fh.write(f"{i},{race[i]};{sex[i]},{x[i, 0]:.6f},{x[i, 1]:.6f},{int(best_arm[i] == 0)},{int(best_arm[i] == 1)}\n")

cohort = data.load_potential_outcomes_csv(path, split_fraction=0.8, seed=0)
print("pool", len(cohort.pool), "test", len(cohort.test), "levels", cohort.pool.subgroup_levels())

config = trial.TrialConfig.fixed(6, AcquisitionKind.MU_PI, total_steps=12, batch_size=10)
result = trial.run_trial(config, cohort)
levels = cohort.test.subgroup_levels()
print("share of test patients on their better arm:", round(metrics.policy_value(result.policy_on_test, cohort.test), 3))
print("worst level:", round(metrics.worst_case_policy_value(result.policy_on_test, cohort.test, levels), 3))
