"""
Switching as soon as the effect is significant
==============================================

Instead of a fixed switching step, test at information fractions
0.25, 0.5, 0.75 and 1 with O'Brien-Fleming spending, and switch to active
acquisition at the first look that rejects.
"""

import numpy as np

from rfan import data, stats, trial
from rfan.acquisition import AcquisitionKind

schedule = stats.SpendingSchedule()
for k, f in enumerate(schedule.information_fractions):
    print(f"look {k}: fraction {f:.2f}, nominal level {schedule.threshold(k):.2e}")

config = trial.TrialConfig.early_stopping(AcquisitionKind.MU_PI_UNF)
print("looks at steps", config.look_steps())

for seed in range(3):
    res = trial.run_trial(config.replace(seed=seed), data.gen_synthetic(seed=seed))
    print(f"seed {seed}: eta={res.eta}, switched after step {res.realized_switch_step}")

# the same rule on data with no treatment effect rarely rejects
rng = np.random.default_rng(1)
hits = 0
for _ in range(500):
    x = rng.standard_normal(300)
    w = rng.integers(0, 2, 300)
    y = data.synthetic_means(x)[0] + rng.standard_normal(300)
    hits += any(
        stats.interim_decision(w[: 10 * s], y[: 10 * s], schedule, k, s / 30) is stats.InterimDecision.REJECT
        for k, s in enumerate(config.look_steps())
    )
print("rejection rate without an effect:", hits / 500)
