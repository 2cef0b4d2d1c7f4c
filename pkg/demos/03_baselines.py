"""
Randomized trial vs active acquisition baselines
================================================

Three designs on the same ten synthetic cohorts: a conventional randomized
trial, the two-stage design switching at step 15, and an active-learning
baseline that switches after a single batch. The last one learns a good
policy but almost never has enough randomized patients to prove an effect.
Takes a couple of minutes on one core.
"""

from rfan import metrics, trial
from rfan.acquisition import AcquisitionKind

designs = {
    "RCT": trial.TrialConfig.rct(),
    "two-stage t*=15": trial.TrialConfig.fixed(15, AcquisitionKind.MU_PI_UNF),
    "Causal-BALD": trial.TrialConfig.causal_bald(),
}
factory = trial.SyntheticCohorts()

print(f"{'design':<18}{'success':>8}{'value':>8}{'worst':>8}{'PTMB':>8}{'PTF':>8}")
for label, cfg in designs.items():
    results = trial.run_experiment(cfg, 10, factory)
    rep = metrics.evaluate(results, [factory(r.seed) for r in results], ["s1", "s2"])
    agg = rep.aggregate
    print(
        f"{label:<18}{rep.success_rate:>8.2f}{agg['policy_value']['mean']:>8.3f}"
        f"{agg['worst_case_policy_value']['mean']:>8.3f}{rep.ptmb:>8.3f}{rep.ptf:>8.3f}"
    )
