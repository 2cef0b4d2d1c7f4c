"""Simulated two-stage clinical trials: randomize first, then acquire actively."""

from .acquisition import AcquisitionKind, BatchSelection, score_mu, score_sign_tau, select_batch
from .causal import CausalPosterior, cate_posterior, fit_causal, policy_decide, tune_causal
from .data import Cohort, PatientTable, gen_synthetic, load_potential_outcomes_csv
from .errors import RFANError
from .gp import GPFit, KernelSpec, fit_gp, posterior, sample_posterior
from .harness import run_from_config
from .metrics import MetricsReport, evaluate, policy_value, ptf, ptmb, worst_case_policy_value
from .stats import SpendingSchedule, interim_decision, obf_alpha, t_test
from .trial import (
    RCT,
    CausalBALD,
    EarlyStopping,
    Fixed,
    TrialConfig,
    TrialResult,
    run_experiment,
    run_trial,
    run_trial_early_stopping,
)

__version__ = "0.1.0"
