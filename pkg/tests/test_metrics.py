from types import SimpleNamespace

import numpy as np
import pytest

from rfan import data, metrics
from rfan.errors import InputError, MetricError

from oracles import synthetic_truth_quadrature

Q = synthetic_truth_quadrature()
SUBGROUPS = ["s1", "s2"]


def _result(policy, cate=None, eta=1, seed=0):
    policy = np.asarray(policy, dtype=int)
    cate = np.zeros(policy.size) if cate is None else np.asarray(cate, dtype=float)
    return SimpleNamespace(
        eta=eta, policy_on_test=policy, cate_on_test=cate, seed=seed,
        realized_switch_step=1, test_result=None,
    )


@pytest.fixture(scope="module")
def big_test():
    return data.gen_synthetic(1, 1_000_000, seed=99).test


def oracle_policy(t):
    return (t.true_cate() > 0).astype(int)


def test_control_value_on_test_set():
    for seed in range(5):
        t = data.gen_synthetic(1, 2000, seed=seed).test
        assert metrics.control_value(t) == pytest.approx(1.0, abs=0.07)


def test_oracle_policy_value(big_test):
    # closed-form value is 3.1924; a large evaluation set must match it
    assert Q["oracle_value"] == pytest.approx(3.1924, abs=1e-4)
    v = metrics.policy_value(oracle_policy(big_test), big_test)
    assert v == pytest.approx(Q["oracle_value"], abs=0.01)


def test_oracle_worst_case(big_test):
    assert Q["oracle_s1"] == pytest.approx(1.2967, abs=1e-4)
    wc = metrics.worst_case_policy_value(oracle_policy(big_test), big_test, SUBGROUPS)
    assert wc == pytest.approx(Q["oracle_s1"], abs=0.02)


def test_uniform_policy_worst_case(big_test):
    t = big_test.take(np.arange(100_000))
    rng = np.random.default_rng(0)
    # expected value of a coin-flip policy is the subgroup mean of (mean0 + mean1) / 2
    vals = {s: (t.mean0 + t.mean1)[t.subgroup_mask(s)].mean() / 2 for s in SUBGROUPS}
    assert min(vals.values()) == pytest.approx(min(Q["uniform_s1"], Q["uniform_s2"]), abs=0.03)
    wc = metrics.worst_case_policy_value(rng.integers(0, 2, len(t)), t, SUBGROUPS)
    assert wc == pytest.approx(min(vals.values()), abs=0.05)


def test_binary_outcomes_value_is_fraction_on_optimal_arm():
    rng = np.random.default_rng(1)
    opt = rng.integers(0, 2, 500)
    t = data.PatientTable(np.arange(500), rng.normal(size=(500, 2)), (opt == 0).astype(float), (opt == 1).astype(float))
    pol = rng.integers(0, 2, 500)
    assert metrics.policy_value(pol, t) == pytest.approx(np.mean(pol == opt), abs=1e-15)


def test_single_everyone_subgroup_equals_policy_value():
    t = data.gen_synthetic(1, 300, seed=2).test
    pol = np.random.default_rng(0).integers(0, 2, 300)
    assert metrics.worst_case_policy_value(pol, t, ["*"]) == metrics.policy_value(pol, t)


def test_empty_subgroup_is_named():
    t = data.PatientTable([0, 1], [[0.0], [1.0]], [0.0, 0.0], [1.0, 1.0], subgroup=["a", "a"])
    with pytest.raises(MetricError, match="'b'"):
        metrics.worst_case_policy_value([0, 1], t, ["a", "b"])


def test_sqrt_pehe_offsets():
    t = data.gen_synthetic(1, 400, seed=3).test
    assert metrics.sqrt_pehe(t.true_cate(), t) == 0.0
    assert metrics.sqrt_pehe(t.true_cate() + 1, t) == pytest.approx(1.0, abs=1e-12)


def test_policy_error_rates(big_test):
    t = big_test
    opt = oracle_policy(t)
    assert metrics.policy_error_rate(opt, t) == 0.0
    assert metrics.policy_error_rate(1 - opt, t) == 100.0
    always = metrics.policy_error_rate(np.ones(len(t), dtype=int), t)
    assert Q["p_cate_nonpositive"] == pytest.approx(0.0842, abs=1e-4)
    assert always == pytest.approx(100 * Q["p_cate_nonpositive"], abs=0.1)


def test_length_mismatch():
    t = data.gen_synthetic(1, 10, seed=0).test
    with pytest.raises(InputError):
        metrics.policy_value([0, 1], t)


def test_worst_case_never_exceeds_mean_over_partition():
    rng = np.random.default_rng(4)
    for seed in range(20):
        t = data.gen_synthetic(1, 500, seed=seed).test
        labels = np.where(t.subgroup == "", "rest", t.subgroup)
        t = data.PatientTable(t.ids, t.X, t.y0, t.y1, t.mean0, t.mean1, labels)
        pol = rng.integers(0, 2, 500)
        assert metrics.worst_case_policy_value(pol, t, ["s1", "s2", "rest"]) <= metrics.policy_value(pol, t) + 1e-12


def test_permutation_invariance():
    t = data.gen_synthetic(1, 700, seed=5).test
    rng = np.random.default_rng(5)
    pol, cate = rng.integers(0, 2, 700), rng.normal(size=700)
    p = rng.permutation(700)
    tp = t.take(p)
    for f, args in (
        (metrics.policy_value, (pol,)),
        (metrics.sqrt_pehe, (cate,)),
        (metrics.policy_error_rate, (pol,)),
    ):
        assert f(*[a[p] for a in args], tp) == pytest.approx(f(*args, t), rel=1e-12)
    assert metrics.worst_case_policy_value(pol[p], tp, SUBGROUPS) == pytest.approx(
        metrics.worst_case_policy_value(pol, t, SUBGROUPS), rel=1e-12
    )


# PTMB / PTF

def _tests(n_seeds, n=2000):
    return [data.gen_synthetic(1, n, seed=s).test for s in range(n_seeds)]


def test_ptmb_failure_branch():
    tests = _tests(10)
    results = [_result(oracle_policy(t), eta=0) for t in tests]
    assert metrics.ptmb(results, tests) == pytest.approx(np.mean([metrics.control_value(t) for t in tests]))
    assert metrics.ptmb(results, tests) == pytest.approx(1.0, abs=0.07)


def test_ptmb_success_branch():
    tests = _tests(10)
    results = [_result(oracle_policy(t), eta=1) for t in tests]
    vals = [metrics.policy_value(r.policy_on_test, t) for r, t in zip(results, tests)]
    assert metrics.ptmb(results, tests) == pytest.approx(np.mean(vals), rel=1e-12)
    assert metrics.ptmb(results, tests) == pytest.approx(Q["oracle_value"], abs=0.05)


def test_ptmb_mixed_arithmetic():
    # 9 successes at 3.17 and one failure at 1.0
    t = data.PatientTable([0], [[0.0]], [1.0], [3.17], [1.0], [3.17])
    results = [_result([1], eta=1)] * 9 + [_result([1], eta=0)]
    assert metrics.ptmb(results, [t] * 10) == pytest.approx(2.953, abs=1e-12)


def test_ptf_failure_branch_matches_conditional_control_value():
    tests = _tests(20, 5000)
    results = [_result(np.zeros(len(t), dtype=int), eta=0) for t in tests]
    expected = min(Q["control_s1"], Q["control_s2"])
    assert metrics.ptf(results, tests, SUBGROUPS) == pytest.approx(expected, abs=0.06)


def test_ptf_single_subgroup_equals_ptmb():
    tests = _tests(4, 300)
    rng = np.random.default_rng(6)
    results = [_result(rng.integers(0, 2, 300), eta=int(i % 2)) for i, _ in enumerate(tests)]
    assert metrics.ptf(results, tests, ["*"]) == pytest.approx(metrics.ptmb(results, tests), rel=1e-12)


def test_ptf_is_min_of_means():
    # seed A: group a worse; seed B: group b worse
    t = data.PatientTable([0, 1], [[0.0], [0.0]], [0.0, 0.0], [0.0, 0.0], subgroup=["a", "b"])
    tA = data.PatientTable([0, 1], [[0.0], [0.0]], [0.0, 0.0], [0.0, 4.0], subgroup=["a", "b"])
    tB = data.PatientTable([0, 1], [[0.0], [0.0]], [0.0, 0.0], [4.0, 0.0], subgroup=["a", "b"])
    results = [_result([1, 1]), _result([1, 1])]
    # min of means: min(2, 2) = 2; mean of mins: 0
    assert metrics.ptf(results, [tA, tB], ["a", "b"]) == 2.0
    assert metrics.ptf(results, [t, t], ["a", "b"]) == 0.0


def test_mean_sem():
    m, s = metrics.mean_sem([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5
    assert s == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert metrics.mean_sem([5.0]) == (5.0, None)


def test_evaluate_report_consistency():
    tests = _tests(3, 500)
    rng = np.random.default_rng(7)
    results = [_result(rng.integers(0, 2, 500), rng.normal(size=500), eta=e, seed=i)
               for i, e in enumerate([1, 0, 1])]
    rep = metrics.evaluate(results, tests, SUBGROUPS)
    assert rep.ptmb == pytest.approx(metrics.ptmb(results, tests), rel=1e-12)
    assert rep.ptf == pytest.approx(metrics.ptf(results, tests, SUBGROUPS), rel=1e-12)
    assert rep.success_rate == pytest.approx(2 / 3)
    assert [r["seed"] for r in rep.per_seed] == [0, 1, 2]
    again = metrics.MetricsReport.from_per_seed(rep.per_seed, SUBGROUPS)
    assert again.to_dict() == rep.to_dict()


def test_evaluate_requires_matching_lengths():
    with pytest.raises(InputError):
        metrics.evaluate([], [], SUBGROUPS)
