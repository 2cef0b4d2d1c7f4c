import numpy as np
import pytest

from rfan import data
from rfan.errors import InputError, OracleError, ParseError

from oracles import synthetic_truth_quadrature


def test_synthetic_means_at_zero():
    m0, m1 = data.synthetic_means(0.0)
    assert m1 == 3.0 and m0 == 1.0
    assert m1 - m0 == 2.0


def test_means_match_generating_formula():
    # Y^w mean = (2w-1)x + (2w-1) - 2 sin((2w-2)x) + 2(1 + 0.5x)
    x = np.linspace(-3, 3, 101)
    formula = lambda w: (2 * w - 1) * x + (2 * w - 1) - 2 * np.sin((2 * w - 2) * x) + 2 * (1 + 0.5 * x)
    m0, m1 = data.synthetic_means(x)
    np.testing.assert_allclose(m0, formula(0), atol=1e-14)
    np.testing.assert_allclose(m1, formula(1), atol=1e-14)


def test_cohort_sizes_disjoint_and_reproducible():
    a = data.gen_synthetic(500, 200, seed=4)
    b = data.gen_synthetic(500, 200, seed=4)
    assert len(a.pool) == 500 and len(a.test) == 200
    assert not set(a.pool.ids) & set(a.test.ids)
    for col in ("X", "y0", "y1", "mean0", "mean1"):
        assert np.array_equal(getattr(a.pool, col), getattr(b.pool, col))
        assert np.array_equal(getattr(a.test, col), getattr(b.test, col))


def test_test_set_uses_next_seed():
    a = data.gen_synthetic(50, 50, seed=4)
    b = data.gen_synthetic(50, 50, seed=5)
    assert np.array_equal(a.test.X, b.pool.X)


def test_population_moments():
    c = data.gen_synthetic(1_000_000, 1, seed=0)
    x = c.pool.X[:, 0]
    t = c.pool.mean1 - c.pool.mean0
    se = 1 / np.sqrt(x.size)
    assert abs(t.mean() - 2.0) < 0.01
    assert abs(c.pool.mean0.mean() - 1.0) < 0.01
    assert abs(x.mean()) < 3 * se
    assert abs(x.var() - 1.0) < 3 * np.sqrt(2) * se
    q = synthetic_truth_quadrature()
    assert np.mean(x < -1.2) == pytest.approx(q["p_s1"], abs=0.002)
    assert np.mean(x >= 1.3) == pytest.approx(q["p_s2"], abs=0.002)
    assert q["p_s1"] == pytest.approx(0.1151, abs=1e-4)
    assert q["p_s2"] == pytest.approx(0.0968, abs=1e-4)


def test_noise_model():
    c = data.gen_synthetic(100_000, 1, seed=3)
    for y, m in ((c.pool.y0, c.pool.mean0), (c.pool.y1, c.pool.mean1)):
        e = y - m
        assert abs(e.mean()) < 0.01
        assert abs(e.var() - 1.0) < 0.02
    # arms get independent noise
    e0, e1 = c.pool.y0 - c.pool.mean0, c.pool.y1 - c.pool.mean1
    assert abs(np.corrcoef(e0, e1)[0, 1]) < 0.02


def test_subgroup_labels():
    labels = data.synthetic_subgroups([-1.21, -1.2, 0.0, 1.2999, 1.3, 2.0])
    assert labels.tolist() == ["s1", "", "", "", "s2", "s2"]


def test_null_effect_cohort():
    c = data.gen_synthetic(100, 10, seed=0, null_effect=True)
    assert np.array_equal(c.pool.mean0, c.pool.mean1)
    assert not np.array_equal(c.pool.y0, c.pool.y1)


def test_sizes_must_be_positive():
    with pytest.raises(InputError):
        data.gen_synthetic(0, 10)


# reveal

def test_reveal_returns_stored_outcome_and_consumes():
    c = data.gen_synthetic(10, 5, seed=1)
    pid = int(c.pool.ids[3])
    assert c.reveal(pid, 1) == c.pool.y1[3]
    assert 3 not in c.available()
    with pytest.raises(OracleError):
        c.reveal(pid, 0)


def test_reveal_unknown_id():
    c = data.gen_synthetic(10, 5, seed=1)
    with pytest.raises(OracleError):
        c.reveal(999, 0)
    with pytest.raises(OracleError):
        c.reveal(int(c.test.ids[0]), 0)


def test_reveal_bit_exact_both_arms():
    c = data.gen_synthetic(10, 5, seed=2)
    assert c.reveal(int(c.pool.ids[0]), 0) == c.pool.y0[0]
    assert c.reveal(int(c.pool.ids[1]), 1) == c.pool.y1[1]


def test_reveal_monte_carlo_effect():
    # realized y1 - y0 over regenerated noise centers on the noiseless CATE
    excess = []
    for seed in range(10_000):
        c = data.gen_synthetic(1, 1, seed=seed)
        pid = int(c.pool.ids[0])
        d = c.copy().reveal(pid, 1) - c.reveal(pid, 0)
        excess.append(d - (c.pool.mean1[0] - c.pool.mean0[0]))
    assert 2.0 + np.mean(excess) == pytest.approx(2.0, abs=0.1)


def test_copy_is_independent():
    c = data.gen_synthetic(10, 5, seed=1)
    d = c.copy()
    c.reveal(int(c.pool.ids[0]), 0)
    assert len(d.available()) == 10


def test_record_view():
    c = data.gen_synthetic(10, 5, seed=1)
    r = c.pool[2]
    assert r.id == c.pool.ids[2]
    assert r.outcome(1) == c.pool.y1[2]
    assert r.mean0 is not None and r.mean1 is not None


def test_means_both_or_neither():
    with pytest.raises(InputError):
        data.PatientTable([0], [[0.0]], [0.0], [1.0], mean0=[0.0])


# CSV

def _write(tmp_path, text):
    p = tmp_path / "po.csv"
    p.write_text(text)
    return p


def _rows(n=10, d=2, binary=False, seed=0):
    rng = np.random.default_rng(seed)
    lines = ["id,subgroup," + ",".join(f"x_{j}" for j in range(d)) + ",y0,y1"]
    for i in range(n):
        xs = ",".join(repr(float(v)) for v in rng.normal(size=d))
        if binary:
            opt = int(rng.integers(0, 2))
            y0, y1 = int(opt == 0), int(opt == 1)
        else:
            y0, y1 = rng.normal(), rng.normal()
        lines.append(f"{100 + i},{'g' if i % 3 == 0 else ''},{xs},{y0},{y1}")
    return "\n".join(lines) + "\n"


def test_csv_split_sizes_and_reproducible(tmp_path):
    p = _write(tmp_path, _rows())
    a = data.load_potential_outcomes_csv(p, 0.8, seed=3)
    b = data.load_potential_outcomes_csv(p, 0.8, seed=3)
    assert len(a.pool) == 8 and len(a.test) == 2
    assert np.array_equal(a.pool.ids, b.pool.ids)
    assert not a.pool.has_means
    assert set(a.pool.ids) | set(a.test.ids) == set(range(100, 110))


def test_csv_missing_cell_names_row(tmp_path):
    text = _rows(4).splitlines()
    text[3] = text[3].rsplit(",", 1)[0] + ","
    p = _write(tmp_path, "\n".join(text) + "\n")
    with pytest.raises(ParseError, match=r"row 4.*y1"):
        data.load_potential_outcomes_csv(p)


@pytest.mark.parametrize(
    "mutate,pattern",
    [
        (lambda L: [L[0].replace(",y1", "")] + L[1:], "header"),
        (lambda L: [L[0] + ",extra"] + [r + ",0" for r in L[1:]], "header"),
        (lambda L: L[:2] + [L[2].replace(L[2].split(",")[2], "abc", 1)] + L[3:], r"row 3.*x_0"),
        (lambda L: L[:2] + [L[2].replace(L[2].split(",")[2], "nan", 1)] + L[3:], r"row 3.*x_0"),
        (lambda L: L[:1] + [L[1].split(",", 1)[0] + "," + L[1]] + L[2:], "row 2"),
    ],
)
def test_csv_schema_errors(tmp_path, mutate, pattern):
    lines = mutate(_rows(5).splitlines())
    with pytest.raises(ParseError, match=pattern):
        data.load_potential_outcomes_csv(_write(tmp_path, "\n".join(lines) + "\n"))


def test_csv_binary_optimal_arm_structure(tmp_path):
    p = _write(tmp_path, _rows(50, binary=True))
    c = data.load_potential_outcomes_csv(p, 0.8, seed=0)
    for t in (c.pool, c.test):
        assert np.all(t.y0 + t.y1 == 1)


def test_csv_roundtrip(tmp_path):
    c = data.gen_synthetic(20, 5, seed=0)
    p = tmp_path / "rt.csv"
    data.write_potential_outcomes_csv(c.pool, p)
    t = data.read_potential_outcomes_csv(p)
    assert np.array_equal(t.ids, c.pool.ids)
    assert np.array_equal(t.X, c.pool.X)
    assert np.array_equal(t.y1, c.pool.y1)
    assert t.subgroup.tolist() == c.pool.subgroup.tolist()


def test_multi_attribute_levels():
    t = data.PatientTable([0, 1, 2], [[0.0], [1.0], [2.0]], [0, 0, 0], [1, 1, 1],
                          subgroup=["race=A;sex=F", "race=B;sex=F", ""])
    assert t.subgroup_levels() == ["race=A", "race=B", "sex=F"]
    assert t.subgroup_mask("sex=F").tolist() == [True, True, False]
