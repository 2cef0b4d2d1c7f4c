"""
Two-stage trial simulation: randomize first, augment next.

Stage I recruits uniformly at random and assigns arms by a fair coin; the
regulatory t-test only ever sees these observations. Stage II refits the
causal model every step and recruits with an acquisition function. After
the last step the model is tuned on the online validation split and the
final treatment policy is evaluated on the cohort's test set.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import gp
from .acquisition import DEFAULT_SIGN_DRAWS, AcquisitionKind, select_batch
from .causal import cate_predict, fit_causal, policy_from_cate, tune_causal
from .data import Cohort, gen_synthetic, load_potential_outcomes_csv
from .errors import ConfigurationError, FitError, RFANError, StatTestError, TrialError
from .stats import InterimDecision, SpendingSchedule, TestResult, interim_decision, t_test

MIN_TRAIN_PER_ARM = 2


@dataclass(frozen=True)
class Fixed:
    t_star: int


@dataclass(frozen=True)
class EarlyStopping:
    schedule: SpendingSchedule = SpendingSchedule()


@dataclass(frozen=True)
class RCT:
    pass


@dataclass(frozen=True)
class CausalBALD:
    pass


SwitchMode = Union[Fixed, EarlyStopping, RCT, CausalBALD]


@dataclass(frozen=True)
class TrialConfig:
    total_steps: int = 30
    batch_size: int = 10
    switch_mode: SwitchMode = RCT()
    acquisition: AcquisitionKind = AcquisitionKind.UNIFORM
    epsilon: float = 0.05
    train_val_ratio: float = 0.9
    seed: int = 0
    sign_bald_draws: int = DEFAULT_SIGN_DRAWS
    grid: tuple = gp.DEFAULT_GRID

    def __post_init__(self):
        object.__setattr__(self, "acquisition", AcquisitionKind.parse(self.acquisition))
        T, mode = self.total_steps, self.switch_mode
        if T < 1 or self.batch_size < 1:
            raise ConfigurationError("total_steps and batch_size must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError("epsilon must lie in (0, 1)")
        if not 0.0 < self.train_val_ratio <= 1.0:
            raise ConfigurationError("train_val_ratio must lie in (0, 1]")
        if self.sign_bald_draws < 2:
            raise ConfigurationError("sign_bald_draws must be >= 2")
        if isinstance(mode, Fixed):
            if not 1 <= mode.t_star <= T:
                raise ConfigurationError(f"t_star={mode.t_star} outside [1, {T}]")
        elif isinstance(mode, RCT):
            if self.acquisition is not AcquisitionKind.UNIFORM:
                raise ConfigurationError("RCT mode uses uniform acquisition throughout")
        elif isinstance(mode, CausalBALD):
            if self.acquisition is not AcquisitionKind.MU_MAX:
                raise ConfigurationError("Causal-BALD baseline uses mu_max acquisition")
        elif isinstance(mode, EarlyStopping):
            if not math.isclose(mode.schedule.overall_epsilon, self.epsilon):
                raise ConfigurationError("spending schedule epsilon differs from trial epsilon")
        else:
            raise ConfigurationError(f"unknown switch mode {mode!r}")

    @classmethod
    def rct(cls, **kw):
        return cls(switch_mode=RCT(), acquisition=AcquisitionKind.UNIFORM, **kw)

    @classmethod
    def causal_bald(cls, **kw):
        return cls(switch_mode=CausalBALD(), acquisition=AcquisitionKind.MU_MAX, **kw)

    @classmethod
    def fixed(cls, t_star, acquisition, **kw):
        return cls(switch_mode=Fixed(t_star), acquisition=acquisition, **kw)

    @classmethod
    def early_stopping(cls, acquisition, fractions=(0.25, 0.5, 0.75, 1.0), epsilon=0.05, **kw):
        schedule = SpendingSchedule.from_fractions(fractions, epsilon)
        return cls(switch_mode=EarlyStopping(schedule), acquisition=acquisition, epsilon=epsilon, **kw)

    def replace(self, **changes) -> "TrialConfig":
        return dataclasses.replace(self, **changes)

    @property
    def planned_switch_step(self) -> int | None:
        """t* known before the trial starts; None for early stopping."""
        mode = self.switch_mode
        if isinstance(mode, Fixed):
            return mode.t_star
        if isinstance(mode, RCT):
            return self.total_steps
        if isinstance(mode, CausalBALD):
            return 1
        return None

    def look_steps(self) -> list[int]:
        """Steps at which an early-stopping schedule tests: ceil(f * T)."""
        fr = self.switch_mode.schedule.information_fractions
        return [max(1, math.ceil(f * self.total_steps - 1e-9)) for f in fr]


class TrialDataset:
    """Revealed observations in acquisition order."""

    _COLUMNS = ("ids", "X", "w", "y", "step", "randomized", "is_train")

    def __init__(self, dim: int):
        self.dim = dim
        self._chunks: dict[str, list[np.ndarray]] = {c: [] for c in self._COLUMNS}
        self._cache: dict[str, np.ndarray] = {}

    def append(self, ids, X, w, y, step: int, randomized: bool, is_train) -> None:
        n = len(ids)
        self._chunks["ids"].append(np.asarray(ids, dtype=np.int64))
        self._chunks["X"].append(np.asarray(X, dtype=float).reshape(n, self.dim))
        self._chunks["w"].append(np.asarray(w, dtype=np.int64))
        self._chunks["y"].append(np.asarray(y, dtype=float))
        self._chunks["step"].append(np.full(n, step, dtype=np.int64))
        self._chunks["randomized"].append(np.full(n, randomized, dtype=bool))
        self._chunks["is_train"].append(np.asarray(is_train, dtype=bool))
        self._cache.clear()

    def _col(self, name: str) -> np.ndarray:
        if name not in self._cache:
            chunks = self._chunks[name]
            if chunks:
                self._cache[name] = np.concatenate(chunks)
            else:
                self._cache[name] = np.zeros((0, self.dim)) if name == "X" else np.zeros(0)
        return self._cache[name]

    def __len__(self) -> int:
        return int(sum(len(c) for c in self._chunks["ids"]))

    ids = property(lambda self: self._col("ids"))
    X = property(lambda self: self._col("X"))
    w = property(lambda self: self._col("w"))
    y = property(lambda self: self._col("y"))
    step = property(lambda self: self._col("step"))
    randomized = property(lambda self: self._col("randomized"))
    is_train = property(lambda self: self._col("is_train"))

    def train_counts(self) -> tuple[int, int]:
        m = self.is_train
        return int(np.sum(self.w[m] == 0)), int(np.sum(self.w[m] == 1))

    def to_dict(self) -> dict:
        return {
            "id": self.ids.tolist(),
            "x": self.X.tolist(),
            "w": self.w.tolist(),
            "y": self.y.tolist(),
            "step": self.step.tolist(),
            "randomized": self.randomized.tolist(),
            "train": self.is_train.tolist(),
        }


@dataclass
class TrialResult:
    dataset: TrialDataset
    eta: int
    realized_switch_step: int
    policy_on_test: np.ndarray
    cate_on_test: np.ndarray
    per_step_trace: list[dict]
    test_result: TestResult | None = None
    seed: int = 0
    final_hyperparameters: dict = field(default_factory=dict)


def _split_train_val(b: int, ratio: float, rng: np.random.Generator) -> np.ndarray:
    n_train = int(round(b * ratio))
    is_train = np.zeros(b, dtype=bool)
    is_train[rng.permutation(b)[:n_train]] = True
    return is_train


def _regulatory_test(ds: TrialDataset, alpha: float) -> TestResult | None:
    m = ds.randomized
    try:
        return t_test(ds.y[m & (ds.w == 1)], ds.y[m & (ds.w == 0)], alpha=alpha)
    except StatTestError:
        return None


class _Runner:
    def __init__(self, config: TrialConfig, cohort: Cohort):
        self.cfg = config
        self.cohort = cohort
        self.rng = np.random.default_rng([config.seed, 1])
        self.ds = TrialDataset(cohort.pool.dim)
        self.trace: list[dict] = []
        self.t = 0
        self._levels = cohort.pool.subgroup_levels()

    def _acquire(self, model, kind: AcquisitionKind, randomized: bool) -> None:
        cfg, pool = self.cfg, self.cohort.pool
        avail = self.cohort.available()
        if len(avail) < cfg.batch_size:
            raise TrialError(f"pool exhausted at step {self.t + 1}: {len(avail)} patients left")
        sel = select_batch(pool.X[avail], model, kind, cfg.batch_size, self.rng, cfg.sign_bald_draws)
        rows = avail[sel.indices]
        arms = sel.arms
        ids = pool.ids[rows]
        y = np.array([self.cohort.reveal(i, w) for i, w in zip(ids.tolist(), arms.tolist())])
        is_train = _split_train_val(cfg.batch_size, cfg.train_val_ratio, self.rng)
        self.t += 1
        self.ds.append(ids, pool.X[rows], arms, y, self.t, randomized, is_train)
        groups = pool.take(rows)
        self.trace.append(
            {
                "step": self.t,
                "stage": "randomized" if randomized else "augmented",
                "arm0": int(np.sum(arms == 0)),
                "arm1": int(np.sum(arms == 1)),
                "subgroups": {lv: int(groups.subgroup_mask(lv).sum()) for lv in self._levels},
                "x": pool.X[rows].tolist(),
                "w": arms.tolist(),
            }
        )

    def _randomize(self) -> None:
        self._acquire(None, AcquisitionKind.UNIFORM, randomized=True)

    def _coverage_ok(self) -> bool:
        return min(self.ds.train_counts()) >= MIN_TRAIN_PER_ARM

    def run(self) -> TrialResult:
        cfg = self.cfg
        T = cfg.total_steps
        test_res = None
        if isinstance(cfg.switch_mode, EarlyStopping):
            schedule = cfg.switch_mode.schedule
            looks = dict(zip(cfg.look_steps(), range(len(schedule.information_fractions))))
            eta = 0
            while self.t < T:
                self._randomize()
                if self.t in looks:
                    m = self.ds.randomized
                    decision = interim_decision(
                        self.ds.w[m], self.ds.y[m], schedule, looks[self.t], self.t / T
                    )
                    if decision is InterimDecision.REJECT:
                        eta = 1
                        test_res = _regulatory_test(self.ds, schedule.threshold(looks[self.t], self.t / T))
                        break
            if eta == 0:
                test_res = _regulatory_test(self.ds, cfg.epsilon)
            switch = self.t
        else:
            switch = cfg.planned_switch_step
            while self.t < switch:
                self._randomize()
            test_res = _regulatory_test(self.ds, cfg.epsilon)
            eta = int(test_res is not None and test_res.rejected)

        while not self._coverage_ok() and self.t < T:
            self._randomize()
            switch = self.t
            if not isinstance(cfg.switch_mode, EarlyStopping) or eta == 0:
                test_res = _regulatory_test(self.ds, cfg.epsilon)
                eta = int(test_res is not None and test_res.rejected)

        while self.t < T:
            model = None
            if cfg.acquisition is not AcquisitionKind.UNIFORM:
                tr = self.ds.is_train
                model = fit_causal(self.ds.X[tr], self.ds.w[tr], self.ds.y[tr], cfg.grid)
            self._acquire(model, cfg.acquisition, randomized=False)

        try:
            final = tune_causal(self.ds.X, self.ds.w, self.ds.y, self.ds.is_train, cfg.grid)
        except FitError as exc:
            raise TrialError(f"final model: {exc}") from exc
        cate, _ = cate_predict(final, self.cohort.test.X)
        hyper = {
            f"arm{w}": {
                "kernel": final.arm(w).kernel.label(),
                "noise_variance": final.arm(w).noise_variance,
            }
            for w in (0, 1)
        }
        return TrialResult(
            self.ds, eta, switch, policy_from_cate(cate), cate, self.trace, test_res, cfg.seed, hyper
        )


def run_trial(config: TrialConfig, cohort: Cohort) -> TrialResult:
    """Run one trial; consumes patients from ``cohort``'s pool."""
    if len(cohort.available()) < config.total_steps * config.batch_size:
        raise TrialError(
            f"pool has {len(cohort.available())} patients, trial needs "
            f"{config.total_steps * config.batch_size}"
        )
    return _Runner(config, cohort).run()


def run_trial_early_stopping(config: TrialConfig, cohort: Cohort) -> TrialResult:
    if not isinstance(config.switch_mode, EarlyStopping):
        raise ConfigurationError("config does not use an early-stopping switch")
    return run_trial(config, cohort)


@dataclass(frozen=True)
class SyntheticCohorts:
    """Picklable cohort factory for the synthetic benchmark."""

    n_pool: int = 10_000
    n_test: int = 2_000
    null_effect: bool = False

    def __call__(self, seed: int) -> Cohort:
        return gen_synthetic(self.n_pool, self.n_test, seed, self.null_effect)


@dataclass(frozen=True)
class CsvCohorts:
    path: str
    split_fraction: float = 0.8

    def __call__(self, seed: int) -> Cohort:
        return load_potential_outcomes_csv(self.path, self.split_fraction, seed)


def _run_seed(args) -> TrialResult:
    template, seed, factory = args
    try:
        return run_trial(template.replace(seed=seed), factory(seed))
    except RFANError as exc:
        raise TrialError(f"seed {seed}: {exc}") from exc


def run_experiment(
    template: TrialConfig,
    n_seeds: int,
    cohort_factory: Callable[[int], Cohort] = SyntheticCohorts(),
    base_seed: int | None = None,
    jobs: int = 1,
) -> list[TrialResult]:
    """Independent trials with seeds ``base, base+1, ...`` (base defaults to the template seed).

    Each seed gets a freshly generated cohort from ``cohort_factory(seed)``.
    Results come back ordered by seed regardless of ``jobs``.
    """
    if n_seeds < 1:
        raise ConfigurationError("n_seeds must be >= 1")
    base = template.seed if base_seed is None else base_seed
    tasks = [(template, base + i, cohort_factory) for i in range(n_seeds)]
    if jobs <= 1:
        return [_run_seed(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_seed, tasks))
