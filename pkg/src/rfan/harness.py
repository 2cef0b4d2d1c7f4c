"""
Batch experiment runner driven by an INI file.

Config grammar
--------------
One ``[experiment]`` section and one ``[design <label>]`` section per design::

    [experiment]
    dataset = synthetic            # or csv:relative/or/absolute/path.csv
    n_seeds = 10
    base_seed = 0
    n_pool = 10000                 # synthetic only
    n_test = 2000                  # synthetic only
    null_effect = false            # synthetic only
    split_fraction = 0.8           # csv only
    subgroups = s1, s2             # default: s1, s2 (synthetic) / every level (csv)
    out = results
    sweep_over = N                 # optional: N or t_star
    sweep_values = 100, 200, 300

    [design rfan]
    mode = fixed                   # rct | fixed | es | causal_bald
    T = 30
    b = 10
    t_star = 15                    # fixed only; or switch_fraction = 0.5
    acquisition = mu_pi_unf
    epsilon = 0.05
    fractions = 0.25, 0.5, 0.75, 1 # es only
    train_val_ratio = 0.9
    sign_bald_draws = 256

A CSV path is resolved against the config file's directory; ``out`` is
resolved against the working directory. Sweeping over ``N`` sets
``T = N / b`` (N must be a multiple of b); sweeping over ``t_star`` changes
fixed-mode designs and leaves the other modes as they are.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .acquisition import AcquisitionKind
from .errors import ConfigurationError, RFANError
from .metrics import MetricsReport, evaluate
from .trial import CsvCohorts, SyntheticCohorts, TrialConfig, TrialResult, run_experiment

RESULT_COLUMNS = (
    "design",
    "sweep_value",
    "policy_value",
    "policy_value_sem",
    "wc_policy_value",
    "wc_policy_value_sem",
    "success_rate",
    "policy_error_pct",
    "sqrt_pehe",
    "sqrt_pehe_sem",
    "ptmb",
    "ptf",
)

# curve file name -> (aggregate field, or None for a scalar report attribute)
CURVES = {
    "policy_value": "policy_value",
    "wc_policy_value": "worst_case_policy_value",
    "success_rate": "success",
    "policy_error_pct": "policy_error_rate",
    "sqrt_pehe": "sqrt_pehe",
    "ptmb": None,
    "ptf": None,
}

_MODES = ("rct", "fixed", "es", "causal_bald")
_DESIGN_KEYS = {
    "mode", "t", "b", "t_star", "switch_fraction", "acquisition", "epsilon",
    "fractions", "train_val_ratio", "sign_bald_draws",
}
_EXPERIMENT_KEYS = {
    "dataset", "n_seeds", "base_seed", "n_pool", "n_test", "null_effect",
    "split_fraction", "subgroups", "out", "sweep_over", "sweep_values",
}


@dataclass(frozen=True)
class DesignSpec:
    label: str
    mode: str
    total_steps: int
    batch_size: int
    acquisition: AcquisitionKind
    t_star: int | None = None
    switch_fraction: float | None = None
    epsilon: float = 0.05
    fractions: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    train_val_ratio: float = 0.9
    sign_bald_draws: int = 256

    def build(self, seed: int, sweep_over: str | None = None, value=None) -> TrialConfig:
        """TrialConfig for one sweep value; raises ConfigurationError if invalid."""
        T, t_star = self.total_steps, self.t_star
        if sweep_over == "N":
            if value % self.batch_size:
                raise ConfigurationError(f"N={value} is not a multiple of b={self.batch_size}")
            T = value // self.batch_size
        elif sweep_over == "t_star" and self.mode == "fixed":
            t_star = value
        if self.mode == "fixed" and self.switch_fraction is not None and sweep_over != "t_star":
            t_star = max(1, math.ceil(self.switch_fraction * T - 1e-9))
        common = dict(
            total_steps=T,
            batch_size=self.batch_size,
            epsilon=self.epsilon,
            train_val_ratio=self.train_val_ratio,
            sign_bald_draws=self.sign_bald_draws,
            seed=seed,
        )
        if self.mode == "rct":
            return TrialConfig.rct(**common)
        if self.mode == "causal_bald":
            return TrialConfig.causal_bald(**common)
        if self.mode == "fixed":
            return TrialConfig.fixed(t_star, self.acquisition, **common)
        eps = common.pop("epsilon")
        return TrialConfig.early_stopping(self.acquisition, self.fractions, eps, **common)


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: str
    designs: tuple[DesignSpec, ...]
    n_seeds: int = 10
    base_seed: int = 0
    n_pool: int = 10_000
    n_test: int = 2_000
    null_effect: bool = False
    split_fraction: float = 0.8
    subgroups: tuple[str, ...] | None = None
    out: str = "results"
    sweep_over: str | None = None
    sweep_values: tuple = ()
    csv_path: str | None = None

    def cohort_factory(self) -> Callable:
        if self.dataset == "csv":
            return CsvCohorts(self.csv_path, self.split_fraction)
        return SyntheticCohorts(self.n_pool, self.n_test, self.null_effect)

    def sweep_points(self) -> list:
        return list(self.sweep_values) if self.sweep_over else [None]

    def resolve_subgroups(self) -> list[str]:
        if self.subgroups:
            return list(self.subgroups)
        if self.dataset == "synthetic":
            return ["s1", "s2"]
        c = self.cohort_factory()(self.base_seed)
        levels = sorted(set(c.pool.subgroup_levels()) | set(c.test.subgroup_levels()))
        return levels or ["*"]


@dataclass
class RunRecord:
    label: str
    sweep_value: object
    report: MetricsReport
    results: list[TrialResult] = field(default_factory=list)


# parsing

def _field(section: str, key: str, raw: str, convert):
    try:
        return convert(raw)
    except (ValueError, ConfigurationError) as exc:
        raise ConfigurationError(f"[{section}] {key}: {exc}") from None


def _positive_int(raw: str) -> int:
    v = int(raw)
    if v < 1:
        raise ValueError(f"expected a positive integer, got {raw!r}")
    return v


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(v) for v in raw.replace(",", " ").split())


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected true/false, got {raw!r}")


def _parse_design(name: str, sec) -> DesignSpec:
    label = name.split(None, 1)[1].strip() if " " in name else ""
    if not label:
        raise ConfigurationError(f"[{name}]: design section needs a label, e.g. [design rct]")
    unknown = set(sec) - _DESIGN_KEYS
    if unknown:
        raise ConfigurationError(f"[{name}] unknown keys: {', '.join(sorted(unknown))}")
    if "mode" not in sec:
        raise ConfigurationError(f"[{name}] mode: missing (one of {', '.join(_MODES)})")
    mode = sec["mode"].strip().lower()
    if mode not in _MODES:
        raise ConfigurationError(f"[{name}] mode: {mode!r} is not one of {', '.join(_MODES)}")
    default_acq = {"rct": "uniform", "causal_bald": "mu_max"}.get(mode)
    if mode in ("fixed", "es") and "acquisition" not in sec:
        raise ConfigurationError(f"[{name}] acquisition: missing")
    kw = dict(
        label=label,
        mode=mode,
        total_steps=_field(name, "T", sec.get("t", "30"), _positive_int),
        batch_size=_field(name, "b", sec.get("b", "10"), _positive_int),
        acquisition=_field(name, "acquisition", sec.get("acquisition", default_acq), AcquisitionKind.parse),
        epsilon=_field(name, "epsilon", sec.get("epsilon", "0.05"), float),
        train_val_ratio=_field(name, "train_val_ratio", sec.get("train_val_ratio", "0.9"), float),
        sign_bald_draws=_field(name, "sign_bald_draws", sec.get("sign_bald_draws", "256"), int),
    )
    if "fractions" in sec:
        kw["fractions"] = _field(name, "fractions", sec["fractions"], _float_list)
    if mode == "fixed":
        if ("t_star" in sec) == ("switch_fraction" in sec):
            raise ConfigurationError(f"[{name}] t_star: give exactly one of t_star or switch_fraction")
        if "t_star" in sec:
            kw["t_star"] = _field(name, "t_star", sec["t_star"], int)
        else:
            kw["switch_fraction"] = _field(name, "switch_fraction", sec["switch_fraction"], float)
    elif "t_star" in sec or "switch_fraction" in sec:
        raise ConfigurationError(f"[{name}] t_star: only fixed-mode designs take a switching step")
    return DesignSpec(**kw)


def parse_config(text: str, base_dir: Path | str = ".") -> ExperimentSpec:
    """Parse and validate a config; every error names its section and key."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config syntax: {exc}") from None
    if "experiment" not in cp:
        raise ConfigurationError("[experiment] section missing")
    ex = cp["experiment"]
    unknown = set(ex) - _EXPERIMENT_KEYS
    if unknown:
        raise ConfigurationError(f"[experiment] unknown keys: {', '.join(sorted(unknown))}")

    dataset = ex.get("dataset", "synthetic").strip()
    csv_path = None
    if dataset.startswith("csv:"):
        p = Path(dataset[4:].strip())
        csv_path = str(p if p.is_absolute() else Path(base_dir) / p)
        if not Path(csv_path).is_file():
            raise ConfigurationError(f"[experiment] dataset: no such file {csv_path}")
        dataset = "csv"
    elif dataset != "synthetic":
        raise ConfigurationError(f"[experiment] dataset: expected 'synthetic' or 'csv:<path>', got {dataset!r}")

    designs = []
    for name in cp.sections():
        if name == "experiment":
            continue
        if name.split(None, 1)[0] != "design":
            raise ConfigurationError(f"[{name}]: unknown section")
        designs.append(_parse_design(name, cp[name]))
    if not designs:
        raise ConfigurationError("no [design <label>] sections")
    labels = [d.label for d in designs]
    dup = {l for l in labels if labels.count(l) > 1}
    if dup:
        raise ConfigurationError(f"duplicate design labels: {', '.join(sorted(dup))}")

    sweep_over = ex.get("sweep_over")
    sweep_values: tuple = ()
    if sweep_over is not None:
        sweep_over = sweep_over.strip()
        if sweep_over not in ("N", "t_star"):
            raise ConfigurationError(f"[experiment] sweep_over: expected N or t_star, got {sweep_over!r}")
        if "sweep_values" not in ex:
            raise ConfigurationError("[experiment] sweep_values: missing")
        sweep_values = _field(
            "experiment", "sweep_values", ex["sweep_values"],
            lambda r: tuple(_positive_int(v) for v in r.replace(",", " ").split()),
        )
        if not sweep_values:
            raise ConfigurationError("[experiment] sweep_values: empty")
    elif "sweep_values" in ex:
        raise ConfigurationError("[experiment] sweep_values: given without sweep_over")

    subgroups = None
    if "subgroups" in ex:
        subgroups = tuple(s.strip() for s in ex["subgroups"].split(",") if s.strip())
        if not subgroups:
            raise ConfigurationError("[experiment] subgroups: empty")

    spec = ExperimentSpec(
        dataset=dataset,
        designs=tuple(designs),
        n_seeds=_field("experiment", "n_seeds", ex.get("n_seeds", "10"), _positive_int),
        base_seed=_field("experiment", "base_seed", ex.get("base_seed", "0"), int),
        n_pool=_field("experiment", "n_pool", ex.get("n_pool", "10000"), _positive_int),
        n_test=_field("experiment", "n_test", ex.get("n_test", "2000"), _positive_int),
        null_effect=_field("experiment", "null_effect", ex.get("null_effect", "false"), _bool),
        split_fraction=_field("experiment", "split_fraction", ex.get("split_fraction", "0.8"), float),
        subgroups=subgroups,
        out=ex.get("out", "results").strip(),
        sweep_over=sweep_over,
        sweep_values=sweep_values,
        csv_path=csv_path,
    )
    # build every (design, sweep value) once so invalid combinations fail before any run
    for d in spec.designs:
        for v in spec.sweep_points():
            try:
                d.build(spec.base_seed, spec.sweep_over, v)
            except ConfigurationError as exc:
                where = "" if v is None else f" at {spec.sweep_over}={v}"
                raise ConfigurationError(f"[design {d.label}]{where}: {exc}") from None
    return spec


def load_config(path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)


# running

def run_spec(spec: ExperimentSpec, jobs: int = 1, log=None) -> list[RunRecord]:
    factory = spec.cohort_factory()
    subgroups = spec.resolve_subgroups()
    records = []
    for v in spec.sweep_points():
        for d in spec.designs:
            where = d.label if v is None else f"{d.label} ({spec.sweep_over}={v})"
            if log:
                log(f"running {where}: {spec.n_seeds} seeds")
            template = d.build(spec.base_seed, spec.sweep_over, v)
            try:
                results = run_experiment(template, spec.n_seeds, factory, spec.base_seed, jobs)
                cohorts = [factory(r.seed) for r in results]
                report = evaluate(results, cohorts, subgroups)
            except RFANError as exc:
                raise RFANError(f"design {where}: {exc}") from exc
            records.append(RunRecord(d.label, v, report, results))
    return records


# output

def _num(v) -> str:
    return "" if v is None else format(v, ".6g")


def _row(rec: RunRecord) -> list[str]:
    agg = rec.report.aggregate
    return [
        rec.label,
        "" if rec.sweep_value is None else str(rec.sweep_value),
        _num(agg["policy_value"]["mean"]),
        _num(agg["policy_value"]["sem"]),
        _num(agg["worst_case_policy_value"]["mean"]),
        _num(agg["worst_case_policy_value"]["sem"]),
        _num(agg["success"]["mean"]),
        _num(agg["policy_error_rate"]["mean"]),
        _num(agg["sqrt_pehe"]["mean"]),
        _num(agg["sqrt_pehe"]["sem"]),
        _num(rec.report.ptmb),
        _num(rec.report.ptf),
    ]


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def results_csv(records: list[RunRecord]) -> str:
    return _csv_text(RESULT_COLUMNS, [_row(r) for r in records])


def results_json(records: list[RunRecord], spec: ExperimentSpec | None = None) -> str:
    runs = []
    for rec in records:
        runs.append(
            {
                "design": rec.label,
                "sweep_value": rec.sweep_value,
                **rec.report.to_dict(),
                "traces": [
                    {
                        "seed": int(r.seed),
                        "realized_switch_step": int(r.realized_switch_step),
                        "final_hyperparameters": r.final_hyperparameters,
                        "steps": r.per_step_trace,
                    }
                    for r in rec.results
                ],
            }
        )
    doc = {"sweep_over": None if spec is None else spec.sweep_over, "runs": runs}
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def curve_csvs(records: list[RunRecord]) -> dict[str, str]:
    out = {}
    for name, agg_key in CURVES.items():
        rows = []
        for rec in records:
            if agg_key is None:
                mean, sem = getattr(rec.report, name), None
            else:
                mean, sem = rec.report.aggregate[agg_key]["mean"], rec.report.aggregate[agg_key]["sem"]
            rows.append([rec.label, str(rec.sweep_value), _num(mean), _num(sem)])
        out[name] = _csv_text(("design", "sweep_value", "mean", "sem"), rows)
    return out


def emit_results(records: list[RunRecord], out_dir, spec: ExperimentSpec | None = None) -> list[Path]:
    """Write results.csv, results.json and, for sweeps, curve_<metric>.csv files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {"results.csv": results_csv(records), "results.json": results_json(records, spec)}
    if any(r.sweep_value is not None for r in records):
        files.update({f"curve_{k}.csv": v for k, v in curve_csvs(records).items()})
    written = []
    for name, text in files.items():
        p = out_dir / name
        with open(p, "w", newline="") as fh:
            fh.write(text)
        written.append(p)
    return written


def run_from_config(path, out=None, seeds=None, jobs=None, log=None) -> int:
    """Parse, run and emit. Returns 0 on success, 1 on a runtime failure, 2 on a config error."""
    err = lambda msg: print(msg, file=sys.stderr)
    try:
        spec = load_config(path)
        if seeds is not None:
            if seeds < 1:
                raise ConfigurationError("--seeds must be >= 1")
            spec = _replace(spec, n_seeds=seeds)
        if jobs is not None and jobs < 1:
            raise ConfigurationError("--jobs must be >= 1")
    except ConfigurationError as exc:
        err(f"config error: {exc}")
        return 2
    try:
        records = run_spec(spec, jobs or 1, log)
        emit_results(records, out or spec.out, spec)
    except RFANError as exc:
        err(f"run failed: {exc}")
        return 1
    except OSError as exc:
        err(f"cannot write results: {exc}")
        return 1
    return 0


def _replace(spec: ExperimentSpec, **changes) -> ExperimentSpec:
    return dataclasses.replace(spec, **changes)
