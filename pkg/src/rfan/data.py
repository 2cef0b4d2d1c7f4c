"""
Simulation oracles: patients with both potential outcomes stored.

``gen_synthetic`` draws the one-dimensional benchmark population::

    x ~ N(0, 1)
    E[Y^1 | x] = 2x + 3
    E[Y^0 | x] = 1 + 2 sin(2x)
    Y^w = E[Y^w | x] + N(0, 1)         (independent noise per arm)

with sensitive subgroups ``s1 = {x < -1.2}`` and ``s2 = {x >= 1.3}``.
``load_potential_outcomes_csv`` reads semi-synthetic cohorts produced by
external preprocessing.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, OracleError, ParseError

MAJORITY = ""
SUBGROUP_SEPARATOR = ";"


@dataclass(frozen=True)
class PatientRecord:
    id: int
    covariates: np.ndarray
    y0: float
    y1: float
    mean0: float | None = None
    mean1: float | None = None
    subgroup: str = MAJORITY

    def outcome(self, w: int) -> float:
        return self.y1 if w == 1 else self.y0


@dataclass
class PatientTable:
    """Column-oriented collection of patients.

    ``subgroup`` holds one label per patient; several attribute levels may
    be joined with ``;`` (e.g. ``"race=B;sex=F"``) and the patient then
    belongs to each level.
    """

    ids: np.ndarray
    X: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    mean0: np.ndarray | None = None
    mean1: np.ndarray | None = None
    subgroup: np.ndarray = field(default=None)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        self.y0 = np.asarray(self.y0, dtype=float)
        self.y1 = np.asarray(self.y1, dtype=float)
        n = self.ids.shape[0]
        if self.subgroup is None:
            self.subgroup = np.full(n, MAJORITY, dtype=object)
        else:
            self.subgroup = np.asarray(self.subgroup, dtype=object)
        if (self.mean0 is None) != (self.mean1 is None):
            raise InputError("mean0 and mean1 must be both present or both absent")
        if self.mean0 is not None:
            self.mean0 = np.asarray(self.mean0, dtype=float)
            self.mean1 = np.asarray(self.mean1, dtype=float)
        for name in ("X", "y0", "y1", "subgroup"):
            if getattr(self, name).shape[0] != n:
                raise InputError(f"column {name} has wrong length")
        if len(np.unique(self.ids)) != n:
            raise InputError("patient ids must be unique")

    def __len__(self) -> int:
        return self.ids.shape[0]

    def __getitem__(self, i: int) -> PatientRecord:
        m0 = None if self.mean0 is None else float(self.mean0[i])
        m1 = None if self.mean1 is None else float(self.mean1[i])
        return PatientRecord(
            int(self.ids[i]), self.X[i].copy(), float(self.y0[i]), float(self.y1[i]),
            m0, m1, str(self.subgroup[i]),
        )

    def records(self) -> list[PatientRecord]:
        return [self[i] for i in range(len(self))]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def has_means(self) -> bool:
        return self.mean0 is not None

    def take(self, idx) -> "PatientTable":
        idx = np.asarray(idx, dtype=np.int64)
        return PatientTable(
            self.ids[idx], self.X[idx], self.y0[idx], self.y1[idx],
            None if self.mean0 is None else self.mean0[idx],
            None if self.mean1 is None else self.mean1[idx],
            self.subgroup[idx],
        )

    def truth(self) -> tuple[np.ndarray, np.ndarray]:
        """Ground-truth per-arm values: noiseless means if known, else realized outcomes."""
        if self.has_means:
            return self.mean0, self.mean1
        return self.y0, self.y1

    def true_cate(self) -> np.ndarray:
        t0, t1 = self.truth()
        return t1 - t0

    def subgroup_levels(self) -> list[str]:
        levels = set()
        for label in self.subgroup:
            levels.update(lv for lv in str(label).split(SUBGROUP_SEPARATOR) if lv)
        return sorted(levels)

    def subgroup_mask(self, level: str) -> np.ndarray:
        return np.array(
            [level in str(lab).split(SUBGROUP_SEPARATOR) for lab in self.subgroup], dtype=bool
        )


@dataclass
class Cohort:
    """A pool to recruit from plus a held-out test population.

    The pool doubles as the outcome oracle: :meth:`reveal` hands out the
    stored potential outcome and consumes the patient.
    """

    pool: PatientTable
    test: PatientTable
    seed: int = 0
    acquired: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.acquired is None:
            self.acquired = np.zeros(len(self.pool), dtype=bool)
        if np.intersect1d(self.pool.ids, self.test.ids).size:
            raise InputError("pool and test share patient ids")
        self._row = {int(i): r for r, i in enumerate(self.pool.ids)}

    def available(self) -> np.ndarray:
        """Pool row indices not yet acquired, ascending."""
        return np.flatnonzero(~self.acquired)

    def reveal(self, id: int, w: int) -> float:
        row = self._row.get(int(id))
        if row is None:
            raise OracleError(f"unknown patient id {id}")
        if self.acquired[row]:
            raise OracleError(f"patient {id} already acquired")
        if w not in (0, 1):
            raise OracleError(f"arm must be 0 or 1, got {w}")
        self.acquired[row] = True
        return float(self.pool.y1[row] if w == 1 else self.pool.y0[row])

    def copy(self) -> "Cohort":
        return Cohort(self.pool, self.test, self.seed, self.acquired.copy())


def synthetic_means(x) -> tuple[np.ndarray, np.ndarray]:
    """Noiseless conditional means (control, treated) of the benchmark population."""
    x = np.asarray(x, dtype=float)
    return 1.0 + 2.0 * np.sin(2.0 * x), 2.0 * x + 3.0


def synthetic_subgroups(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    labels = np.full(x.shape, MAJORITY, dtype=object)
    labels[x < -1.2] = "s1"
    labels[x >= 1.3] = "s2"
    return labels


def _draw_synthetic(n: int, rng: np.random.Generator, id_offset: int, null_effect: bool) -> PatientTable:
    x = rng.standard_normal(n)
    e0 = rng.standard_normal(n)
    e1 = rng.standard_normal(n)
    m0, m1 = synthetic_means(x)
    if null_effect:
        m1 = m0.copy()
    return PatientTable(
        np.arange(id_offset, id_offset + n), x[:, None], m0 + e0, m1 + e1, m0, m1,
        synthetic_subgroups(x),
    )


def gen_synthetic(n_pool: int = 10_000, n_test: int = 2_000, seed: int = 0, null_effect: bool = False) -> Cohort:
    """Draw a pool (generator seeded with ``seed``) and test set (``seed + 1``).

    ``null_effect`` replaces the treated law by the control law, giving a
    population without any treatment effect.
    """
    if n_pool < 1 or n_test < 1:
        raise InputError("pool and test sizes must be >= 1")
    pool = _draw_synthetic(n_pool, np.random.default_rng(seed), 0, null_effect)
    test = _draw_synthetic(n_test, np.random.default_rng(seed + 1), n_pool, null_effect)
    return Cohort(pool, test, seed)


def _parse_float(cell: str, line: int, column: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"row {line}, column {column!r}: not a number: {cell!r}") from None
    if not math.isfinite(v):
        raise ParseError(f"row {line}, column {column!r}: non-finite value {cell!r}")
    return v


def read_potential_outcomes_csv(path) -> PatientTable:
    """Parse ``id,subgroup,x_0,...,x_{d-1},y0,y1`` into a table."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        d = len(header) - 4
        expected = ["id", "subgroup"] + [f"x_{j}" for j in range(max(d, 0))] + ["y0", "y1"]
        if d < 1 or header != expected:
            raise ParseError(f"{path}: header {header} does not match {expected if d >= 1 else 'id,subgroup,x_0,...,y0,y1'}")
        ids, groups, X, y0, y1 = [], [], [], [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"row {line}: expected {len(header)} columns, got {len(row)}")
            try:
                ids.append(int(row[0]))
            except ValueError:
                raise ParseError(f"row {line}, column 'id': not an integer: {row[0]!r}") from None
            groups.append(row[1].strip())
            X.append([_parse_float(row[2 + j], line, header[2 + j]) for j in range(d)])
            y0.append(_parse_float(row[-2], line, "y0"))
            y1.append(_parse_float(row[-1], line, "y1"))
    if not ids:
        raise ParseError(f"{path}: no data rows")
    if len(set(ids)) != len(ids):
        raise ParseError(f"{path}: duplicate patient ids")
    return PatientTable(np.array(ids), np.array(X, dtype=float).reshape(len(ids), d), y0, y1, subgroup=groups)


def write_potential_outcomes_csv(table: PatientTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "subgroup"] + [f"x_{j}" for j in range(table.dim)] + ["y0", "y1"])
        for i in range(len(table)):
            writer.writerow(
                [int(table.ids[i]), table.subgroup[i]]
                + [repr(float(v)) for v in table.X[i]]
                + [repr(float(table.y0[i])), repr(float(table.y1[i]))]
            )


def load_potential_outcomes_csv(path, split_fraction: float = 0.8, seed: int = 0) -> Cohort:
    """Read a semi-synthetic cohort and split it into pool and test sets.

    Noiseless means are unknown for such data, so metrics fall back to the
    realized potential outcomes.
    """
    if not 0.0 < split_fraction < 1.0:
        raise InputError("split_fraction must lie in (0, 1)")
    table = read_potential_outcomes_csv(Path(path))
    n = len(table)
    n_pool = int(round(split_fraction * n))
    if n_pool < 1 or n_pool >= n:
        raise InputError(f"split {split_fraction} of {n} rows leaves an empty pool or test set")
    perm = np.random.default_rng(seed).permutation(n)
    return Cohort(table.take(np.sort(perm[:n_pool])), table.take(np.sort(perm[n_pool:])), seed)
