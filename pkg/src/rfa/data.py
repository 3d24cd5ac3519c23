"""
Instance-aligned tables: language feature groups, extra-linguistic factors
and outcomes, with CSV ingestion and row alignment.

Two on-disk layouts are supported for feature tables:

* long:  ``group_id,feature,value`` (one row per non-zero cell)
* wide:  ``group_id,<feat1>,<feat2>,...``

Outcomes (and word-count tables) use the wide layout with one value column.
Files ending in ``.gz`` are read and written gzip-compressed.
"""
from __future__ import annotations

import csv
import gzip
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, DegenerateInputError, DimensionError

LANGUAGE_GROUPS = ("ngrams", "topics")
ADAPTED_GROUPS = ("adapted-ngrams", "adapted-topics")
GROUPS = LANGUAGE_GROUPS + ("factors",) + ADAPTED_GROUPS


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def _unique(seq, what):
    seen = set()
    for s in seq:
        if s in seen:
            raise DimensionError(f"duplicate {what}: {s!r}")
        seen.add(s)


@dataclass(frozen=True)
class FeatureTable:
    """Matrix of instances x named features, tagged with its group."""

    group: str
    instance_ids: tuple
    feature_names: tuple
    values: np.ndarray

    def __post_init__(self):
        if self.group not in GROUPS:
            raise ValueError(f"unknown group {self.group!r}; expected one of {GROUPS}")
        ids = tuple(str(i) for i in self.instance_ids)
        names = tuple(str(f) for f in self.feature_names)
        _unique(ids, "instance id")
        _unique(names, "feature name")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.size == 0:
            vals = vals.reshape(len(ids), len(names))
        if vals.shape != (len(ids), len(names)):
            raise DimensionError(
                f"values shape {vals.shape} does not match "
                f"{len(ids)} ids x {len(names)} features"
            )
        if not np.all(np.isfinite(vals)):
            raise DimensionError("feature values must be finite")
        object.__setattr__(self, "instance_ids", ids)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def shape(self):
        return self.values.shape

    def rows(self, ids):
        """Table restricted (and reordered) to `ids`."""
        index = {k: i for i, k in enumerate(self.instance_ids)}
        try:
            rows = [index[i] for i in ids]
        except KeyError as e:
            raise DimensionError(f"instance id {e.args[0]!r} not in {self.group} table") from None
        return FeatureTable(self.group, tuple(ids), self.feature_names, self.values[rows])

    def columns(self, names):
        """Matrix of the named columns, in the requested order."""
        index = {k: i for i, k in enumerate(self.feature_names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise DimensionError(
                f"{self.group} table lacks features {missing[:5]}"
                + (" ..." if len(missing) > 5 else "")
            )
        return self.values[:, [index[n] for n in names]]

    def select(self, names):
        return FeatureTable(self.group, self.instance_ids, tuple(names), self.columns(names))

    def reindex(self, names):
        """Table with exactly `names` as columns; features absent here are all-zero."""
        index = {k: i for i, k in enumerate(self.feature_names)}
        out = np.zeros((len(self.instance_ids), len(names)))
        for j, n in enumerate(names):
            if n in index:
                out[:, j] = self.values[:, index[n]]
        return FeatureTable(self.group, self.instance_ids, tuple(names), out)

    def equals(self, other):
        return (
            self.group == other.group
            and self.instance_ids == other.instance_ids
            and self.feature_names == other.feature_names
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class OutcomeVector:
    """One numeric value per instance id."""

    name: str
    instance_ids: tuple
    values: np.ndarray

    def __post_init__(self):
        ids = tuple(str(i) for i in self.instance_ids)
        _unique(ids, "instance id")
        vals = np.asarray(self.values, dtype=np.float64).ravel()
        if vals.shape[0] != len(ids):
            raise DimensionError(f"{len(ids)} ids but {vals.shape[0]} values")
        if not np.all(np.isfinite(vals)):
            raise DimensionError("outcome values must be finite")
        object.__setattr__(self, "instance_ids", ids)
        object.__setattr__(self, "values", _frozen(vals))

    def rows(self, ids):
        index = {k: i for i, k in enumerate(self.instance_ids)}
        try:
            rows = [index[i] for i in ids]
        except KeyError as e:
            raise DimensionError(f"instance id {e.args[0]!r} not in outcome {self.name!r}") from None
        return OutcomeVector(self.name, tuple(ids), self.values[rows])


@dataclass(frozen=True)
class Dataset:
    """Language tables, factor table and outcome sharing one row order.

    `outcome` may be ``None`` for prediction-only data. `dropped` records how
    many ids each source lost during alignment; `metadata` carries free-form
    provenance (the synthetic generator stores its true coefficients there).
    """

    language: tuple
    factors: FeatureTable
    outcome: OutcomeVector | None
    dropped: tuple = ()
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "language", tuple(self.language))
        ids = self.factors.instance_ids
        for t in self.language:
            if t.instance_ids != ids:
                raise DimensionError(f"{t.group} rows are not aligned with factors")
        if self.outcome is not None and self.outcome.instance_ids != ids:
            raise DimensionError("outcome rows are not aligned with factors")
        groups = [t.group for t in self.language]
        _unique(groups, "language group")

    @property
    def instance_ids(self):
        return self.factors.instance_ids

    @property
    def n_instances(self):
        return len(self.factors.instance_ids)

    @property
    def y(self):
        if self.outcome is None:
            raise DimensionError("dataset has no outcome")
        return np.asarray(self.outcome.values)

    def group(self, name):
        for t in self.language:
            if t.group == name:
                return t
        raise KeyError(name)

    def subset(self, ids):
        """Dataset restricted to `ids`, in the given order."""
        ids = tuple(ids)
        return Dataset(
            [t.rows(ids) for t in self.language],
            self.factors.rows(ids),
            None if self.outcome is None else self.outcome.rows(ids),
            self.dropped,
            self.metadata,
        )

    def take(self, rows):
        ids = self.instance_ids
        return self.subset([ids[i] for i in rows])

    def with_factors(self, factors):
        return Dataset(self.language, factors, self.outcome, self.dropped, self.metadata)

    def with_language(self, language):
        return Dataset(language, self.factors, self.outcome, self.dropped, self.metadata)


def empty_factors(instance_ids):
    """Zero-column factor table (no extra-linguistic information)."""
    ids = tuple(instance_ids)
    return FeatureTable("factors", ids, (), np.zeros((len(ids), 0)))


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def _open_text(path, mode):
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, mode + "b"), encoding="utf-8", newline="")
    return open(path, mode, encoding="utf-8", newline="")


def _parse_float(text, path, line):
    try:
        v = float(text)
    except ValueError:
        raise DataFormatError(f"non-numeric value {text!r}", path, line) from None
    if not math.isfinite(v):
        raise DataFormatError(f"non-finite value {text!r}", path, line)
    return v


def _read_rows(path):
    with _open_text(path, "r") as fh:
        rows = list(csv.reader(fh))
    # drop trailing blank lines
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    if not rows:
        raise DataFormatError("empty file: no header", path)
    return rows


def load_long_csv(path, group):
    """Read a ``group_id,feature,value`` file and pivot it wide.

    Absent cells are 0. Features are ordered lexicographically, instance ids
    by first appearance.
    """
    rows = _read_rows(path)
    header = [c.strip() for c in rows[0]]
    if header != ["group_id", "feature", "value"]:
        raise DataFormatError(f"expected header group_id,feature,value, got {','.join(header)}", path, 1)
    if len(rows) == 1:
        raise DataFormatError("no data rows", path)
    ids = {}
    cells = {}
    features = set()
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise DataFormatError(f"expected 3 fields, got {len(row)}", path, line)
        gid, feat, val = row[0].strip(), row[1].strip(), row[2].strip()
        if not gid or not feat:
            raise DataFormatError("empty group_id or feature", path, line)
        key = (gid, feat)
        if key in cells:
            raise DataFormatError(f"duplicate cell ({gid}, {feat})", path, line)
        cells[key] = _parse_float(val, path, line)
        ids.setdefault(gid, len(ids))
        features.add(feat)
    names = sorted(features)
    col = {f: j for j, f in enumerate(names)}
    values = np.zeros((len(ids), len(names)))
    for (gid, feat), v in cells.items():
        values[ids[gid], col[feat]] = v
    return FeatureTable(group, tuple(ids), tuple(names), values)


def load_wide_csv(path, group):
    """Read a ``group_id,<feat1>,...`` file, keeping file order."""
    rows = _read_rows(path)
    header = [c.strip() for c in rows[0]]
    if not header or header[0] != "group_id":
        raise DataFormatError("first header column must be group_id", path, 1)
    names = header[1:]
    if len(set(names)) != len(names):
        raise DataFormatError("duplicate feature names in header", path, 1)
    if len(rows) == 1:
        raise DataFormatError("no data rows", path)
    ids = []
    seen = set()
    values = np.zeros((len(rows) - 1, len(names)))
    for i, row in enumerate(rows[1:]):
        line = i + 2
        if len(row) != len(header):
            raise DataFormatError(f"ragged row: expected {len(header)} fields, got {len(row)}", path, line)
        gid = row[0].strip()
        if gid in seen:
            raise DataFormatError(f"duplicate id {gid!r}", path, line)
        seen.add(gid)
        ids.append(gid)
        values[i] = [_parse_float(c.strip(), path, line) for c in row[1:]]
    return FeatureTable(group, tuple(ids), tuple(names), values)


def load_outcome_csv(path, name=None):
    """Read ``group_id,<name>``; `name` defaults to the header's column."""
    rows = _read_rows(path)
    header = [c.strip() for c in rows[0]]
    if len(header) != 2 or header[0] != "group_id":
        raise DataFormatError("expected header group_id,<outcome>", path, 1)
    if len(rows) == 1:
        raise DataFormatError("no data rows", path)
    ids, vals, seen = [], [], set()
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise DataFormatError(f"expected 2 fields, got {len(row)}", path, line)
        gid = row[0].strip()
        if gid in seen:
            raise DataFormatError(f"duplicate id {gid!r}", path, line)
        seen.add(gid)
        ids.append(gid)
        vals.append(_parse_float(row[1].strip(), path, line))
    return OutcomeVector(name or header[1], tuple(ids), np.array(vals))


def _fmt(v):
    return repr(float(v))


def save_long_csv(table, path):
    """Write non-zero cells in long layout (zeros are implied on reload)."""
    with _open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group_id", "feature", "value"])
        for i, gid in enumerate(table.instance_ids):
            for j in np.flatnonzero(table.values[i]):
                w.writerow([gid, table.feature_names[j], _fmt(table.values[i, j])])


def save_wide_csv(table, path):
    with _open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group_id", *table.feature_names])
        for gid, row in zip(table.instance_ids, table.values):
            w.writerow([gid, *(_fmt(v) for v in row)])


def save_outcome_csv(outcome, path):
    with _open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group_id", outcome.name])
        for gid, v in zip(outcome.instance_ids, outcome.values):
            w.writerow([gid, _fmt(v)])


# ---------------------------------------------------------------------------
# Alignment and filtering
# ---------------------------------------------------------------------------

def align(tables, outcome=None):
    """Join tables (and outcome) on their shared instance ids.

    The intersection of ids is kept, sorted lexicographically. A table with
    group ``"factors"`` becomes the dataset's factor table (at most one);
    when none is given an empty factor table is used.

    The dataset's ``dropped`` field lists ``(source, n_dropped)`` pairs in
    input order, outcome last.
    """
    tables = list(tables)
    if not tables:
        raise ValueError("align needs at least one table")
    sources = [(t.group, set(t.instance_ids)) for t in tables]
    if outcome is not None:
        sources.append((outcome.name, set(outcome.instance_ids)))
    common = set.intersection(*(s for _, s in sources))
    if not common:
        raise DegenerateInputError("no instance ids shared by all sources")
    ids = tuple(sorted(common))
    dropped = tuple((name, len(s) - len(common)) for name, s in sources)
    factor_tables = [t for t in tables if t.group == "factors"]
    if len(factor_tables) > 1:
        raise ValueError("more than one factor table given")
    factors = factor_tables[0].rows(ids) if factor_tables else empty_factors(ids)
    language = [t.rows(ids) for t in tables if t.group != "factors"]
    return Dataset(language, factors, None if outcome is None else outcome.rows(ids), dropped)


def prune_by_coverage(table, min_fraction):
    """Keep features that are non-zero in at least `min_fraction` of rows."""
    if not 0.0 <= min_fraction <= 1.0:
        raise ValueError("min_fraction must lie in [0, 1]")
    n = table.values.shape[0]
    if n == 0:
        raise DegenerateInputError("table has no rows")
    coverage = np.count_nonzero(table.values, axis=0) / n
    keep = [f for f, c in zip(table.feature_names, coverage) if c >= min_fraction]
    if not keep:
        raise DegenerateInputError(
            f"coverage threshold {min_fraction} pruned every feature of {table.group}"
        )
    if len(keep) == len(table.feature_names):
        return table
    return table.select(keep)


def drop_low_wordcount(dataset, counts, min_count):
    """Remove instances whose word count is below `min_count`."""
    lookup = dict(zip(counts.instance_ids, counts.values))
    missing = [i for i in dataset.instance_ids if i not in lookup]
    if missing:
        raise DimensionError(f"word counts missing for {len(missing)} ids, e.g. {missing[0]!r}")
    keep = [i for i in dataset.instance_ids if lookup[i] >= min_count]
    if not keep:
        raise DegenerateInputError(f"word-count threshold {min_count} dropped every instance")
    if len(keep) == dataset.n_instances:
        return dataset
    return dataset.subset(keep)
