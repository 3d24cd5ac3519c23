"""
Cross-validation harness, significance tests and the sweep experiments.

Any object with ``fit(dataset) -> fitted`` (where ``fitted.predict(dataset)``
returns a vector) can be evaluated; :class:`~rfa.pipelines.ModelConfig` is
the usual one.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, DimensionError
from .numerics import fold_assignments, paired_t_test, pearson_r, r_squared
from .pipelines import FS_STRATEGIES, ModelConfig

log = logging.getLogger(__name__)

REPORT_SCHEMA = "rfa.report/1"


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of instance ids to `n_folds` folds."""

    n_folds: int
    seed: int
    assignments: dict

    @classmethod
    def make(cls, instance_ids, n_folds=10, seed=0):
        ids = tuple(instance_ids)
        if n_folds < 2:
            raise ValueError("need at least 2 folds")
        if len(ids) < 2 * n_folds:
            raise DimensionError(f"{len(ids)} instances cannot fill {n_folds} folds of >= 2")
        folds = fold_assignments(len(ids), n_folds, seed)
        return cls(n_folds, seed, dict(zip(ids, (int(f) for f in folds))))

    def fold_rows(self, instance_ids):
        """For each fold, ``(train_rows, test_rows)`` as index arrays into `instance_ids`."""
        try:
            folds = np.array([self.assignments[i] for i in instance_ids])
        except KeyError as e:
            raise DimensionError(f"instance {e.args[0]!r} has no fold") from None
        return [(np.flatnonzero(folds != f), np.flatnonzero(folds == f))
                for f in range(self.n_folds)]


def _label(model):
    return getattr(model, "label", None) or getattr(model, "name", None) or type(model).__name__


def _snapshot(model):
    if hasattr(model, "to_dict"):
        return model.to_dict()
    return {"name": _label(model)}


@dataclass
class ExperimentReport:
    """Per-fold and pooled metrics, pooled predictions and paired tests."""

    instance_ids: tuple
    y: np.ndarray
    models: tuple
    predictions: dict
    fold_metrics: dict
    pooled: dict
    paired_tests: list
    config: dict
    seed: int
    curves: list = field(default_factory=list)
    created: str = ""

    def mean_fold_r2(self, model):
        return float(np.mean([m["r2"] for m in self.fold_metrics[model]]))

    def abs_errors(self, model):
        return np.abs(self.predictions[model] - self.y)

    def to_dict(self):
        return {
            "schema": REPORT_SCHEMA,
            "created": self.created,
            "seed": self.seed,
            "config": self.config,
            "models": list(self.models),
            "pooled": self.pooled,
            "fold_metrics": self.fold_metrics,
            "paired_tests": self.paired_tests,
            "curves": self.curves,
            "instance_ids": list(self.instance_ids),
            "y": [float(v) for v in self.y],
            "predictions": {m: [float(v) for v in p] for m, p in self.predictions.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def table(self):
        """Aligned text table: one row per model, then the paired tests."""
        rows = [("model", "pooled R2", "pooled r", "mean fold R2", "sd fold R2")]
        for m in self.models:
            r2s = [f["r2"] for f in self.fold_metrics[m]]
            rows.append((m, f"{self.pooled[m]['r2']:.4f}", f"{self.pooled[m]['pearson_r']:.4f}",
                         f"{np.mean(r2s):.4f}", f"{np.std(r2s):.4f}"))
        out = _align(rows)
        if self.paired_tests:
            rows = [("model a", "model b", "MAE a", "MAE b", "t", "p")]
            for t in self.paired_tests:
                rows.append((t["a"], t["b"], f"{t['mae_a']:.4f}", f"{t['mae_b']:.4f}",
                             _num(t["t"]), _num(t["p"])))
            out += "\n" + _align(rows)
        return out

    def write(self, out_dir):
        """Write ``report.json``, ``table.txt`` and (for sweeps) ``curves.csv``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        (out / "table.txt").write_text(self.table())
        if self.curves:
            write_curves(self.curves, out / "curves.csv")


def _num(v):
    return "nan" if v is None else f"{v:.4g}"


def _align(rows):
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in rows]
    return "\n".join(lines) + "\n"


def write_curves(curves, path):
    keys = list(curves[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for row in curves:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def _metrics(y, p):
    try:
        r = pearson_r(y, p)
    except DegenerateInputError:
        r = None
    return {"r2": r_squared(y, p), "pearson_r": r, "n": int(len(y))}


def paired_tests(y, predictions, pairs):
    """Paired t-tests on per-instance absolute errors for each ``(a, b)`` pair.

    Negative ``t`` means model ``a`` has the smaller errors.
    """
    out = []
    for a, b in pairs:
        ea = np.abs(predictions[a] - y)
        eb = np.abs(predictions[b] - y)
        try:
            t, p = paired_t_test(ea, eb)
        except DegenerateInputError:
            t = p = None
        out.append({"a": a, "b": b, "mae_a": float(ea.mean()), "mae_b": float(eb.mean()),
                    "t": t, "p": p})
    return out


def run_cv(d, models, plan, jobs=1, pairs="all", return_models=False):
    """Cross-validate each model over `plan`.

    Parameters
    ----------
    d : Dataset
    models : sequence of model specs (e.g. ModelConfig); labels must be unique
    plan : FoldPlan
    jobs : int
        Worker threads for the (model, fold) grid.
    pairs : "all", "none" or a list of (label_a, label_b)
        Which paired t-tests to run on pooled out-of-fold errors.
    return_models : bool
        Also return ``{(label, fold): fitted}``.
    """
    models = list(models)
    labels = [_label(m) for m in models]
    if len(set(labels)) != len(labels):
        raise ValueError(f"model labels must be unique: {labels}")
    ids = d.instance_ids
    y = d.y
    folds = plan.fold_rows(ids)
    for f, (_, te) in enumerate(folds):
        if len(te) < 2:
            raise DimensionError(f"fold {f} has {len(te)} instances; need >= 2")
    splits = [(d.take(tr), d.take(te)) for tr, te in folds]

    def cell(job):
        mi, f = job
        train, test = splits[f]
        fitted = models[mi].fit(train)
        return fitted, np.asarray(fitted.predict(test), dtype=np.float64)

    jobs_list = [(mi, f) for mi in range(len(models)) for f in range(len(folds))]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(cell, jobs_list))
    else:
        results = [cell(j) for j in jobs_list]

    predictions, fold_metrics, fitted = {}, {}, {}
    for (mi, f), (model, pred) in zip(jobs_list, results):
        lab = labels[mi]
        te = folds[f][1]
        predictions.setdefault(lab, np.full(len(ids), np.nan))[te] = pred
        fold_metrics.setdefault(lab, []).append({"fold": f, **_metrics(y[te], pred)})
        if return_models:
            fitted[(lab, f)] = model
    for lab in labels:
        if np.isnan(predictions[lab]).any():
            raise AssertionError(f"{lab}: some instances were never predicted")
    pooled = {lab: _metrics(y, predictions[lab]) for lab in labels}
    if pairs == "all":
        pairs = list(combinations(labels, 2))
    elif pairs == "none":
        pairs = []
    report = ExperimentReport(
        instance_ids=ids,
        y=y,
        models=tuple(labels),
        predictions=predictions,
        fold_metrics=fold_metrics,
        pooled=pooled,
        paired_tests=paired_tests(y, predictions, pairs),
        config={"n_folds": plan.n_folds, "fold_seed": plan.seed,
                "models": [_snapshot(m) for m in models]},
        seed=plan.seed,
        created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    return (report, fitted) if return_models else report


# ---------------------------------------------------------------------------
# Replicated runs over synthetic seeds
# ---------------------------------------------------------------------------

@dataclass
class ReplicateSummary:
    """Reports from several independently generated datasets."""

    reports: list

    @property
    def models(self):
        return self.reports[0].models

    def r2(self, model):
        """Pooled R2 of `model` in every replicate."""
        return np.array([r.pooled[model]["r2"] for r in self.reports])

    def mean_r2(self, model):
        return float(self.r2(model).mean())

    def paired(self, a, b):
        """Paired t-test on absolute errors stacked over all replicates."""
        ea = np.concatenate([r.abs_errors(a) for r in self.reports])
        eb = np.concatenate([r.abs_errors(b) for r in self.reports])
        return paired_t_test(ea, eb)


def run_replicates(spec, models, seeds, n_folds=10, jobs=1, pairs="none"):
    """Generate one synthetic dataset per seed and cross-validate `models` on each."""
    from .synthetic import generate_synthetic

    reports = []
    for s in seeds:
        d = generate_synthetic(spec.with_seed(s))
        plan = FoldPlan.make(d.instance_ids, n_folds, seed=s)
        reports.append(run_cv(d, models, plan, jobs=jobs, pairs=pairs))
        log.info("replicate seed=%s done", s)
    return ReplicateSummary(reports)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _curve_rows(report, points):
    rows = []
    for label, (point, family) in points.items():
        rows.append({
            "point": point,
            "family": family,
            "mean_r2": report.mean_fold_r2(label),
            "pooled_r2": report.pooled[label]["r2"],
        })
    return rows


def sweep_kbest(d, ks, families=("fa", "rfa"), base=None, plan=None, group="ngrams", jobs=1):
    """One CV run per k for the k-best screen of `group` (and its adapted copy)."""
    base = base or ModelConfig("rfa")
    plan = plan or FoldPlan.make(d.instance_ids, 10, base.seed)
    models, points = [], {}
    for k in ks:
        for fam in families:
            kb = dict(base.k_best)
            kb[group] = int(k)
            kb.pop(f"adapted-{group}", None)
            label = f"{fam}[k={k}]"
            models.append(replace(base, family=fam, k_best=kb, name=label))
            points[label] = (int(k), fam)
    report = run_cv(d, models, plan, jobs=jobs, pairs="none")
    report.curves = _curve_rows(report, points)
    return report


def sweep_factors(d, method="pca", counts=None, families=("rc", "fa", "rfa"),
                  use_interactions=False, base=None, plan=None, jobs=1):
    """One CV run per number of selected factors (RFE or PCA)."""
    if method not in ("rfe", "pca"):
        raise ValueError("method must be 'rfe' or 'pca'")
    base = base or ModelConfig("rfa")
    plan = plan or FoldPlan.make(d.instance_ids, 10, base.seed)
    dmax = d.factors.values.shape[1]
    if use_interactions:
        dmax += dmax * (dmax - 1) // 2
    counts = list(counts) if counts is not None else list(range(1, dmax + 1))
    models, points = [], {}
    for k in counts:
        for fam in families:
            label = f"{fam}[{method}={k}]"
            models.append(replace(base, family=fam, factor_policy=f"{method}:{k}",
                                  interactions=use_interactions, name=label))
            points[label] = (int(k), fam)
    report = run_cv(d, models, plan, jobs=jobs, pairs="none")
    report.curves = _curve_rows(report, points)
    return report


def compare_fs_strategies(d, families=("rfa",), base=None, plan=None, strategies=FS_STRATEGIES,
                          jobs=1):
    """One CV run per feature-selection placement."""
    base = base or ModelConfig("rfa")
    plan = plan or FoldPlan.make(d.instance_ids, 10, base.seed)
    models, points = [], {}
    for s in strategies:
        for fam in families:
            label = f"{fam}[{s}]"
            models.append(replace(base, family=fam, fs_strategy=s, name=label))
            points[label] = (s, fam)
    report = run_cv(d, models, plan, jobs=jobs, pairs="none")
    report.curves = _curve_rows(report, points)
    return report
