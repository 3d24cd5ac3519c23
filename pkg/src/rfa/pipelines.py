"""
End-to-end model families.

=========  ====================================================================
family     model
=========  ====================================================================
controls   ridge on z-scored factors
language   per-group k-best + PCA reduction of language features, then ridge
added      reduced language features and z-scored factors in one ridge
rc         controls model, then a language model fit to its residuals
fa         ridge on language + factor-adapted language features
rfa        controls model, then language + adapted language fit to residuals
=========  ====================================================================

Two-stage families (rc, rfa) predict the sum of both stages. All learned
state lives in a :class:`FittedModel`, which serializes to JSON.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .adaptation import (
    FactorSet,
    adapt,
    adapted_names,
    interaction_fit_apply,
    provenance_of,
    select_factors_manual,
    select_factors_pca,
    select_factors_rfe,
)
from .errors import DimensionError
from .numerics import DEFAULT_PENALTY_GRID, RidgeFit, ridge_fit, ridge_fit_cv, ridge_predict
from .preprocessing import (
    FittedTransform,
    chain,
    minmax_fit_apply,
    reduce_group,
    select_columns,
    zscore_fit_apply,
)

FAMILIES = ("controls", "language", "added", "rc", "fa", "rfa")
TWO_STAGE = ("rc", "rfa")
ADAPTIVE = ("fa", "rfa")
FS_STRATEGIES = ("NoFS", "SeparatedFS", "CombinedFS", "EarlyFS")
MODEL_SCHEMA = "rfa.model/1"


def parse_factor_policy(policy):
    """``"all" | "none" | "manual:a,b,c" | "rfe:k" | "pca:k"`` -> (kind, arg)."""
    if policy in ("all", "none"):
        return policy, None
    kind, sep, arg = policy.partition(":")
    if not sep:
        raise ValueError(f"bad factor policy {policy!r}")
    if kind == "manual":
        names = tuple(a.strip() for a in arg.split(",") if a.strip())
        return kind, names
    if kind in ("rfe", "pca"):
        try:
            k = int(arg)
        except ValueError:
            raise ValueError(f"bad factor count in {policy!r}") from None
        if k < 1:
            raise ValueError(f"factor count must be >= 1 in {policy!r}")
        return kind, k
    raise ValueError(f"bad factor policy {policy!r}")


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to fit one model family.

    `k_best` maps a block name (``"ngrams"``, ``"adapted-topics"``, ...) to
    the number of features kept by the correlation screen. Missing entries
    fall back to the source language group's entry, then to the source
    group's width. `penalty=None` selects the ridge penalty by internal CV
    over `penalty_grid`.
    """

    family: str
    fs_strategy: str = "SeparatedFS"
    factor_policy: str = "all"
    interactions: bool = False
    controls_factors: str = "selected"
    k_best: dict = field(default_factory=dict)
    n_components: int = 100
    penalty: float | None = None
    penalty_grid: tuple = DEFAULT_PENALTY_GRID
    inner_folds: int = 5
    seed: int = 0
    pca_method: str = "randomized"
    standardize_language: bool = True
    name: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.fs_strategy not in FS_STRATEGIES:
            raise ValueError(f"unknown feature-selection strategy {self.fs_strategy!r}")
        if self.controls_factors not in ("selected", "all"):
            raise ValueError("controls_factors must be 'selected' or 'all'")
        parse_factor_policy(self.factor_policy)
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        object.__setattr__(self, "k_best", dict(self.k_best))
        object.__setattr__(self, "penalty_grid", tuple(float(p) for p in self.penalty_grid))

    @property
    def label(self):
        return self.name or self.family

    def fit(self, dataset):
        return fit_model(dataset, self)

    def to_dict(self):
        d = asdict(self)
        d["penalty_grid"] = list(self.penalty_grid)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["penalty_grid"] = tuple(d.get("penalty_grid", DEFAULT_PENALTY_GRID))
        return cls(**d)


def _block_seed(seed, key):
    return (int(seed) * 1_000_003 + zlib.crc32(key.encode())) % (2 ** 32)


def _ridge(X, y, cfg):
    if cfg.penalty is not None:
        return ridge_fit(X, y, cfg.penalty)
    return ridge_fit_cv(X, y, cfg.penalty_grid, cfg.inner_folds, seed=cfg.seed)


# ---------------------------------------------------------------------------
# Language design: feature selection / reduction around adaptation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    """One reduced slice of the stage input.

    role is ``"language"`` (a raw group), ``"adapted"`` (a group adapted to
    the factors), ``"combined"`` (every raw and adapted group stacked) or
    ``"early-adapted"`` (the reduced language block of `group`, adapted).
    """

    role: str
    group: str
    transform: FittedTransform

    def to_dict(self):
        return {"role": self.role, "group": self.group, "transform": self.transform.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["role"], d["group"], FittedTransform.from_dict(d["transform"]))


def _adapted_key(group):
    return f"adapted-{group}"


@dataclass(frozen=True)
class LanguageDesign:
    """Frozen recipe that turns raw language tables (+ factors) into a matrix."""

    strategy: str
    group_names: dict
    factor_names: tuple
    blocks: tuple

    @property
    def width(self):
        return sum(len(b.transform.output_names) for b in self.blocks)

    @property
    def output_names(self):
        return tuple(n for b in self.blocks for n in b.transform.output_names)

    def apply(self, tables, V, n_rows):
        """`tables` maps group name to FeatureTable; `V` holds the scaled adaptation factors."""
        raw = {g: tables[g].columns(names) for g, names in self.group_names.items()}
        outs = []
        reduced = {}
        for b in self.blocks:
            if b.role == "language":
                out = b.transform.apply(raw[b.group])
                reduced[b.group] = out
            elif b.role == "adapted":
                out = _apply_adapted(b.transform, raw[b.group], V)
            elif b.role == "early-adapted":
                out = b.transform.apply(adapt(reduced[b.group], V))
            elif b.role == "combined":
                parts = [raw[g] for g in self.group_names]
                if V is not None and V.shape[1]:
                    parts += [adapt(raw[g], V) for g in self.group_names]
                out = b.transform.apply(np.hstack(parts))
            else:
                raise ValueError(f"unknown block role {b.role!r}")
            outs.append(out)
        return np.hstack(outs) if outs else np.zeros((n_rows, 0))

    def to_dict(self):
        return {
            "strategy": self.strategy,
            "group_names": {g: list(v) for g, v in self.group_names.items()},
            "factor_names": list(self.factor_names),
            "blocks": [b.to_dict() for b in self.blocks],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["strategy"],
            {g: tuple(v) for g, v in d["group_names"].items()},
            tuple(d["factor_names"]),
            tuple(Block.from_dict(b) for b in d["blocks"]),
        )


def _apply_adapted(t, X, V):
    # a leading selection step only needs the selected adapted columns built
    first = t.steps[0]
    if first.kind in ("kbest", "select"):
        l = X.shape[1]
        idx = first.params["indices"]
        sub = X[:, idx % l] * V[:, idx // l]
        rest = t.steps[1:]
        return chain(*rest).apply(sub) if rest else sub
    return t.apply(adapt(X, V))


def _reduce_block(X, target, names, key, cfg, k, c, standardize=True):
    """k-best + PCA with `k` and `c` clipped to what the block supports."""
    n, p = X.shape
    k = min(k, p)
    c = min(c, k, max(n - 1, 1))
    return reduce_group(
        X, target, k, c, seed=_block_seed(cfg.seed, key), names=names,
        standardize=standardize, method=cfg.pca_method, prefix=f"{key}:",
    )


def _k_for(cfg, key, source, width):
    """k-best for a block: its own entry, else its source group's, else the source width."""
    return cfg.k_best.get(key) or cfg.k_best.get(source) or width


def _identity_or_z(X, names, standardize):
    if standardize:
        t, out = zscore_fit_apply(X, names=names)
    else:
        t, out = select_columns(names, names), X
    return t, out


def fit_design(tables, V, factor_names, target, cfg, strategy):
    """Fit the language design for one stage and return ``(design, matrix)``.

    `tables` is an ordered mapping of group name to (training) FeatureTable.
    With ``V`` of zero width (or ``None``) no adapted blocks are built and
    every strategy reduces to per-group reduction of the language groups.
    """
    groups = {g: t.feature_names for g, t in tables.items() if t.values.shape[1]}
    raw = {g: np.asarray(tables[g].values) for g in groups}
    adapting = V is not None and V.shape[1] > 0
    factor_names = tuple(factor_names) if adapting else ()
    n = len(target)
    nc = cfg.n_components
    blocks, outs = [], []

    def add(role, group, t, out):
        blocks.append(Block(role, group, t))
        outs.append(out)

    if strategy == "CombinedFS" and adapting and groups:
        parts, names = [], []
        k_total = 0
        for g in groups:
            parts.append(raw[g])
            names += groups[g]
            k_total += min(_k_for(cfg, g, g, len(groups[g])), len(groups[g]))
        for g in groups:
            parts.append(adapt(raw[g], V))
            names += adapted_names(groups[g], factor_names)
            k_total += _k_for(cfg, _adapted_key(g), g, len(groups[g]))
        t, out = _reduce_block(np.hstack(parts), target, names, "combined", cfg,
                               k_total, nc * 2 * len(groups))
        add("combined", "*", t, out)
    else:
        for g in groups:
            if strategy == "NoFS" and adapting:
                t, out = _identity_or_z(raw[g], groups[g], cfg.standardize_language)
            else:
                t, out = _reduce_block(raw[g], target, groups[g], g, cfg,
                                       _k_for(cfg, g, g, len(groups[g])), nc,
                                       cfg.standardize_language)
            add("language", g, t, out)
        if adapting:
            reduced = dict(zip(groups, list(outs)))
            for g in groups:
                key = _adapted_key(g)
                if strategy == "EarlyFS":
                    lang = _lang_block(blocks, g).transform
                    names = adapted_names(lang.output_names, factor_names)
                    t, out = zscore_fit_apply(adapt(reduced[g], V), names=names)
                    add("early-adapted", g, t, out)
                    continue
                A = adapt(raw[g], V)
                names = adapted_names(groups[g], factor_names)
                if strategy == "NoFS":
                    t, out = zscore_fit_apply(A, names=names)
                else:
                    t, out = _reduce_block(A, target, names, key, cfg,
                                           _k_for(cfg, key, g, len(groups[g])), nc)
                add("adapted", g, t, out)
    design = LanguageDesign(strategy, groups, factor_names, tuple(blocks))
    matrix = np.hstack(outs) if outs else np.zeros((n, 0))
    return design, matrix


def _lang_block(blocks, group):
    for b in blocks:
        if b.role == "language" and b.group == group:
            return b
    raise KeyError(group)


def apply_fs_strategy(strategy, language, factors, target, cfg, factor_names=None):
    """Build the stage input for one feature-selection placement.

    Parameters
    ----------
    strategy : {"NoFS", "SeparatedFS", "CombinedFS", "EarlyFS"}
    language : mapping of group name to FeatureTable (training rows)
    factors : array (n, d)
        Min-max scaled adaptation factors.
    target : array (n,)
        Outcome (or residual) the correlation screen ranks against.

    Returns
    -------
    (LanguageDesign, ndarray)
    """
    if strategy not in FS_STRATEGIES:
        raise ValueError(f"unknown feature-selection strategy {strategy!r}")
    factors = np.asarray(factors, dtype=np.float64)
    if factor_names is None:
        factor_names = tuple(f"f{j}" for j in range(factors.shape[1]))
    return fit_design(dict(language), factors, factor_names, np.asarray(target), cfg, strategy)


# ---------------------------------------------------------------------------
# Factor handling
# ---------------------------------------------------------------------------

def fit_factor_selection(table, y, cfg):
    """Resolve the factor policy on training rows.

    Returns a :class:`FactorSet` whose transform maps the raw factor table
    (all columns, by name) to the selected factors.
    """
    names = table.feature_names
    F = np.asarray(table.values)
    kind, arg = parse_factor_policy(cfg.factor_policy)
    pool_t = None
    pool, pool_names = F, names
    if cfg.interactions and F.shape[1] >= 2:
        mm, Fm = minmax_fit_apply(F, names=names)
        it, pool = interaction_fit_apply(Fm, names=names)
        pool_t = chain(mm, it)
        pool_names = it.output_names
    if kind == "all":
        fs = FactorSet(pool_names, provenance_of(pool_names), select_columns(pool_names, pool_names))
    elif kind == "none":
        fs = FactorSet((), (), select_columns(pool_names, ()))
    elif kind == "manual":
        fs = select_factors_manual(pool_names, arg)
    elif kind == "rfe":
        fs = select_factors_rfe(pool, y, arg, penalty=cfg.penalty, names=pool_names,
                                seed=cfg.seed, penalties=cfg.penalty_grid)
    else:
        fs = select_factors_pca(pool, arg, seed=cfg.seed, names=pool_names)
    if pool_t is not None:
        fs = FactorSet(fs.names, fs.provenance, chain(pool_t, fs.transform))
    return fs


# ---------------------------------------------------------------------------
# Fitted model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FittedModel:
    """Frozen state of one fitted family.

    `controls` maps the raw factor table to the stage-1 (or added-controls)
    design; `adaptation` maps it to min-max scaled adaptation factors;
    `design` builds the language part. `stage_fits` has two entries for
    rc/rfa and one otherwise.
    """

    family: str
    config: ModelConfig
    factor_set: FactorSet
    controls: FittedTransform | None
    adaptation: FittedTransform | None
    design: LanguageDesign | None
    stage_fits: tuple
    fs_strategy: str

    def __post_init__(self):
        want = 2 if self.family in TWO_STAGE else 1
        if len(self.stage_fits) != want:
            raise ValueError(f"{self.family} needs {want} stage fits, got {len(self.stage_fits)}")

    # inputs -------------------------------------------------------------
    def _controls_matrix(self, d):
        return self.controls.apply_table(d.factors)

    def _language_matrix(self, d):
        tables = {t.group: t for t in d.language}
        missing = [g for g in self.design.group_names if g not in tables]
        if missing:
            raise DimensionError(f"dataset lacks language groups {missing}")
        V = self.adaptation.apply_table(d.factors) if self.adaptation is not None else None
        return self.design.apply(tables, V, d.n_instances)

    def stage1_predict(self, d):
        if self.family in ("controls", "rc", "rfa"):
            return ridge_predict(self.stage_fits[0], self._controls_matrix(d))
        if self.family in ("language", "fa"):
            return ridge_predict(self.stage_fits[0], self._language_matrix(d))
        X = np.hstack([self._language_matrix(d), self._controls_matrix(d)])
        return ridge_predict(self.stage_fits[0], X)

    def stage2_predict(self, d):
        if self.family not in TWO_STAGE:
            return np.zeros(d.n_instances)
        return ridge_predict(self.stage_fits[1], self._language_matrix(d))

    def predict(self, d):
        """Predictions for every row of `d` (both stages summed for rc/rfa)."""
        p = self.stage1_predict(d)
        if self.family in TWO_STAGE:
            p = p + self.stage2_predict(d)
        return p

    # persistence ----------------------------------------------------------
    def to_dict(self):
        return {
            "schema": MODEL_SCHEMA,
            "family": self.family,
            "fs_strategy": self.fs_strategy,
            "config": self.config.to_dict(),
            "factor_selection": {
                **self.factor_set.to_dict(),
                "transform": self.factor_set.transform.to_dict(),
            },
            "controls": None if self.controls is None else self.controls.to_dict(),
            "adaptation": None if self.adaptation is None else self.adaptation.to_dict(),
            "design": None if self.design is None else self.design.to_dict(),
            "stage_fits": [f.to_dict() for f in self.stage_fits],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != MODEL_SCHEMA:
            raise ValueError(f"unsupported model schema {d.get('schema')!r}")
        fs = d["factor_selection"]
        opt = lambda v, f: None if v is None else f(v)  # noqa: E731
        return cls(
            family=d["family"],
            config=ModelConfig.from_dict(d["config"]),
            factor_set=FactorSet(tuple(fs["names"]), tuple(fs["provenance"]),
                                 FittedTransform.from_dict(fs["transform"])),
            controls=opt(d["controls"], FittedTransform.from_dict),
            adaptation=opt(d["adaptation"], FittedTransform.from_dict),
            design=opt(d["design"], LanguageDesign.from_dict),
            stage_fits=tuple(RidgeFit.from_dict(f) for f in d["stage_fits"]),
            fs_strategy=d["fs_strategy"],
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


_ZERO_FIT = RidgeFit(np.zeros(0), 0.0, 0.0)


def fit_model(d, cfg):
    """Fit `cfg.family` on every row of dataset `d`."""
    family = cfg.family
    y = d.y
    fs = fit_factor_selection(d.factors, y, cfg)
    raw_names = d.factors.feature_names

    controls = adaptation = design = None
    fits = []

    if family in ("controls", "added", "rc", "rfa"):
        if cfg.controls_factors == "all":
            base = select_columns(raw_names, raw_names)
        else:
            base = fs.transform
        C = base.apply_table(d.factors)
        z, Cz = zscore_fit_apply(C, names=base.output_names)
        controls = chain(base, z)
    if family in ADAPTIVE:
        sel = fs.transform.apply_table(d.factors)
        mm, V = minmax_fit_apply(sel, names=fs.transform.output_names)
        adaptation = chain(fs.transform, mm)
    else:
        V = None

    tables = {t.group: t for t in d.language}
    strategy = cfg.fs_strategy if family in ADAPTIVE else "SeparatedFS"

    if family == "controls":
        fits.append(_ridge(Cz, y, cfg))
    elif family in ("language", "fa"):
        design, X = fit_design(tables, V, fs.names, y, cfg, strategy)
        fits.append(_ridge(X, y, cfg))
    elif family == "added":
        design, X = fit_design(tables, None, (), y, cfg, strategy)
        fits.append(_ridge(np.hstack([X, Cz]), y, cfg))
    else:
        stage1 = _ridge(Cz, y, cfg)
        resid = y - ridge_predict(stage1, Cz)
        design, X = fit_design(tables, V, fs.names, resid, cfg, strategy)
        fits += [stage1, _ridge(X, resid, cfg) if X.shape[1] else _ZERO_FIT]

    return FittedModel(family, cfg, fs, controls, adaptation, design, tuple(fits), strategy)


def predict(model, d):
    return model.predict(d)


def _fit_family(family, d, cfg=None, **overrides):
    cfg = ModelConfig(family) if cfg is None else replace(cfg, family=family)
    if overrides:
        cfg = replace(cfg, **overrides)
    return fit_model(d, cfg)


def fit_controls_only(d, cfg=None, **overrides):
    return _fit_family("controls", d, cfg, **overrides)


def fit_language_only(d, cfg=None, **overrides):
    return _fit_family("language", d, cfg, **overrides)


def fit_added_controls(d, cfg=None, **overrides):
    return _fit_family("added", d, cfg, **overrides)


def fit_rc(d, cfg=None, **overrides):
    return _fit_family("rc", d, cfg, **overrides)


def fit_fa(d, cfg=None, **overrides):
    return _fit_family("fa", d, cfg, **overrides)


def fit_rfa(d, cfg=None, **overrides):
    return _fit_family("rfa", d, cfg, **overrides)
