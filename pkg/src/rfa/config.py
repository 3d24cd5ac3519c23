"""
Run configuration: a TOML file describing data, preprocessing and models.

A minimal file::

    seed = 0
    folds = 10
    families = ["controls", "rc", "rfa"]

    [data]
    factors = "factors.csv"
    outcome = "outcome.csv"
    [data.language]
    ngrams = "ngrams.csv"
    topics = {path = "topics.csv", format = "wide"}

    [preprocessing]
    preset = "health"

    [model]
    factor_policy = "pca:6"

A ``[synthetic]`` section can replace ``[data]`` to run on a generated
benchmark. Unknown keys anywhere are rejected. Relative paths resolve
against the config file's directory.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .data import (
    LANGUAGE_GROUPS,
    align,
    drop_low_wordcount,
    load_long_csv,
    load_outcome_csv,
    load_wide_csv,
    prune_by_coverage,
)
from .errors import ConfigError
from .numerics import DEFAULT_PENALTY_GRID
from .pipelines import FAMILIES, FS_STRATEGIES, ModelConfig, parse_factor_policy
from .synthetic import BENCH_DEFAULT, SyntheticSpec, generate_synthetic

#: Preprocessing defaults used for the two outcome domains of the county study.
PREPROCESSING_PRESETS = {
    "health": {
        "coverage": {"ngrams": 0.95},
        "wordcount_min": 20000,
        "k_best": {"ngrams": 10000, "topics": 2000},
        "n_components": 100,
    },
    "economy": {
        "coverage": {"ngrams": 0.10},
        "wordcount_min": 10000,
        "k_best": {"ngrams": 8000, "topics": 1500},
        "n_components": 100,
    },
}

SYNTHETIC_PRESETS = {"bench-default": BENCH_DEFAULT}

_GROUP_MAP = {
    "type": "object",
    "propertyNames": {"enum": list(LANGUAGE_GROUPS)},
}

_TABLE = {
    "oneOf": [
        {"type": "string"},
        {
            "type": "object",
            "properties": {"path": {"type": "string"}, "format": {"enum": ["long", "wide"]}},
            "required": ["path"],
            "additionalProperties": False,
        },
    ]
}

_POS_INT = {"type": "integer", "minimum": 1}
_COUNTS = {"type": "array", "items": _POS_INT, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "folds": {"type": "integer", "minimum": 2},
        "families": {"type": "array", "items": {"enum": list(FAMILIES)}, "minItems": 1},
        "pairs": {"enum": ["all", "none"]},
        "data": {
            "type": "object",
            "additionalProperties": False,
            "required": ["outcome"],
            "properties": {
                "language": {**_GROUP_MAP, "additionalProperties": _TABLE},
                "factors": _TABLE,
                "outcome": {"type": "string"},
                "wordcounts": {"type": "string"},
            },
        },
        "synthetic": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": list(SYNTHETIC_PRESETS)},
                "n_instances": {"type": "integer", "minimum": 2},
                "n_language_features": _POS_INT,
                "groups": {"type": "array", "items": {"enum": list(LANGUAGE_GROUPS)},
                           "minItems": 1, "uniqueItems": True},
                "n_factors": _POS_INT,
                "control_signal": {"type": "number", "minimum": 0},
                "language_signal": {"type": "number", "minimum": 0},
                "interaction_signal": {"type": "number", "minimum": 0},
                "noise_sd": {"type": "number", "minimum": 0},
                "sparsity": {"type": "number", "minimum": 0, "maximum": 1},
                "n_topics": _POS_INT,
                "n_demographic": _POS_INT,
                "factor_noise": {"type": "number", "minimum": 0},
                "word_count_mean": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "preprocessing": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": list(PREPROCESSING_PRESETS)},
                "coverage": {**_GROUP_MAP, "additionalProperties": {
                    "type": "number", "minimum": 0, "maximum": 1}},
                "wordcount_min": {"type": "number", "minimum": 0},
                "k_best": {
                    "type": "object",
                    "propertyNames": {"enum": list(LANGUAGE_GROUPS)
                                      + [f"adapted-{g}" for g in LANGUAGE_GROUPS]},
                    "additionalProperties": _POS_INT,
                },
                "n_components": _POS_INT,
                "standardize_language": {"type": "boolean"},
                "pca_method": {"enum": ["randomized", "exact"]},
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "factor_policy": {"type": "string"},
                "interactions": {"type": "boolean"},
                "fs_strategy": {"enum": list(FS_STRATEGIES)},
                "controls_factors": {"enum": ["selected", "all"]},
                "penalty": {"oneOf": [{"const": "cv"}, {"type": "number", "minimum": 0}]},
                "penalty_grid": {"type": "array", "minItems": 1,
                                 "items": {"type": "number", "minimum": 0}},
                "inner_folds": {"type": "integer", "minimum": 2},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "families": {"type": "array", "items": {"enum": list(FAMILIES)}, "minItems": 1},
                "ks": _COUNTS,
                "group": {"enum": list(LANGUAGE_GROUPS)},
                "factor_method": {"enum": ["pca", "rfe"]},
                "factor_counts": _COUNTS,
                "use_interactions": {"type": "boolean"},
                "strategies": {"type": "array", "items": {"enum": list(FS_STRATEGIES)},
                               "minItems": 1, "uniqueItems": True},
            },
        },
    },
}


def _error_path(err):
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        if extra:
            return ".".join(parts + [extra[0]]), "unknown key"
    if err.validator == "propertyNames":
        return ".".join(parts + [str(err.instance)]), "unknown key"
    return ".".join(parts) or "<root>", err.message


def validate(raw):
    """Check a parsed config mapping; raise ConfigError naming the first bad field."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        where, msg = _error_path(errors[0])
        raise ConfigError(f"{where}: {msg}")
    if "data" in raw and "synthetic" in raw:
        raise ConfigError("<root>: give either [data] or [synthetic], not both")
    if "data" not in raw and "synthetic" not in raw:
        raise ConfigError("<root>: one of [data] or [synthetic] is required")
    policy = raw.get("model", {}).get("factor_policy")
    if policy is not None:
        try:
            parse_factor_policy(policy)
        except ValueError as e:
            raise ConfigError(f"model.factor_policy: {e}") from None


@dataclass(frozen=True)
class TableSource:
    group: str
    path: Path
    format: str


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration.

    `raw` keeps the parsed mapping (with CLI overrides applied) and is what
    reports embed as their replayable snapshot.
    """

    raw: dict
    base_dir: Path = field(default=Path("."))

    # top level ------------------------------------------------------------
    @property
    def seed(self):
        return int(self.raw.get("seed", 0))

    @property
    def folds(self):
        return int(self.raw.get("folds", 10))

    @property
    def families(self):
        return tuple(self.raw.get("families", FAMILIES))

    @property
    def pairs(self):
        return self.raw.get("pairs", "all")

    @property
    def preprocessing(self):
        pp = dict(self.raw.get("preprocessing", {}))
        preset = pp.pop("preset", None)
        out = copy.deepcopy(PREPROCESSING_PRESETS[preset]) if preset else {}
        out.update(pp)
        return out

    @property
    def sweep(self):
        return dict(self.raw.get("sweep", {}))

    def with_overrides(self, seed=None, families=None):
        raw = copy.deepcopy(self.raw)
        if seed is not None:
            raw["seed"] = int(seed)
        if families is not None:
            raw["families"] = list(families)
        validate(raw)
        return replace(self, raw=raw)

    # models ---------------------------------------------------------------
    def model_config(self, family, name=None):
        m = self.raw.get("model", {})
        pp = self.preprocessing
        penalty = m.get("penalty", "cv")
        return ModelConfig(
            family=family,
            fs_strategy=m.get("fs_strategy", "SeparatedFS"),
            factor_policy=m.get("factor_policy", "all"),
            interactions=m.get("interactions", False),
            controls_factors=m.get("controls_factors", "selected"),
            k_best=pp.get("k_best", {}),
            n_components=pp.get("n_components", 100),
            penalty=None if penalty == "cv" else float(penalty),
            penalty_grid=tuple(m.get("penalty_grid", DEFAULT_PENALTY_GRID)),
            inner_folds=m.get("inner_folds", 5),
            seed=self.seed,
            pca_method=pp.get("pca_method", "randomized"),
            standardize_language=pp.get("standardize_language", True),
            name=name,
        )

    def model_configs(self):
        return [self.model_config(f) for f in self.families]

    # data -----------------------------------------------------------------
    def synthetic_spec(self):
        s = dict(self.raw.get("synthetic", {}))
        base = SYNTHETIC_PRESETS[s.pop("preset", "bench-default")]
        return replace(base, **s) if s else base

    def _path(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def table_sources(self):
        data = self.raw.get("data", {})
        out = []
        for group, entry in data.get("language", {}).items():
            out.append(self._source(group, entry, "long"))
        if "factors" in data:
            out.append(self._source("factors", data["factors"], "wide"))
        return out

    def _source(self, group, entry, default_format):
        if isinstance(entry, str):
            entry = {"path": entry}
        return TableSource(group, self._path(entry["path"]), entry.get("format", default_format))

    def outcome_path(self):
        return self._path(self.raw["data"]["outcome"])

    def wordcount_path(self):
        w = self.raw.get("data", {}).get("wordcounts")
        return None if w is None else self._path(w)

    def load_tables(self):
        return [
            (load_long_csv if s.format == "long" else load_wide_csv)(s.path, s.group)
            for s in self.table_sources()
        ]


def load_config(path):
    """Parse and validate a TOML run configuration."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config ({e.strerror})") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML ({e})") from None
    validate(raw)
    return RunConfig(raw, path.parent)


def from_mapping(raw, base_dir="."):
    """Validate an already-parsed mapping (handy in tests and scripts)."""
    raw = copy.deepcopy(raw)
    validate(raw)
    return RunConfig(raw, Path(base_dir))


def build_dataset(cfg, require_outcome=True):
    """Load (or generate), prune, align and filter the configured data.

    Coverage pruning runs on each language table before alignment, then the
    word-count threshold drops instances.
    """
    pp = cfg.preprocessing
    coverage = pp.get("coverage", {})
    wmin = pp.get("wordcount_min", 0)

    if "synthetic" in cfg.raw:
        d = generate_synthetic(cfg.synthetic_spec())
        if coverage:
            lang = [prune_by_coverage(t, coverage[t.group]) if t.group in coverage else t
                    for t in d.language]
            d = d.with_language(lang)
        if wmin:
            d = drop_low_wordcount(d, d.metadata["word_counts"], wmin)
        return d

    tables = [prune_by_coverage(t, coverage[t.group]) if t.group in coverage else t
              for t in cfg.load_tables()]
    outcome = None
    if require_outcome:
        outcome = load_outcome_csv(cfg.outcome_path())
    d = align(tables, outcome)
    wpath = cfg.wordcount_path()
    if wmin and wpath is not None:
        d = drop_low_wordcount(d, load_outcome_csv(wpath), wmin)
    return d
