"""
Synthetic community-prediction benchmark with planted structure.

Factors are correlated Gaussians driven by a few latent "demographic"
dimensions, mapped to positive census-like ranges. Language groups are
relative frequencies of Poisson counts whose rates load on latent topics.
The outcome mixes three planted terms::

    y = control_signal     * (standardized factors @ beta)
      + language_signal    * (topics @ gamma)
      + interaction_signal * sum_j z_j * (topics @ delta_j)
      + N(0, noise_sd^2)

where ``z_j`` is the j-th standardized factor. Each term is scaled to unit
sample variance before weighting, so the signal weights are comparable.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .data import Dataset, FeatureTable, OutcomeVector

#: Names used when the benchmark has the usual eleven factors.
CENSUS_FACTORS = (
    "median_income", "unemployment_rate", "pct_bachelors", "pct_high_school",
    "median_age", "pct_female", "pct_black", "pct_hispanic", "pct_foreign_born",
    "pct_married", "population_density",
)


@dataclass(frozen=True)
class SyntheticSpec:
    n_instances: int = 800
    n_language_features: int = 500
    groups: tuple = ("ngrams", "topics")
    n_factors: int = 11
    control_signal: float = 1.2
    language_signal: float = 0.6
    interaction_signal: float = 0.8
    noise_sd: float = 0.8
    sparsity: float = 0.2
    n_topics: int = 12
    n_demographic: int = 4
    factor_noise: float = 0.15
    word_count_mean: float = 30000.0
    seed: int = 7

    def __post_init__(self):
        for name in ("control_signal", "language_signal", "interaction_signal", "noise_sd"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ValueError("sparsity must lie in [0, 1]")
        if self.n_instances < 2 or self.n_language_features < 1:
            raise ValueError("need at least 2 instances and 1 language feature")
        object.__setattr__(self, "groups", tuple(self.groups))

    def with_seed(self, seed):
        return replace(self, seed=seed)

    def to_dict(self):
        d = asdict(self)
        d["groups"] = list(self.groups)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "groups" in d:
            d["groups"] = tuple(d["groups"])
        return cls(**d)


#: The default benchmark: 800 communities, 2 groups x 500 features, 11 factors.
BENCH_DEFAULT = SyntheticSpec()


def _unit(v):
    v = v - v.mean()
    sd = v.std()
    return v / sd if sd > 0 else v


def _standardize(X):
    sd = X.std(axis=0)
    return (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def generate_synthetic(spec=BENCH_DEFAULT):
    """Draw one dataset from `spec`.

    The returned dataset's ``metadata`` holds the planted coefficients
    (``beta``, ``gamma``, ``delta``), the latent topic scores and the
    per-instance word counts, for oracle checks.
    """
    rng = np.random.default_rng(spec.seed)
    n, d, m = spec.n_instances, spec.n_factors, spec.n_topics
    ids = tuple(f"{i:05d}" for i in range(1, n + 1))

    # factors: few latent demographic dimensions + idiosyncratic noise
    demo = rng.standard_normal((n, spec.n_demographic))
    mix = rng.standard_normal((spec.n_demographic, d))
    F = demo @ mix + spec.factor_noise * rng.standard_normal((n, d))
    F = _standardize(F)
    loc = rng.uniform(10.0, 60.0, d)
    scale = rng.uniform(2.0, 10.0, d)
    factors_raw = loc + scale * F
    fnames = CENSUS_FACTORS if d == len(CENSUS_FACTORS) else tuple(f"factor{j}" for j in range(d))

    # latent topics, partly shaped by demographics
    shape = rng.standard_normal((spec.n_demographic, m)) / np.sqrt(spec.n_demographic)
    topics = _standardize(0.5 * demo @ shape + rng.standard_normal((n, m)))

    word_counts = np.round(spec.word_count_mean * rng.lognormal(0.0, 0.5, n))
    word_counts = np.maximum(word_counts, 100.0)

    language = []
    for g_idx, group in enumerate(spec.groups):
        l = spec.n_language_features
        # topic-like groups: dense loadings, frequent words; n-gram-like: sparse, rare
        dense = group == "topics"
        load = rng.standard_normal((m, l)) * (0.5 if dense else 0.8)
        if not dense:
            load *= rng.random((m, l)) < 0.25
        base = rng.lognormal(np.log(2e-3 if dense else 4e-4), 0.7, l)
        rate = base * np.exp(topics @ load / np.sqrt(1 + (load ** 2).sum(0)))
        counts = rng.poisson(rate * word_counts[:, None])
        # feature-specific occurrence: some features are missing in many rows
        present = rng.random(l) * spec.sparsity
        mask = rng.random((n, l)) >= present
        freqs = counts * mask / word_counts[:, None]
        names = tuple(f"{group[:1]}{j:04d}" for j in range(l))
        language.append(FeatureTable(group, ids, names, freqs))

    beta = rng.standard_normal(d)
    gamma = rng.standard_normal(m)
    delta = rng.standard_normal((d, m))
    control = _unit(F @ beta)
    lang = _unit(topics @ gamma)
    inter = _unit(np.einsum("ij,ij->i", F, topics @ delta.T))
    y = (spec.control_signal * control + spec.language_signal * lang
         + spec.interaction_signal * inter + spec.noise_sd * rng.standard_normal(n))

    meta = {
        "spec": spec.to_dict(),
        "beta": beta,
        "gamma": gamma,
        "delta": delta,
        "topics": topics,
        "components": {"control": control, "language": lang, "interaction": inter},
        "word_counts": OutcomeVector("word_count", ids, word_counts),
    }
    factors = FeatureTable("factors", ids, fnames, factors_raw)
    return Dataset(language, factors, OutcomeVector("outcome", ids, y), (), meta)
