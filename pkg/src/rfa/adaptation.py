"""
Factor adaptation: composing factors with language features, building
pairwise interaction factors, and selecting a factor subset (RFE or PCA).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DimensionError
from .numerics import DEFAULT_PENALTY_GRID, as_matrix, as_vector, ridge_fit, ridge_fit_cv
from .preprocessing import (
    FittedTransform,
    chain,
    minmax_fit_apply,
    pca_transform_fit,
    select_columns,
    zscore_fit_apply,
)

#: Hand-picked factors (age, race, education).
MANUAL_PRESET = ("median_age", "pct_black", "pct_bachelors")


def adapt(language, factors):
    """Row-scale the language matrix by each factor and stack the copies.

    Block ``j`` (columns ``j*l`` to ``j*l + l - 1``) is the language matrix
    with row ``i`` multiplied by ``factors[i, j]``.
    """
    X = as_matrix(language, "language")
    V = as_matrix(factors, "factors")
    if X.shape[0] != V.shape[0]:
        raise DimensionError(f"language has {X.shape[0]} rows, factors {V.shape[0]}")
    n, l = X.shape
    d = V.shape[1]
    out = np.empty((n, d * l))
    for j in range(d):
        np.multiply(X, V[:, j:j + 1], out=out[:, j * l:(j + 1) * l])
    return out


def adapted_names(language_names, factor_names):
    return tuple(f"{f}*{x}" for f in factor_names for x in language_names)


def interaction_fit_apply(train, *apply_to, names=None):
    """Append min-max renormalized products of every factor pair.

    `train` is expected to be min-max scaled already. Output columns are the
    original ``d`` followed by ``d(d-1)/2`` products in (i, j) order, i < j.

    Returns ``(transform, train_out, *others_out)``.
    """
    train = as_matrix(train)
    d = train.shape[1]
    if d < 2:
        raise ValueError("interaction factors need at least 2 factors")
    names = tuple(names) if names is not None else tuple(f"f{j}" for j in range(d))
    pairs = np.array(list(combinations(range(d), 2)), dtype=np.int64)
    prod = train[:, pairs[:, 0]] * train[:, pairs[:, 1]]
    out_names = names + tuple(f"{names[i]}:{names[j]}" for i, j in pairs)
    params = {"pairs": pairs, "min": prod.min(axis=0), "max": prod.max(axis=0)}
    t = FittedTransform("interactions", params, names, out_names)
    return (t, t.apply(train), *(t.apply(a) for a in apply_to))


def interaction_factors(factors):
    """Original factors followed by their renormalized pairwise products."""
    return interaction_fit_apply(factors)[1]


@dataclass(frozen=True)
class FactorSet:
    """Selected factors plus how each column came to be.

    `transform` maps the full factor pool to the selected columns;
    `provenance` has one label per output column (``"original"``,
    ``"interaction(i,j)"`` or ``"pca-component(k)"``).
    """

    names: tuple
    provenance: tuple
    transform: FittedTransform

    def __post_init__(self):
        if len(self.names) != len(self.provenance):
            raise DimensionError("provenance must cover every factor column")

    def apply(self, factors):
        return self.transform.apply(factors)

    def to_dict(self):
        return {"names": list(self.names), "provenance": list(self.provenance)}


def provenance_of(names):
    """Labels for columns named by :func:`interaction_fit_apply`."""
    return tuple(f"interaction({n.replace(':', ',')})" if ":" in n else "original" for n in names)


def select_factors_manual(names, keep):
    names = tuple(names)
    missing = [k for k in keep if k not in names]
    if missing:
        raise DimensionError(f"manual factors not found: {missing}")
    keep = tuple(keep)
    return FactorSet(keep, provenance_of(keep), select_columns(names, keep))


def select_factors_rfe(factors, y, k, penalty=None, names=None, seed=0,
                       penalties=DEFAULT_PENALTY_GRID):
    """Recursive feature elimination with ridge.

    Each round z-scores the surviving factors, fits ridge against `y`
    (fixed `penalty`, or internal CV over `penalties` when ``None``) and
    drops the factor with the smallest ``|weight|``. Stops at `k` survivors,
    which are returned untransformed.
    """
    F = as_matrix(factors, "factors")
    y = as_vector(y)
    d = F.shape[1]
    if not 1 <= k <= d:
        raise ValueError(f"k={k} out of range for {d} factors")
    names = tuple(names) if names is not None else tuple(f"f{j}" for j in range(d))
    alive = list(range(d))
    while len(alive) > k:
        _, Z = zscore_fit_apply(F[:, alive])
        if penalty is None:
            fit = ridge_fit_cv(Z, y, penalties, seed=seed)
        else:
            fit = ridge_fit(Z, y, penalty)
        # first minimum in column order is dropped
        del alive[int(np.argmin(np.abs(fit.weights)))]
    keep = tuple(names[j] for j in alive)
    return FactorSet(keep, provenance_of(keep), select_columns(names, keep))


def select_factors_pca(factors, k, seed=0, names=None, method="exact"):
    """`k` principal-component scores of the z-scored factors, each min-max scaled."""
    F = as_matrix(factors, "factors")
    d = F.shape[1]
    if not 1 <= k <= d:
        raise ValueError(f"k={k} out of range for {d} factors")
    names = tuple(names) if names is not None else tuple(f"f{j}" for j in range(d))
    z, Z = zscore_fit_apply(F, names=names)
    pca = pca_transform_fit(Z, k, method=method, seed=seed, names=names, prefix="factor-")
    mm, _ = minmax_fit_apply(pca.apply(Z), names=pca.output_names)
    t = chain(z, pca, mm)
    prov = tuple(f"pca-component({i + 1})" for i in range(k))
    return FactorSet(t.output_names, prov, t)
