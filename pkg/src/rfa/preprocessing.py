"""
Fit-on-train / apply-anywhere feature transforms.

Each fit function learns its parameters from training rows only and returns
a frozen :class:`FittedTransform`. Transforms compose into chains and
serialize to a versioned JSON document.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .numerics import as_matrix, as_vector, pca_fit

SCHEMA = "rfa.transform/1"
KINDS = ("minmax", "zscore", "kbest", "select", "pca", "interactions", "chain")


def _default_names(p, prefix="x"):
    return tuple(f"{prefix}{j}" for j in range(p))


@dataclass(frozen=True)
class FittedTransform:
    """Learned preprocessing state.

    `params` holds kind-specific numpy arrays (or, for ``"chain"``, a list of
    steps under ``"steps"``). Applying to a matrix with ``len(input_names)``
    columns yields ``len(output_names)`` columns.
    """

    kind: str
    params: dict
    input_names: tuple
    output_names: tuple

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        object.__setattr__(self, "input_names", tuple(self.input_names))
        object.__setattr__(self, "output_names", tuple(self.output_names))

    @property
    def steps(self):
        return self.params["steps"] if self.kind == "chain" else [self]

    def apply(self, X):
        X = as_matrix(X)
        if X.shape[1] != len(self.input_names):
            raise DimensionError(
                f"{self.kind} transform expects {len(self.input_names)} columns, got {X.shape[1]}"
            )
        return _APPLY[self.kind](self.params, X)

    def apply_table(self, table):
        """Select this transform's input columns from `table` by name, then apply."""
        return self.apply(table.columns(self.input_names))

    def to_dict(self):
        if self.kind == "chain":
            params = {"steps": [s.to_dict() for s in self.params["steps"]]}
        else:
            params = {k: np.asarray(v).tolist() for k, v in self.params.items()}
        return {
            "schema": SCHEMA,
            "kind": self.kind,
            "input_names": list(self.input_names),
            "output_names": list(self.output_names),
            "params": params,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported transform schema {d.get('schema')!r}")
        kind = d["kind"]
        if kind == "chain":
            params = {"steps": [cls.from_dict(s) for s in d["params"]["steps"]]}
        else:
            params = {}
            for k, v in d["params"].items():
                dtype = np.int64 if k in ("indices", "pairs") else np.float64
                params[k] = np.asarray(v, dtype=dtype)
        return cls(kind, params, d["input_names"], d["output_names"])


def _apply_minmax(p, X):
    span = p["max"] - p["min"]
    const = span == 0
    out = (X - p["min"]) / np.where(const, 1.0, span)
    out[:, const] = 0.5
    return out


def _apply_zscore(p, X):
    const = p["sd"] == 0
    out = (X - p["mean"]) / np.where(const, 1.0, p["sd"])
    out[:, const] = 0.0
    return out


def _apply_select(p, X):
    return X[:, p["indices"]]


def _apply_pca(p, X):
    return (X - p["mean"]) @ p["basis"]


def _apply_interactions(p, X):
    pairs = p["pairs"].reshape(-1, 2)
    prod = X[:, pairs[:, 0]] * X[:, pairs[:, 1]]
    return np.hstack([X, _apply_minmax(p, prod)])


def _apply_chain(p, X):
    # shapes were checked when the chain was built
    for step in p["steps"]:
        X = _APPLY[step.kind](step.params, X)
    return X


_APPLY = {
    "minmax": _apply_minmax,
    "zscore": _apply_zscore,
    "kbest": _apply_select,
    "select": _apply_select,
    "pca": _apply_pca,
    "interactions": _apply_interactions,
    "chain": _apply_chain,
}


def _names(names, p):
    names = _default_names(p) if names is None else tuple(names)
    if len(names) != p:
        raise DimensionError(f"{len(names)} names for {p} columns")
    return names


def minmax_fit_apply(train, *apply_to, names=None):
    """Scale columns to [0, 1] using training min/max.

    Constant training columns map to 0.5. Held-out rows reuse the training
    range and can fall outside [0, 1].

    Returns ``(transform, train_scaled, *others_scaled)``.
    """
    train = as_matrix(train)
    names = _names(names, train.shape[1])
    t = FittedTransform("minmax", {"min": train.min(axis=0), "max": train.max(axis=0)}, names, names)
    return (t, t.apply(train), *(t.apply(a) for a in apply_to))


def zscore_fit_apply(train, *apply_to, names=None):
    """Standardize columns with training mean and (population) sd; constant columns map to 0."""
    train = as_matrix(train)
    names = _names(names, train.shape[1])
    mean = train.mean(axis=0)
    sd = train.std(axis=0)
    # treat round-off sized spread as constant
    sd = np.where(sd <= 1e-12 * np.maximum(np.abs(mean), 1.0), 0.0, sd)
    t = FittedTransform("zscore", {"mean": mean, "sd": sd}, names, names)
    return (t, t.apply(train), *(t.apply(a) for a in apply_to))


def correlation_scores(X, y):
    """|Pearson r| of each column with `y`; constant columns score 0."""
    X = as_matrix(X)
    y = as_vector(y)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    nx = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    ny = np.sqrt(yc @ yc)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (Xc.T @ yc) / (nx * ny)
    r[(nx == 0) | ~np.isfinite(r)] = 0.0
    return np.abs(r)


def kbest_fit(train, y, k, names=None):
    """Select the `k` columns most correlated (in absolute value) with `y`.

    Ties are broken by lexicographic feature name. Selected columns keep
    their original relative order.
    """
    train = as_matrix(train)
    y = as_vector(y)
    if train.shape[0] != y.shape[0]:
        raise DimensionError("train and y row counts differ")
    p = train.shape[1]
    if not 1 <= k <= p:
        raise ValueError(f"k={k} out of range for {p} features")
    names = _names(names, p)
    scores = correlation_scores(train, y)
    # rounding makes near-equal scores tie so the name order decides them
    key = np.round(scores, 12)
    ranked = sorted(range(p), key=lambda j: (-key[j], names[j]))
    idx = np.sort(np.asarray(ranked[:k], dtype=np.int64))
    return FittedTransform(
        "kbest", {"indices": idx, "scores": scores[idx]}, names, tuple(names[j] for j in idx)
    )


def select_columns(names, keep):
    """Fixed column subset by name."""
    names = tuple(names)
    pos = {n: i for i, n in enumerate(names)}
    idx = np.asarray([pos[k] for k in keep], dtype=np.int64)
    return FittedTransform("select", {"indices": idx}, names, tuple(keep))


def pca_transform_fit(train, k, method="randomized", seed=0, names=None, prefix=""):
    """Project onto the top-`k` principal components of the training rows."""
    train = as_matrix(train)
    names = _names(names, train.shape[1])
    fit = pca_fit(train, k, method=method, seed=seed)
    params = {
        "mean": fit.mean,
        "basis": fit.basis,
        "explained_variance": fit.explained_variance,
    }
    return FittedTransform("pca", params, names, tuple(f"{prefix}pc{i + 1}" for i in range(k)))


def chain(*steps):
    """Compose transforms left to right."""
    flat = []
    for s in steps:
        flat.extend(s.steps)
    for a, b in zip(flat, flat[1:]):
        if a.output_names != b.input_names:
            raise DimensionError(f"{a.kind} outputs do not feed {b.kind} inputs")
    return FittedTransform("chain", {"steps": flat}, flat[0].input_names, flat[-1].output_names)


def reduce_group(train, y, k_best, n_components, seed=0, names=None, standardize=True,
                 method="randomized", prefix=""):
    """k-best correlation screen, then PCA down to `n_components`.

    With `standardize` the selected columns are z-scored before PCA (the
    k-best ranking is scale invariant, so screening first is equivalent to
    standardizing first and far cheaper on wide groups).

    Returns ``(chain_transform, reduced_train)``.
    """
    train = as_matrix(train)
    p = train.shape[1]
    if not 1 <= n_components <= k_best <= p:
        raise ValueError(
            f"need 1 <= n_components ({n_components}) <= k_best ({k_best}) <= columns ({p})"
        )
    names = _names(names, p)
    steps = [kbest_fit(train, y, k_best, names)]
    X = steps[0].apply(train)
    if standardize:
        z, X = zscore_fit_apply(X, names=steps[0].output_names)
        steps.append(z)
    pca = pca_transform_fit(X, n_components, method, seed, steps[-1].output_names, prefix)
    steps.append(pca)
    return chain(*steps), pca.apply(X)
