"""
Numerical kernel: closed-form ridge regression, PCA (exact and randomized)
and the evaluation metrics used by the experiment harness.

Everything here is a pure function of its inputs (plus an explicit seed
where randomness is involved).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy import stats

from .errors import DegenerateInputError, DimensionError, IllConditionedError

#: Penalty grid searched when no fixed penalty is given: 1e-3 ... 1e5.
DEFAULT_PENALTY_GRID = tuple(float(x) for x in np.logspace(-3, 5, 9))

RPCA_OVERSAMPLE = 10
RPCA_POWER_ITERS = 4


def as_matrix(X, name="X"):
    """Return `X` as a 2-D float64 array, rejecting NaN/Inf."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(-1, 1) if A.size else A.reshape(0, 0)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DimensionError(f"{name} contains NaN or Inf")
    return A


def as_vector(y, name="y"):
    v = np.asarray(y, dtype=np.float64)
    if v.ndim != 1:
        v = v.ravel()
    if not np.all(np.isfinite(v)):
        raise DimensionError(f"{name} contains NaN or Inf")
    return v


def fold_assignments(n, n_folds, seed):
    """Seeded shuffle followed by round-robin assignment to folds.

    Returns an int array of length `n` with values in ``range(n_folds)``;
    fold sizes differ by at most one.
    """
    if n_folds < 1:
        raise ValueError("n_folds must be >= 1")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=np.int64)
    folds[perm] = np.arange(n) % n_folds
    return folds


# ---------------------------------------------------------------------------
# Ridge regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RidgeFit:
    """Weights and unpenalized bias of one ridge fit."""

    weights: np.ndarray
    bias: float
    penalty: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "penalty", float(self.penalty))
        if self.penalty < 0:
            raise ValueError("penalty must be non-negative")

    def to_dict(self):
        return {
            "weights": [float(v) for v in self.weights],
            "bias": self.bias,
            "penalty": self.penalty,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["weights"], dtype=np.float64), d["bias"], d["penalty"])


def _check_xy(X, y):
    X = as_matrix(X)
    y = as_vector(y)
    if X.shape[0] != y.shape[0]:
        raise DimensionError(f"X has {X.shape[0]} rows but y has {y.shape[0]} values")
    if X.shape[0] < 2:
        raise DimensionError("ridge needs at least 2 rows")
    return X, y


def _solve_spd(A, b, penalty):
    """Solve A x = b for symmetric PSD `A` (already including the penalty)."""
    try:
        c = la.cho_factor(A, lower=True, check_finite=False)
    except la.LinAlgError:
        if penalty == 0:
            raise IllConditionedError(
                "ill-conditioned: singular normal equations with penalty=0"
            ) from None
        raise
    return la.cho_solve(c, b, check_finite=False)


def _rank_deficient(Xc):
    s = np.linalg.svd(Xc, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return True
    tol = s[0] * max(Xc.shape) * np.finfo(np.float64).eps
    return s[-1] <= tol or min(Xc.shape) < Xc.shape[1]


def ridge_fit(X, y, penalty):
    """Ridge regression with an unpenalized intercept.

    Minimizes ``||y - X w - b||^2 + penalty * ||w||^2``. Columns and outcome
    are centered first, so the bias is recovered as ``mean(y) - mean(X) @ w``.

    Parameters
    ----------
    X : array-like of shape (n, p)
    y : array-like of shape (n,)
    penalty : float
        Non-negative L2 penalty. With ``penalty == 0`` a rank-deficient
        design raises :class:`IllConditionedError` instead of falling back
        to a pseudo-inverse.

    Returns
    -------
    RidgeFit
    """
    X, y = _check_xy(X, y)
    penalty = float(penalty)
    if penalty < 0:
        raise ValueError("penalty must be non-negative")
    n, p = X.shape
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    if p == 0:
        return RidgeFit(np.zeros(0), y_mean, penalty)
    Xc = X - x_mean
    yc = y - y_mean
    if not yc.any():
        return RidgeFit(np.zeros(p), y_mean, penalty)
    if penalty == 0 and _rank_deficient(Xc):
        raise IllConditionedError(
            f"ill-conditioned: design of shape {X.shape} is rank deficient and penalty=0"
        )
    if p <= n:
        A = Xc.T @ Xc
        A[np.diag_indices_from(A)] += penalty
        w = _solve_spd(A, Xc.T @ yc, penalty)
    else:
        # dual form: w = Xc^T (Xc Xc^T + penalty I)^-1 yc
        K = Xc @ Xc.T
        K[np.diag_indices_from(K)] += penalty
        w = Xc.T @ _solve_spd(K, yc, penalty)
    return RidgeFit(w, y_mean - x_mean @ w, penalty)


def ridge_predict(fit, X):
    """``X @ fit.weights + fit.bias``."""
    X = as_matrix(X)
    if X.shape[1] != fit.weights.shape[0]:
        raise DimensionError(
            f"X has {X.shape[1]} columns but the fit has {fit.weights.shape[0]} weights"
        )
    return X @ fit.weights + fit.bias


class _CenteredGram:
    """Centered (cross-)Gram matrices of arbitrary row subsets from one product.

    Used by the dual ridge path when there are more columns than rows.
    """

    def __init__(self, X):
        self.K = X @ X.T

    def train_val(self, tr, va):
        Ktt = self.K[np.ix_(tr, tr)]
        Kvt = self.K[np.ix_(va, tr)]
        r_t = Ktt.mean(axis=1)
        c = r_t.mean()
        r_v = Kvt.mean(axis=1)
        Kc = Ktt - r_t[:, None] - r_t[None, :] + c
        Kvc = Kvt - r_v[:, None] - r_t[None, :] + c
        return Kc, Kvc


def _path_errors(X, y, folds, penalties, gram):
    """Summed squared validation error for each penalty."""
    errs = np.zeros(len(penalties))
    pen = np.asarray(penalties)
    for f in np.unique(folds):
        va = np.flatnonzero(folds == f)
        tr = np.flatnonzero(folds != f)
        y_mean = y[tr].mean()
        yc = y[tr] - y_mean
        if gram is not None:
            Kc, Kvc = gram.train_val(tr, va)
            s, U = np.linalg.eigh(Kc)
            s = np.clip(s, 0, None)
            Uty = U.T @ yc
            # predictions for every penalty: Kvc U diag(1/(s+pen)) U^T yc
            KvU = Kvc @ U
            coef = Uty[:, None] / (s[:, None] + pen[None, :])
            pred = KvU @ coef + y_mean
        else:
            x_mean = X[tr].mean(axis=0)
            Xc = X[tr] - x_mean
            s, V = np.linalg.eigh(Xc.T @ Xc)
            s = np.clip(s, 0, None)
            Vtb = V.T @ (Xc.T @ yc)
            XvV = (X[va] - x_mean) @ V
            coef = Vtb[:, None] / (s[:, None] + pen[None, :])
            pred = XvV @ coef + y_mean
        errs += ((pred - y[va][:, None]) ** 2).sum(axis=0)
    return errs


def select_penalty(X, y, penalties=DEFAULT_PENALTY_GRID, n_folds=5, seed=0):
    """Pick the penalty with the lowest k-fold validation error.

    Ties go to the larger penalty. Returns the chosen penalty and the
    per-penalty mean squared error.
    """
    X, y = _check_xy(X, y)
    penalties = tuple(float(p) for p in penalties)
    if not penalties or min(penalties) <= 0:
        raise ValueError("penalty grid must be non-empty and strictly positive")
    n, p = X.shape
    if p == 0 or len(penalties) == 1:
        return penalties[-1], np.zeros(len(penalties))
    n_folds = min(n_folds, n)
    if n_folds < 2:
        return penalties[-1], np.zeros(len(penalties))
    folds = fold_assignments(n, n_folds, seed)
    gram = _CenteredGram(X) if p > n else None
    errs = _path_errors(X, y, folds, penalties, gram) / n
    order = np.argsort(penalties)[::-1]
    # largest penalty among those within rounding of the minimum
    best = errs.min()
    tol = 1e-12 * max(best, 1e-300)
    for i in order:
        if errs[i] <= best + tol:
            return penalties[i], errs
    raise AssertionError("unreachable")


def ridge_fit_cv(X, y, penalties=DEFAULT_PENALTY_GRID, n_folds=5, seed=0):
    """Ridge fit with the penalty chosen by internal k-fold CV on (X, y)."""
    penalty, _ = select_penalty(X, y, penalties, n_folds, seed)
    return ridge_fit(X, y, penalty)


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PCAFit:
    """Centering vector, orthonormal basis (p x k) and component variances."""

    mean: np.ndarray
    basis: np.ndarray
    explained_variance: np.ndarray
    total_variance: float

    @property
    def explained_variance_ratio(self):
        return self.explained_variance / self.total_variance

    def transform(self, X):
        return (as_matrix(X) - self.mean) @ self.basis


def _fix_signs(V):
    # largest-magnitude loading of each component made positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _randomized_svd(A, k, oversample, power_iters, seed):
    """Range finder with power iterations, then an exact SVD of the sketch."""
    n, p = A.shape
    rank = min(k + oversample, n, p)
    rng = np.random.default_rng(seed)
    Q = A @ rng.standard_normal((p, rank))
    Q, _ = la.qr(Q, mode="economic", check_finite=False)
    for _ in range(power_iters):
        Q, _ = la.qr(A.T @ Q, mode="economic", check_finite=False)
        Q, _ = la.qr(A @ Q, mode="economic", check_finite=False)
    B = Q.T @ A
    _, s, Vt = la.svd(B, full_matrices=False, check_finite=False)
    return s[:k], Vt[:k].T


def pca_fit(X, k, method="randomized", seed=0, oversample=RPCA_OVERSAMPLE,
            power_iters=RPCA_POWER_ITERS):
    """Principal components of the rows of `X`.

    Parameters
    ----------
    X : array-like of shape (n, p)
    k : int
        Number of components, ``1 <= k <= min(n, p)``.
    method : {"randomized", "exact"}
        ``"randomized"`` uses a seeded Gaussian range finder with
        `oversample` extra columns and `power_iters` power iterations.
    seed : int

    Returns
    -------
    PCAFit
        Components ordered by decreasing explained variance, signs fixed so
        that each component's largest loading is positive.
    """
    X = as_matrix(X)
    n, p = X.shape
    if not (1 <= k <= min(n, p)):
        raise ValueError(f"k={k} out of range for a {n}x{p} matrix")
    mean = X.mean(axis=0)
    Xc = X - mean
    total = float((Xc ** 2).sum() / max(n - 1, 1))
    if total == 0.0 or np.all(X == X[0]):
        raise DegenerateInputError("zero-variance input: all rows identical")
    if method == "exact":
        _, s, Vt = la.svd(Xc, full_matrices=False, check_finite=False)
        s, V = s[:k], Vt[:k].T
    elif method == "randomized":
        s, V = _randomized_svd(Xc, k, oversample, power_iters, seed)
    else:
        raise ValueError(f"unknown PCA method {method!r}")
    return PCAFit(mean, _fix_signs(V), s ** 2 / max(n - 1, 1), total)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def _pair(a, b, min_len):
    a = as_vector(a, "y_true")
    b = as_vector(b, "y_pred")
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < min_len:
        raise DimensionError(f"need at least {min_len} values, got {a.shape[0]}")
    return a, b


def r_squared(y_true, y_pred):
    """Variance explained, ``1 - SS_res / SS_tot``."""
    y, yh = _pair(y_true, y_pred, 1)
    ss_tot = ((y - y.mean()) ** 2).sum()
    if ss_tot == 0:
        raise DegenerateInputError("r_squared undefined for constant y_true")
    return float(1.0 - ((y - yh) ** 2).sum() / ss_tot)


def pearson_r(y_true, y_pred):
    a, b = _pair(y_true, y_pred, 2)
    ac = a - a.mean()
    bc = b - b.mean()
    na = np.sqrt(ac @ ac)
    nb = np.sqrt(bc @ bc)
    if na == 0 or nb == 0:
        raise DegenerateInputError("pearson_r undefined for a constant vector")
    return float(np.clip((ac @ bc) / (na * nb), -1.0, 1.0))


def paired_t_test(errors_a, errors_b):
    """Two-sided paired t-test on per-instance errors.

    Returns ``(t, p)``. Identical inputs give ``(0.0, 1.0)``; a nonzero
    constant difference has no variance and raises
    :class:`DegenerateInputError`.
    """
    a, b = _pair(errors_a, errors_b, 2)
    d = a - b
    n = d.shape[0]
    if np.all(d == 0):
        return 0.0, 1.0
    sd = d.std(ddof=1)
    if sd == 0:
        raise DegenerateInputError("paired difference has zero variance")
    t = float(d.mean() / (sd / np.sqrt(n)))
    p = float(2.0 * stats.t.sf(abs(t), n - 1))
    return t, p
