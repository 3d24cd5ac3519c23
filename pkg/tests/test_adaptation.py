import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfa.adaptation import (
    MANUAL_PRESET,
    adapt,
    adapted_names,
    interaction_factors,
    interaction_fit_apply,
    select_factors_manual,
    select_factors_pca,
    select_factors_rfe,
)
from rfa.errors import DimensionError


# adapt ---------------------------------------------------------------------------

def test_adapt_row_scaling_example():
    out = adapt([[1, 2], [3, 4]], [[2], [0.5]])
    assert out.tolist() == [[2, 4], [1.5, 2]]


def test_adapt_block_layout():
    rng = np.random.default_rng(0)
    X, V = rng.normal(size=(5, 100)), rng.random((5, 3))
    out = adapt(X, V)
    assert out.shape == (5, 300)
    for j in range(3):
        np.testing.assert_array_equal(out[:, j * 100:(j + 1) * 100], X * V[:, [j]])


def test_adapt_unit_factor_is_identity():
    X = np.random.default_rng(1).normal(size=(6, 4))
    np.testing.assert_array_equal(adapt(X, np.ones((6, 1))), X)


def test_adapt_row_mismatch():
    with pytest.raises(DimensionError):
        adapt(np.ones((3, 2)), np.ones((4, 1)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-100, 100), st.integers(1, 4), st.integers(1, 6))
def test_adapt_linear_and_width(seed, a, d, l):
    rng = np.random.default_rng(seed)
    X, V = rng.normal(size=(7, l)), rng.random((7, d))
    out = adapt(X, V)
    assert out.shape[1] == d * l
    np.testing.assert_allclose(adapt(a * X, V), a * out, rtol=1e-12, atol=1e-12)


def test_adapted_names_order():
    assert adapted_names(("x", "y"), ("age", "edu")) == ("age*x", "age*y", "edu*x", "edu*y")


# interactions ---------------------------------------------------------------------

def test_interactions_eleven_factors_give_66():
    F = np.random.default_rng(2).random((30, 11))
    out = interaction_factors(F)
    assert out.shape[1] == 66
    assert out.shape[1] - 11 == 55


def test_interactions_two_factor_example():
    out = interaction_factors(np.array([[0.0, 1.0], [1.0, 1.0]]))
    assert out[:, 2].tolist() == [0.0, 1.0]


def test_interactions_three_factor_hand_products():
    F = np.array([[0.0, 0.5, 1.0],
                  [1.0, 1.0, 0.0],
                  [0.5, 0.0, 0.5]])
    t, out = interaction_fit_apply(F, names=("a", "b", "c"))
    assert t.output_names[3:] == ("a:b", "a:c", "b:c")
    # products by hand: ab = [0, 1, 0], ac = [0, 0, .25], bc = [.5, 0, 0]
    # each renormalized by its own min/max
    np.testing.assert_allclose(out[:, 3], [0, 1, 0])
    np.testing.assert_allclose(out[:, 4], [0, 0, 1])
    np.testing.assert_allclose(out[:, 5], [1, 0, 0])
    np.testing.assert_array_equal(out[:, :3], F)


def test_interactions_constant_product_is_half():
    F = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
    assert interaction_factors(F)[:, 2].tolist() == [0.5, 0.5, 0.5]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_interactions_in_unit_interval(seed, d):
    F = np.random.default_rng(seed).random((12, d))
    out = interaction_factors(F)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_interactions_need_two_factors():
    with pytest.raises(ValueError):
        interaction_factors(np.ones((3, 1)))


# RFE ------------------------------------------------------------------------------

def oracle_ridge(Z, y, lam):
    n, p = Z.shape
    A = np.hstack([np.ones((n, 1)), Z])
    P = np.diag([0.0] + [lam] * p)
    return (np.linalg.inv(A.T @ A + P) @ A.T @ y)[1:]


def test_rfe_k_equals_d_identity():
    F = np.random.default_rng(3).normal(size=(20, 4))
    fs = select_factors_rfe(F, F[:, 0], 4, penalty=1.0)
    assert fs.names == ("f0", "f1", "f2", "f3")
    assert set(fs.provenance) == {"original"}


def test_rfe_noiseless_copy_survives():
    F = np.random.default_rng(4).normal(size=(40, 5))
    fs = select_factors_rfe(F, F[:, 2], 1, penalty=0.1)
    assert fs.names == ("f2",)


def test_rfe_planted_weights_trace():
    rng = np.random.default_rng(5)
    F = rng.normal(size=(200, 4))
    y = F @ [5.0, 0.1, 3.0, 0.01] + 0.05 * rng.normal(size=200)
    names = ("f1", "f2", "f3", "f4")
    # independent elimination trace with explicit-inverse ridge fits
    alive = list(range(4))
    while len(alive) > 2:
        Z = F[:, alive]
        Z = (Z - Z.mean(0)) / Z.std(0)
        w = oracle_ridge(Z, y, 1.0)
        del alive[int(np.argmin(np.abs(w)))]
    assert {names[j] for j in alive} == {"f1", "f3"}
    fs = select_factors_rfe(F, y, 2, penalty=1.0, names=names)
    assert set(fs.names) == {"f1", "f3"}
    # survivors are returned untransformed
    np.testing.assert_array_equal(fs.apply(F), F[:, [0, 2]])


def test_rfe_cv_penalty_path():
    rng = np.random.default_rng(6)
    F = rng.normal(size=(60, 5))
    y = 4 * F[:, 1] - 2 * F[:, 3] + 0.1 * rng.normal(size=60)
    assert set(select_factors_rfe(F, y, 2).names) == {"f1", "f3"}


def test_rfe_range():
    with pytest.raises(ValueError):
        select_factors_rfe(np.ones((4, 2)), np.arange(4.0), 3)


# PCA factors -----------------------------------------------------------------------

def test_pca_factors_full_rank_spans_space():
    rng = np.random.default_rng(7)
    Q, _ = np.linalg.qr(rng.normal(size=(50, 4)))
    F = Q * np.sqrt(50) + 10.0
    fs = select_factors_pca(F, 4)
    out = fs.apply(F)
    # regress the standardized factors on the scores: exact recovery
    Z = (F - F.mean(0)) / F.std(0)
    A = np.hstack([np.ones((50, 1)), out])
    coef, *_ = np.linalg.lstsq(A, Z, rcond=None)
    np.testing.assert_allclose(A @ coef, Z, atol=1e-9)
    assert fs.provenance == tuple(f"pca-component({i})" for i in range(1, 5))


def test_pca_factors_rank_one():
    t = np.random.default_rng(8).normal(size=30)
    F = np.column_stack([t, 2 * t + 1, -t])
    fs = select_factors_pca(F, 1)
    ev = fs.transform.steps[1].params["explained_variance"]
    total = np.cov((F - F.mean(0)) / F.std(0), rowvar=False).trace()
    assert ev[0] / total == pytest.approx(1.0, abs=1e-12)


def test_pca_factors_ratios_match_exact_oracle():
    rng = np.random.default_rng(9)
    F = rng.normal(size=(300, 4)) @ rng.normal(size=(4, 11)) + 0.3 * rng.normal(size=(300, 11))
    fs = select_factors_pca(F, 5, method="randomized", seed=3)
    ev = fs.transform.steps[1].params["explained_variance"]
    C = np.cov((F - F.mean(0)) / F.std(0), rowvar=False)
    eig = np.sort(np.linalg.eigvalsh(C))[::-1]
    np.testing.assert_allclose(ev / C.trace(), eig[:5] / eig.sum(), rtol=0.01)


def test_pca_factor_scores_min_max_scaled():
    F = np.random.default_rng(10).normal(size=(25, 6))
    out = select_factors_pca(F, 3).apply(F)
    np.testing.assert_allclose(out.min(0), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.max(0), 1.0, atol=1e-12)


# manual -------------------------------------------------------------------------

def test_manual_preset_selects_named_columns():
    names = ("median_income", "median_age", "pct_bachelors", "pct_black")
    fs = select_factors_manual(names, MANUAL_PRESET)
    F = np.arange(8.0).reshape(2, 4)
    assert fs.names == MANUAL_PRESET
    np.testing.assert_array_equal(fs.apply(F), F[:, [1, 3, 2]])
    with pytest.raises(DimensionError):
        select_factors_manual(names, ("nope",))
