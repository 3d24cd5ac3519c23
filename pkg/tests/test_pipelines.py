import json
from dataclasses import replace

import numpy as np
import pytest

from rfa.data import Dataset, FeatureTable, OutcomeVector, align
from rfa.experiments import FoldPlan, run_cv
from rfa.numerics import r_squared
from rfa.pipelines import (
    FittedModel,
    ModelConfig,
    apply_fs_strategy,
    fit_added_controls,
    fit_controls_only,
    fit_fa,
    fit_language_only,
    fit_model,
    fit_rc,
    fit_rfa,
    parse_factor_policy,
)
from rfa.synthetic import SyntheticSpec, generate_synthetic

SMALL = SyntheticSpec(n_instances=200, n_language_features=60, seed=3)


@pytest.fixture(scope="module")
def small():
    return generate_synthetic(SMALL)


def small_cfg(family, **kw):
    kw.setdefault("n_components", 15)
    return ModelConfig(family, **kw)


def brute_ridge_predict(X, y, lam, Xnew):
    n, p = X.shape
    A = np.hstack([np.ones((n, 1)), X])
    P = np.diag([0.0] + [lam] * p)
    coef = np.linalg.inv(A.T @ A + P) @ A.T @ y
    return coef[0] + Xnew @ coef[1:]


# config ----------------------------------------------------------------------------

def test_factor_policy_parsing():
    assert parse_factor_policy("all") == ("all", None)
    assert parse_factor_policy("manual:a, b") == ("manual", ("a", "b"))
    assert parse_factor_policy("rfe:3") == ("rfe", 3)
    for bad in ("pca", "pca:0", "rfe:x", "lasso:2"):
        with pytest.raises(ValueError):
            parse_factor_policy(bad)


def test_model_config_validation():
    with pytest.raises(ValueError):
        ModelConfig("ols")
    with pytest.raises(ValueError):
        ModelConfig("rfa", fs_strategy="LateFS")
    cfg = ModelConfig("rfa", k_best={"ngrams": 5}, name="x")
    assert ModelConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


# single-source baselines ------------------------------------------------------------

def test_controls_only_exact_linear_fit(small):
    F = np.asarray(small.factors.values)
    y = F @ np.linspace(-1, 1, F.shape[1]) + 2.0
    d = Dataset(small.language, small.factors, OutcomeVector("y", small.instance_ids, y))
    m = fit_controls_only(d, penalty=0.0)
    assert r_squared(y, m.predict(d)) == pytest.approx(1.0, abs=1e-10)


def test_controls_only_noise_outcome_near_zero(small):
    y = np.random.default_rng(0).normal(size=small.n_instances)
    d = Dataset(small.language, small.factors, OutcomeVector("y", small.instance_ids, y))
    rep = run_cv(d, [small_cfg("controls")], FoldPlan.make(d.instance_ids, 5, 0), pairs="none")
    assert abs(rep.pooled["controls"]["r2"]) < 0.1


def test_controls_only_matches_normal_equation_oracle():
    d = generate_synthetic(SyntheticSpec(seed=7))
    plan = FoldPlan.make(d.instance_ids, 10, 7)
    rep = run_cv(d, [ModelConfig("controls")], plan, pairs="none")
    F, y = np.asarray(d.factors.values), d.y
    pred = np.empty_like(y)
    for tr, te in plan.fold_rows(d.instance_ids):
        mu, sd = F[tr].mean(0), F[tr].std(0)
        Z = np.hstack([np.ones((len(tr), 1)), (F[tr] - mu) / sd])
        coef = np.linalg.solve(Z.T @ Z, Z.T @ y[tr])
        pred[te] = coef[0] + ((F[te] - mu) / sd) @ coef[1:]
    assert rep.pooled["controls"]["r2"] == pytest.approx(r_squared(y, pred), abs=0.02)


# two-stage identity and degenerate equivalences -----------------------------------

@pytest.mark.parametrize("family", ["rc", "rfa"])
def test_two_stage_identity(small, family):
    m = fit_model(small, small_cfg(family))
    assert len(m.stage_fits) == 2
    np.testing.assert_array_equal(m.predict(small), m.stage1_predict(small) + m.stage2_predict(small))


@pytest.mark.parametrize("family", ["controls", "language", "added", "fa"])
def test_single_stage_families(small, family):
    assert len(fit_model(small, small_cfg(family)).stage_fits) == 1


def test_rfa_without_factors_equals_rc(small):
    rc = fit_rc(small, small_cfg("rc"))
    rfa = fit_rfa(small, small_cfg("rfa", factor_policy="none", controls_factors="all"))
    assert np.array_equal(rfa.predict(small), rc.predict(small))


def test_rc_without_language_equals_controls(small):
    bare = small.with_language([])
    rc = fit_rc(bare, small_cfg("rc"))
    ctl = fit_controls_only(bare, small_cfg("controls"))
    assert rc.stage_fits[1].weights.size == 0
    assert np.array_equal(rc.predict(bare), ctl.predict(bare))


def test_fa_without_factors_equals_language(small):
    fa = fit_fa(small, small_cfg("fa", factor_policy="none"))
    lang = fit_language_only(small, small_cfg("language"))
    assert np.array_equal(fa.predict(small), lang.predict(small))


def test_rc_zero_controls_equals_language(small):
    zero = FeatureTable("factors", small.instance_ids, ("z",), np.zeros((small.n_instances, 1)))
    d = small.with_factors(zero)
    rc = fit_rc(d, small_cfg("rc"))
    lang = fit_language_only(d, small_cfg("language"))
    assert np.all(rc.stage1_predict(d) == pytest.approx(d.y.mean()))
    np.testing.assert_allclose(rc.predict(d), lang.predict(d), rtol=1e-10, atol=1e-10)


def test_fa_constant_factor_reproduces_language_only():
    """A factor that is 1 everywhere duplicates the language block."""
    rng = np.random.default_rng(11)
    ids = tuple(f"i{k:02d}" for k in range(30))
    X = rng.normal(size=(30, 5))
    y = X @ [1.0, -0.5, 0.0, 2.0, 0.3] + 0.2 * rng.normal(size=30)
    d = align([FeatureTable("ngrams", ids, tuple("abcde"), X),
               FeatureTable("factors", ids, ("one",), np.ones((30, 1)))],
              OutcomeVector("y", ids, y))
    lam = 3.0
    fa = fit_fa(d, ModelConfig("fa", fs_strategy="NoFS", penalty=lam))
    lang = fit_language_only(d, ModelConfig("language", n_components=5, penalty=lam / 2,
                                            pca_method="exact"))
    Z = (X - X.mean(0)) / X.std(0)
    oracle = brute_ridge_predict(np.hstack([Z, Z]), y, lam, np.hstack([Z, Z]))
    np.testing.assert_allclose(fa.predict(d), oracle, atol=1e-6)
    np.testing.assert_allclose(lang.predict(d), oracle, atol=1e-6)


# widths per feature-selection strategy ---------------------------------------------

@pytest.mark.parametrize("strategy,width", [
    ("NoFS", 2 * 60 + 3 * 2 * 60),
    ("SeparatedFS", 4 * 15),
    ("CombinedFS", 15 * 2 * 2),
    ("EarlyFS", 2 * 15 + 3 * 2 * 15),
])
def test_strategy_widths(small, strategy, width):
    lang = {t.group: t for t in small.language}
    V = np.random.default_rng(0).random((small.n_instances, 3))
    design, X = apply_fs_strategy(strategy, lang, V, small.y, small_cfg("fa"))
    assert X.shape == (small.n_instances, width)
    assert design.width == width
    np.testing.assert_allclose(design.apply(lang, V, small.n_instances), X, atol=1e-10)


def test_unknown_strategy(small):
    with pytest.raises(ValueError):
        apply_fs_strategy("LateFS", {}, np.zeros((3, 1)), np.zeros(3), small_cfg("fa"))


# factor policies and interactions ------------------------------------------------

@pytest.mark.parametrize("policy,width", [("pca:3", 3), ("rfe:4", 4),
                                           ("manual:median_age,pct_black", 2)])
def test_factor_policies(small, policy, width):
    m = fit_rfa(small, small_cfg("rfa", factor_policy=policy))
    assert len(m.factor_set.names) == width
    assert m.design.factor_names == m.factor_set.names
    assert np.isfinite(m.predict(small)).all()


def test_interaction_pool(small):
    m = fit_fa(small, small_cfg("fa", interactions=True, factor_policy="all"))
    assert len(m.factor_set.names) == 66
    assert m.factor_set.provenance.count("original") == 11


# persistence, determinism, leakage ----------------------------------------------

@pytest.mark.parametrize("family", ["controls", "language", "added", "rc", "fa", "rfa"])
def test_model_json_round_trip(small, family, tmp_path):
    m = fit_model(small, small_cfg(family, factor_policy="pca:4"))
    m.save(tmp_path / "model.json")
    back = FittedModel.load(tmp_path / "model.json")
    assert np.array_equal(back.predict(small), m.predict(small))
    assert json.loads((tmp_path / "model.json").read_text())["schema"] == "rfa.model/1"


def test_fit_is_deterministic(small):
    a = fit_rfa(small, small_cfg("rfa"))
    b = fit_rfa(small, small_cfg("rfa"))
    assert a.to_dict() == b.to_dict()


def test_held_out_rows_do_not_leak(small):
    cfg = small_cfg("rfa", factor_policy="rfe:5")
    rows = np.arange(small.n_instances)
    train, test = rows[:150], rows[150:]
    base = fit_model(small.take(train), cfg).to_dict()
    # scramble every held-out feature value; the training subset is untouched
    rng = np.random.default_rng(1)
    perm = np.concatenate([train, rng.permutation(test)])
    lang = [FeatureTable(t.group, t.instance_ids, t.feature_names, np.asarray(t.values)[perm])
            for t in small.language]
    fac = FeatureTable("factors", small.instance_ids, small.factors.feature_names,
                       np.asarray(small.factors.values)[perm])
    scrambled = Dataset(lang, fac, small.outcome)
    assert fit_model(scrambled.take(train), cfg).to_dict() == base


def test_predict_missing_group(small):
    m = fit_language_only(small, small_cfg("language"))
    with pytest.raises(Exception, match="lacks"):
        m.predict(small.with_language(small.language[:1]))


# planted structure --------------------------------------------------------------

def test_rc_beats_single_sources_on_additive_data():
    d = generate_synthetic(replace(SMALL, n_instances=400, interaction_signal=0.0,
                                   control_signal=1.0, language_signal=1.0, seed=5))
    fams = [small_cfg(f) for f in ("controls", "language", "rc")]
    rep = run_cv(d, fams, FoldPlan.make(d.instance_ids, 5, 5), pairs="none")
    r2 = {k: v["r2"] for k, v in rep.pooled.items()}
    assert r2["rc"] > r2["controls"] and r2["rc"] > r2["language"]


def test_rc_near_controls_with_noise_language(small):
    rng = np.random.default_rng(2)
    noise = [FeatureTable(t.group, t.instance_ids, t.feature_names,
                          rng.normal(size=t.values.shape)) for t in small.language]
    d = small.with_language(noise)
    plan = FoldPlan.make(d.instance_ids, 5, 0)
    rep = run_cv(d, [small_cfg("controls"), small_cfg("rc")], plan, pairs="none")
    assert rep.pooled["rc"]["r2"] == pytest.approx(rep.pooled["controls"]["r2"], abs=0.03)


def test_added_controls_width(small):
    m = fit_added_controls(small, small_cfg("added"))
    assert m.stage_fits[0].weights.size == 2 * 15 + 11
