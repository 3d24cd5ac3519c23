from dataclasses import replace

import numpy as np
import pytest

from rfa.experiments import run_replicates
from rfa.numerics import r_squared
from rfa.pipelines import ModelConfig, fit_rfa
from rfa.synthetic import BENCH_DEFAULT, CENSUS_FACTORS, SyntheticSpec, generate_synthetic


def test_bench_default_shape():
    d = generate_synthetic(BENCH_DEFAULT)
    assert d.n_instances == 800
    assert [t.group for t in d.language] == ["ngrams", "topics"]
    assert all(t.values.shape == (800, 500) for t in d.language)
    assert d.factors.feature_names == CENSUS_FACTORS
    assert BENCH_DEFAULT.seed == 7


def test_language_is_nonnegative_and_sparse():
    spec = SyntheticSpec(n_instances=100, n_language_features=50, seed=1)
    zeros = {}
    for sp in (0.0, 0.2, 0.9):
        ng = np.asarray(generate_synthetic(replace(spec, sparsity=sp)).group("ngrams").values)
        assert ng.min() >= 0.0
        zeros[sp] = (ng == 0).mean()
    assert 0.0 < zeros[0.0] < zeros[0.2] < zeros[0.9]


def test_metadata_records_planted_coefficients():
    spec = SyntheticSpec(n_instances=50, n_language_features=8, n_factors=3, n_topics=4)
    d = generate_synthetic(spec)
    m = d.metadata
    assert m["beta"].shape == (3,)
    assert m["gamma"].shape == (4,)
    assert m["delta"].shape == (3, 4)
    assert SyntheticSpec.from_dict(m["spec"]) == spec
    # the outcome is the weighted sum of the unit-variance planted terms plus noise
    c = m["components"]
    resid = d.y - (spec.control_signal * c["control"] + spec.language_signal * c["language"]
                   + spec.interaction_signal * c["interaction"])
    assert resid.std() == pytest.approx(spec.noise_sd, rel=0.35)


def test_generator_is_pure_given_seed():
    spec = SyntheticSpec(n_instances=40, n_language_features=10)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    assert np.array_equal(a.y, b.y)
    assert all(x.equals(y) for x, y in zip(a.language, b.language))
    assert not np.array_equal(generate_synthetic(spec.with_seed(8)).y, a.y)


@pytest.mark.parametrize("bad", [{"noise_sd": -1}, {"control_signal": -0.1}, {"sparsity": 1.5}])
def test_spec_invariants(bad):
    with pytest.raises(ValueError):
        SyntheticSpec(**bad)


def test_noiseless_rfa_training_fit_near_perfect():
    # without outcome noise, count noise or masking the only misfit left is the
    # log-linear link between topics and word rates
    spec = replace(BENCH_DEFAULT, noise_sd=0.0, sparsity=0.0, word_count_mean=1e9,
                   n_instances=1600)
    d = generate_synthetic(spec)
    noisy = generate_synthetic(replace(spec, noise_sd=0.8))
    clean_r2 = r_squared(d.y, fit_rfa(d).predict(d))
    assert clean_r2 > 0.98
    assert clean_r2 > r_squared(noisy.y, fit_rfa(noisy).predict(noisy))


@pytest.mark.slow
def test_uninformative_language_favours_controls():
    spec = replace(BENCH_DEFAULT, n_instances=400, n_language_features=100,
                   language_signal=0.0, interaction_signal=0.0)
    fams = ("controls", "language", "added", "rc", "fa", "rfa")
    rs = run_replicates(spec, [ModelConfig(f, n_components=20) for f in fams], range(20))
    ctl = rs.mean_r2("controls")
    for f in fams[1:]:
        assert ctl >= rs.mean_r2(f) - 0.03, f
