"""Residualized factor adaptation and its baseline model families."""
from .adaptation import (
    FactorSet,
    adapt,
    interaction_factors,
    select_factors_pca,
    select_factors_rfe,
)
from .data import (
    Dataset,
    FeatureTable,
    OutcomeVector,
    align,
    drop_low_wordcount,
    load_long_csv,
    load_outcome_csv,
    load_wide_csv,
    prune_by_coverage,
)
from .experiments import (
    ExperimentReport,
    FoldPlan,
    compare_fs_strategies,
    run_cv,
    run_replicates,
    sweep_factors,
    sweep_kbest,
)
from .numerics import (
    RidgeFit,
    paired_t_test,
    pca_fit,
    pearson_r,
    r_squared,
    ridge_fit,
    ridge_fit_cv,
    ridge_predict,
)
from .pipelines import (
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
    predict,
)
from .synthetic import BENCH_DEFAULT, SyntheticSpec, generate_synthetic

__version__ = "0.1.0"
