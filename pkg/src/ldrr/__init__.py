"""Linear discriminant analysis through penalized multi-response regression.

Regress one-hot class indicators on features with a sparsity- or
rank-inducing penalty, convert the coefficients into discriminant
coefficients through an estimated L x L link matrix, and classify with
the resulting linear scores, optionally restricted to a few leading
discriminant directions.
"""

from .classifier import (
    ClassStats,
    LdrrFModel,
    LdrrModel,
    class_scatter,
    class_stats,
    discriminant_from_link,
    fisher_directions,
    fit_ldrr,
    fit_ldrr_f,
    penalty_family,
    residual_link,
    select_penalty_cv,
    select_rank_cv,
)
from .errors import LdrrError
from .io import load_csv_dataset, load_model, save_model
from .model_core import (
    MixtureModel,
    PopulationQuantities,
    bayes_classify,
    bayes_error_mc,
    bayes_scores,
    class_separation,
    discriminant_coefs,
    link_matrix,
    marginal_covariance,
    population_quantities,
    regression_coefs,
    sample,
    subspace_rule_scores,
)
from .regression import (
    CvResult,
    ElasticNet,
    FixedRank,
    GroupLassoRidge,
    LabeledDataset,
    Lasso,
    NoPenalty,
    ReducedRank,
    ReducedRankRidge,
    RegressionFit,
    Ridge,
    cross_validate,
    fit_elastic_net_column,
    fit_group_lasso_ridge,
    fit_penalized,
    fit_reduced_rank,
    kkt_residual,
    lambda_grid,
    penalized_objective,
    soft_threshold,
    stratified_folds,
)
from .simulation import (
    ExperimentReport,
    FittedMethod,
    LowRankScenarioConfig,
    Method,
    MethodSummary,
    ScenarioData,
    SparseScenarioConfig,
    derive_seed,
    evaluate,
    gen_ar1_scaled_cov,
    gen_class_probs,
    gen_lowrank_scenario,
    gen_sparse_scenario,
    generate_scenario,
    ldrr_method,
    oracle_method,
    run_experiment,
    sample_dataset,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
