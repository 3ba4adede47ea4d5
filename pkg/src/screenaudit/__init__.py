"""screenaudit: stress-testing toolkit for composite-indicator designations.

The library scores geographic units under a weighted indicator hierarchy,
measures how designations respond to equally defensible modeling choices
(pre-processing, aggregation, variable sets, weights), searches for
adversarial weight settings, and estimates the funding consequences of
designation with discontinuity and matching designs.
"""

from .data import (
    Aggregation,
    Demographics,
    FundingProject,
    HealthSet,
    IndicatorSchema,
    ModelSpec,
    Preprocessing,
    Subcategory,
    TractRecord,
    Variable,
    ces_schema,
    ingest_demographics,
    ingest_districts,
    ingest_projects,
    ingest_tracts,
    join_demographics,
    attach_districts,
    missingness_summary,
    schema_from_json,
    write_demographics,
    write_districts,
    write_projects,
    write_tracts,
)
from .engine import (
    ScoreResult,
    apply_health_set,
    designation_cutoff_count,
    omit_category_model,
    percentile_rank,
    run_model,
    scores_from_csv,
    scores_to_csv,
    zscore_standardize,
)
from .errors import (
    AnalysisError,
    EstimationError,
    IngestionError,
    LedgerError,
    SchemaError,
    ScoringError,
    ScreenAuditError,
    SearchError,
)
from .sensitivity import (
    DEFAULT_SEED,
    IntervalModel,
    LatticeResult,
    TractRange,
    auc_correlation_r2,
    designation_churn,
    enumerate_lattice,
    fit_interval_model,
    lattice_specs,
    overall_sensitivity,
    predictor_auc,
    sensitivity_reduction,
    subgroup_discordance,
    tract_score_ranges,
    union_designation,
)
from .adversarial import (
    AdversarialProblem,
    DemographicDescriptor,
    Direction,
    ManipulationRange,
    SearchResult,
    StepSchedule,
    demographic_objective,
    hooke_jeeves_search,
    manipulation_range,
)
from .rdd import (
    DollarEffect,
    RddDataset,
    RddEstimate,
    RddForm,
    aggregate_dollar_effect,
    build_rdd_dataset,
    effect_to_percent,
    ik_bandwidth,
    ols_hc1,
    rdd_estimate,
    robustness_grid,
)
from .matching import (
    EffectEstimate,
    ImputationSet,
    MatchResult,
    PooledEstimate,
    flag_imbalanced,
    matched_effect,
    matching_grid,
    pmm_impute,
    pooled_percent,
    propensity_match,
    rubin_pool,
    standardized_mean_difference,
)
from .funding import (
    PrioritySets,
    RepairAction,
    TractFunding,
    assign_tract_district,
    attribute_district_funds,
    binned_funding_profile,
    funding_frame,
    repair_projects,
    tract_funding_totals,
    write_repair_log,
)
from .synth import (
    SynthConfig,
    generate_funding_rdd,
    generate_projects,
    generate_tracts,
    mask_missing,
    synthetic_schema,
)
from .report import AuditConfig, run_audit_report

__version__ = "0.1.0"

__all__ = [
    # data
    "Aggregation", "Demographics", "FundingProject", "HealthSet",
    "IndicatorSchema", "ModelSpec", "Preprocessing", "Subcategory",
    "TractRecord", "Variable", "ces_schema", "ingest_demographics",
    "ingest_districts", "ingest_projects", "ingest_tracts",
    "join_demographics", "attach_districts", "missingness_summary",
    "schema_from_json", "write_demographics", "write_districts",
    "write_projects", "write_tracts",
    # engine
    "ScoreResult", "apply_health_set", "designation_cutoff_count",
    "omit_category_model", "percentile_rank", "run_model",
    "scores_from_csv", "scores_to_csv", "zscore_standardize",
    # errors
    "AnalysisError", "EstimationError", "IngestionError", "LedgerError",
    "SchemaError", "ScoringError", "ScreenAuditError", "SearchError",
    # sensitivity
    "DEFAULT_SEED", "IntervalModel", "LatticeResult", "TractRange",
    "auc_correlation_r2", "designation_churn", "enumerate_lattice",
    "fit_interval_model", "lattice_specs", "overall_sensitivity",
    "predictor_auc", "sensitivity_reduction", "subgroup_discordance",
    "tract_score_ranges", "union_designation",
    # adversarial
    "AdversarialProblem", "DemographicDescriptor", "Direction",
    "ManipulationRange", "SearchResult", "StepSchedule",
    "demographic_objective", "hooke_jeeves_search", "manipulation_range",
    # rdd
    "DollarEffect", "RddDataset", "RddEstimate", "RddForm",
    "aggregate_dollar_effect", "build_rdd_dataset", "effect_to_percent",
    "ik_bandwidth", "ols_hc1", "rdd_estimate", "robustness_grid",
    # matching
    "EffectEstimate", "ImputationSet", "MatchResult", "PooledEstimate",
    "flag_imbalanced", "matched_effect", "matching_grid", "pmm_impute",
    "pooled_percent", "propensity_match", "rubin_pool",
    "standardized_mean_difference",
    # funding
    "PrioritySets", "RepairAction", "TractFunding", "assign_tract_district",
    "attribute_district_funds", "binned_funding_profile", "funding_frame",
    "repair_projects", "tract_funding_totals", "write_repair_log",
    # synth
    "SynthConfig", "generate_funding_rdd", "generate_projects",
    "generate_tracts", "mask_missing", "synthetic_schema",
    # report
    "AuditConfig", "run_audit_report",
    "__version__",
]
