"""Randomized-response toolkit for privacy-preserving categorical data.

Local randomization of categorical records, unbiased frequency estimation
from the randomized output, privacy-budget accounting, dependence-driven
attribute clustering, secure-sum aggregation, and record reweighting —
plus the evaluation harness tying them together.
"""

__version__ = "0.1.0"

from .adjustment import AdjustmentError, WeightedDataset, adjust_weights, rr_adjust
from .clustering import ClusteringError, ClusterPartition, cluster_attributes
from .dataset import (
    AttributeSchema,
    Dataset,
    IngestReport,
    JointDomain,
    SchemaError,
    dataset_to_csv,
    discretize,
    load_csv,
    parse_schema_spec,
)
from .dependence import (
    ContingencyTable,
    DependenceScore,
    attribute_dependence,
    cramers_v,
    pairwise_matrix,
    pearson_abs,
)
from .error_model import (
    ErrorBound,
    absolute_error_bound,
    chi2_quantile_1df,
    relative_error_bound,
    sqrt_b_curve,
)
from .mpc import (
    DependenceEstimationReport,
    MessageLog,
    Party,
    ProtocolError,
    estimate_dependences_rr_per_attribute,
    estimate_dependences_rr_per_pair,
    estimate_dependences_secure_bivariate,
    make_parties,
    secure_sum_count,
)
from .pipeline import (
    CountQuery,
    EvaluationOracle,
    ExperimentResult,
    PipelineConfig,
    PipelineError,
    QueryResult,
    UndersampledWarning,
    estimate_count,
    evaluate_query,
    run_experiment,
    run_pipeline,
    run_rr_clusters,
    run_rr_independent,
    run_rr_joint,
)
from .rr_core import (
    DistributionEstimate,
    EstimationError,
    PrivacyBudget,
    RandomizationMatrix,
    cluster_matrix,
    derive_rng,
    empirical_lambda,
    epsilon_of,
    estimate_pi,
    keep_or_uniform_matrix,
    project_to_simplex,
    randomize,
    randomize_column,
)

__all__ = [name for name in dir() if not name.startswith("_")]
