"""Multiple imputation of missing binary covariates in randomized experiments,
under non-parametrically identified ICIN or MAR restrictions."""

from .core import (
    CompletedDataset,
    Dataset,
    MissingnessPattern,
    OutcomeCoefficients,
    Stratification,
    StratifiedTheta,
    ThetaVector,
    Unit,
    ValidationError,
    validate_dataset,
)
from .dataio import DataError, ingest_csv, write_dataset_csv
from .harness import METHODS, RunReport, SimConfig, analyze_dataset, emit_report, run_simulation
from .identify import (
    IdentificationError,
    IdentifiedJoint,
    Restriction,
    build_identified_joint,
    check_identification,
    extrapolation_dist,
)
from .impute import (
    GibbsConfig,
    complete_cases,
    mean_impute,
    mi_design_stage,
    mi_outcome_stage,
    regression_impute,
    tabulate_counts,
)
from .infer import (
    FitResult,
    MetricsRow,
    PooledEstimate,
    aggregate_metrics,
    fit_logistic,
    rubin_combine,
    sample_beta_conditional,
    wald_interval,
)
from .rngkit import RngStream, derive_stream, sample_polya_gamma
from .simgen import ScenarioConfig, generate_dataset

__version__ = "0.1.0"
