"""Model-based clustering of stationary time series.

Each series is reduced to a Toeplitz scatter matrix of sample
autocovariances, the panel of scatter matrices is fitted with a Wishart
mixture by EM, and the fitted group scale matrices are read out as
autoregressive models with innovation variances, coefficient standard
errors and information criteria. Distance-based and Gaussian-mixture
baselines plus a simulation benchmark ship alongside.
"""

__version__ = "0.1.0"

from .baselines import (
    DistanceMatrix,
    GmmFit,
    ar_coefficients,
    acf_vector,
    clustering_accuracy,
    d_acf,
    d_pacf,
    d_pic,
    distance_matrix,
    feature_vectors,
    gmm_fit,
    hierarchical_cluster,
    pacf,
)
from .em import (
    WmmConfig,
    WmmFit,
    fit,
    lambda_score,
    observed_loglik,
    responsibilities,
    update_lambda,
    update_pi,
    update_sigma,
)
from .errors import (
    ArmmError,
    ConfigError,
    DegenerateSeries,
    DomainError,
    EmptyClusterError,
    InsufficientData,
    LagOutOfRange,
    NotPositiveDefinite,
    NumericalError,
    NumericalFailure,
    PanelFormatError,
    SeriesTooShort,
    ValidationError,
)
from .features import (
    ScatterFeature,
    TimeSeries,
    autocov,
    center,
    normalized_scatter,
    panel_features,
    scatter_matrix,
)
from .panel_io import panel_to_csv, parse_panel, read_panel, write_panel
from .selection import IcEntry, IcReport, group_ic, select_G, select_lag_per_group
from .simulate import (
    ArmaSpec,
    BenchmarkReport,
    ScenarioCase,
    run_benchmark,
    scenario,
    simulate_arma,
    simulate_panel,
)
from .wishart import (
    SpdMatrix,
    digamma,
    log_multigamma,
    logdet_spd,
    wishart_log_density,
    wishart_log_kernel,
)
from .yule_walker import (
    ArMixtureModel,
    GroupArModel,
    assemble_armm,
    block_partition,
    sandwich_covariance,
    yw_coefficients,
    yw_innovation_variance,
)
