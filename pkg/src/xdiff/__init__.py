"""Stochastic cross-diffusion population systems on the unit interval.

A semi-implicit Euler-Maruyama solver with no-flux boundaries, the
quadratic entropy algebra for reversible interaction matrices, and Monte
Carlo harnesses for strong-convergence and long-time experiments.
"""

from .diagnostics import (
    DiagnosticsRecord,
    FitError,
    FitResult,
    ensemble_mean_error,
    fit_exponential_rate,
    fit_order,
    l2_norm,
)
from .grid import (
    GridError,
    GridSpec,
    LaplacianOperator,
    SemiImplicitFactor,
    build_neumann_laplacian,
    factor_semi_implicit,
    weighted_mass,
)
from .harness import (
    EnsembleResult,
    ExperimentConfig,
    HarnessError,
    LevelStats,
    MeanSeries,
    SampleRun,
    longtime_study,
    run_ensemble,
    simulate_ensemble,
    spatial_convergence_study,
    temporal_convergence_study,
)
from .model import (
    CoefficientMatrix,
    DetailedBalanceWeights,
    ModelError,
    ModelParams,
    NotReversibleError,
    SpeciesField,
    eigenvalues_have_positive_real_part,
    find_detailed_balance_weights,
    pressure,
    rao_entropy,
    relative_rao_entropy,
    spatial_average,
)
from .noise import (
    NoiseError,
    NoiseKind,
    NoisePath,
    NoiseSpec,
    coarsen,
    cosine_mode_profiles,
    sample_path,
    sigma_apply,
)
from .scheme import (
    BlowupError,
    RunResult,
    SchemeError,
    StepWorkspace,
    TimeSpec,
    default_initial_data,
    discrete_flux,
    em_step,
    run_path,
    two_species_initial_data,
)

__version__ = "0.1.0"
