"""Modeling, analysis, tuning, and auditing of PDH laser-locking loops."""

from .transfer import (
    BodeTrace,
    CavityPole,
    Delay,
    FirstOrderHighPass,
    Gain,
    Integrator,
    LowPassButterworth,
    LowPassFirstOrder,
    PdLockin,
    Pid,
    Product,
    Tabulated,
    TransferModel,
    bode_grid,
    compose,
    log_grid,
    path_delay,
)
from .pdh import (
    DetectorConfig,
    DiscriminatorConfig,
    ModulationConfig,
    NoiseBudget,
    SidebandRatio,
    demod_filter_requirement,
    error_signal,
    ke_slope,
    optimal_beta,
    pd_noise_budget,
    sideband_ratio,
)
from .loop import (
    BranchSum,
    FastFilterConfig,
    LoopConfig,
    MarginsReport,
    SingularityError,
    assemble_open_loop,
    closed_loop_from_open,
    closed_loop_psd,
    closed_to_open,
    discriminator_model,
    loop_matrix_response,
    margins,
)
from .noise import (
    NoiseModel,
    PsdTrace,
    beta_separation_line,
    beta_separation_linewidth,
    noise_model_psd,
    sy4_to_sy1,
)
from .tuning import (
    CavityAdvice,
    PhaseBudget,
    TunePolicy,
    TuneResult,
    autotune_fast,
    cavity_advisor,
    low_freq_excess_check,
    oscillation_test,
    phase_budget,
)
from .measure import (
    FitError,
    FitReport,
    ParseError,
    RingdownTrace,
    derive_gfast,
    fit_lockin_chain,
    fit_ringdown,
    parse_bode_csv,
)

__version__ = "0.1.0"
