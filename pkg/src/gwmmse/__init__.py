"""Group-weighted MMSE despreading against GPS-like spoofing interference."""

from .correlator import (
    DecisionOutput,
    PartialCorrelations,
    complete_integrate,
    full_mmse_oracle,
    matched_filter_decision,
    partial_integrate_dump,
)
from .errors import IqFormatError, NumericError, SingularMatrixError
from .mmse import (
    AutocorrWindow,
    MmseChannel,
    MmseConfig,
    MmseWeights,
    batch_autocorrelation,
    mse_estimate,
    solve_weights,
    window_push,
)
from .prn import (
    PrnCode,
    correlation_profile,
    generate_ca_code,
    synthetic_code,
    upsample_code,
    worst_case_delays,
)
from .signal import EpochVector, InterferenceSpec, NoiseSpec, Scenario, ScenarioConfig, compose_epoch

__version__ = "0.1.0"
