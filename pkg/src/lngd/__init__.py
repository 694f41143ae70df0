"""Label-noise gradient descent laboratory for the two-patch signal-noise model."""

__version__ = "0.1.0"

from .data import (
    Dataset,
    Sample,
    SignalSpec,
    compute_snr,
    generate_dataset,
    sample_noise_vector,
)
from .decomposition import (
    CoefficientState,
    iota,
    iota_series,
    projection_check,
    ratio_summary,
    reconstruct_weights,
    update_coefficients,
)
from .network import (
    Network,
    activation,
    activation_derivative,
    clean_batch_loss,
    forward,
    full_batch_gradient,
    init_network,
    logistic_loss,
    loss_derivative,
    zero_one_error,
)
from .theory import (
    check_assumptions,
    concentration_suite,
    estimate_stage_times,
    iota_fixed_point,
    coefficient_envelope_monitor,
    stage2_boundedness_check,
    empirical_verdicts,
)
from .training import (
    LabelNoiseSpec,
    RunAborted,
    TrainConfig,
    TrainTrace,
    TraceRow,
    sample_multipliers,
    train_run,
    train_step,
)

__all__ = [
    "__version__",
    "Dataset",
    "Sample",
    "SignalSpec",
    "compute_snr",
    "generate_dataset",
    "sample_noise_vector",
    "CoefficientState",
    "iota",
    "iota_series",
    "projection_check",
    "ratio_summary",
    "reconstruct_weights",
    "update_coefficients",
    "Network",
    "activation",
    "activation_derivative",
    "clean_batch_loss",
    "forward",
    "full_batch_gradient",
    "init_network",
    "logistic_loss",
    "loss_derivative",
    "zero_one_error",
    "check_assumptions",
    "concentration_suite",
    "estimate_stage_times",
    "iota_fixed_point",
    "coefficient_envelope_monitor",
    "stage2_boundedness_check",
    "empirical_verdicts",
    "LabelNoiseSpec",
    "RunAborted",
    "TrainConfig",
    "TrainTrace",
    "TraceRow",
    "sample_multipliers",
    "train_run",
    "train_step",
]
