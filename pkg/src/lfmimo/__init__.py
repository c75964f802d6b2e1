"""Limited-feedback multiuser MIMO linear transceiver simulation.

Subpackages: ``system`` (configuration, channels, RNG), ``codebook``
(direction-quantization codebooks), ``combining`` (receiver-side
quantization-time combining and MMSE decoding), ``precoding``
(error-aware sum-MSE precoder and power allocation), ``link_sim``
(Monte Carlo trials and sweeps) and ``cli`` (batch front end).
"""

from .codebook import (
    Codebook,
    QuantizationResult,
    msip_error_bound,
    quantize_direction,
    read_codebook,
    train_msip_codebook,
    write_codebook,
)
from .combining import (
    FeedbackReport,
    ReceiverAssumptions,
    eigen_combine,
    expected_precoder,
    mesc_combine_user,
    met_combine,
    mmse_data_decoder,
    qbc_combine,
    stream_sinr,
)
from .errors import (
    ConvergenceError,
    DimensionError,
    FormatError,
    InsufficientTraining,
    LengthError,
    LfMimoError,
    RankDeficient,
    UnknownPreset,
    ZeroVector,
)
from .link_sim import (
    Scheme,
    SweepResult,
    TrialResult,
    demodulate,
    modulate,
    run_downlink_trial,
    sweep,
    train_user_codebooks,
)
from .precoding import (
    EffectiveChannelSet,
    PowerAllocation,
    PrecoderSolution,
    allocate_power,
    build_J,
    full_csi_iterative,
    naive_smse_design,
    power_kkt_residual,
    precoder_from_powers,
    sigma_e_schedule,
    smse_closed_form,
    smse_design,
    zf_precoder,
)
from .system import (
    ChannelRealization,
    SeededRng,
    SystemConfig,
    build_system_config,
    draw_channel,
)

__version__ = "0.1.0"
