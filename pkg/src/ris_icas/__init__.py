"""RIS-assisted simultaneous data transmission and secret-key generation."""

from .channel import (
    ChannelDynamics,
    ChannelSet,
    PhaseShiftVector,
    equivalent_channel,
    evolve_channel_set,
    ls_estimate,
    quantize_phase_vector,
    sample_channel_set,
)
from .correlation import (
    CorrelationModel,
    analytic_correlation_model,
    correlation_value,
    mc_estimate_correlations,
)
from .rates import (
    LinkStats,
    RateConfig,
    data_rate,
    f_of_z,
    key_rate_eavesdrop,
    key_rate_sleep,
    key_rate_unified,
    leak_rate_eve,
    link_stats,
    mi_oracle_mc,
)

__version__ = "0.1.0"
