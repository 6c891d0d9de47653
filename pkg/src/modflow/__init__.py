"""Exact filtering of a signal observed through switching Brownian-bridge sources."""

from .errors import (
    ConfigurationError,
    DegenerateScalingError,
    DomainError,
    ModflowError,
    NumericalDegeneracyError,
    PositivityError,
    ValidationError,
)
from .stochastic import (
    BridgePath,
    PointFieldSpec,
    SignalLaw,
    Stream,
    SwitchPath,
    TimeGrid,
    sample_bridge,
    sample_switch_path,
    state_probabilities,
    substream,
)
from .infoflow import (
    ComplementarySummary,
    EffectiveState,
    InfoSystemPath,
    SourceSpec,
    build_info_path,
    complementary_summary,
    effective_state,
    mix_projection,
    simulate_info_path,
)
from .filter import (
    JumpContext,
    JumpLaw,
    MultiFactorSpec,
    PosteriorMeasure,
    jump_context,
    jump_size_law,
    kernel_h,
    multi_factor_posterior,
    posterior,
    posterior_full,
)
from .dynamics import DynamicsPath, EventLedger, build_dynamics, euler_reconstruct, feynman_kac_residual
from .pricing import CallSpec, DiscountCurve, call_price, critical_value, mc_call_price, price_process_value
from .asymmetry import AgentView, asymmetry_path, kl_symmetric, simulate_asymmetry_path

__version__ = "0.1.0"
