"""Finite-key secret-key rates for decoy-state BB84 with k >= 2 intensities.

The pipeline: a channel (fiber model or explicit per-photon-number truth)
induces observed gains; the k-intensity Vandermonde-structured inversion
turns those into one-sided yield and error bounds with Hoeffding
fluctuation handling; the rate formula with self-consistent secrecy
budgeting turns the bounds into a key rate.  Monte Carlo studies and a
profile optimizer sit on top, behind a compiled kernel with a numpy
fallback.
"""

from .backend import backend_name
from .bounds import (
    BoundSet,
    ObservedStats,
    baseline_bounds,
    bound_set,
    gamma_bar,
    generalized_error_product_upper,
    generalized_yield_lower,
    hoeffding_delta_error_gain,
    hoeffding_delta_gain,
    phase_error_upper,
)
from .channel import (
    ChannelTruth,
    FiberChannelModel,
    SamplerConfig,
    channel_truth_from_dict,
    channel_truth_to_dict,
    exact_stats,
    sample_random_channel,
)
from .experiments import (
    CASES,
    CaseDefinition,
    StudyResult,
    average_key_rate,
    baseline_error_study,
    generalized_error_study,
)
from .keyrate import RateResult, asymptotic_rate, evaluate_rate, key_rate, self_consistent_rate
from .optimize import OptimizationResult, optimize_profile
from .polysym import (
    binary_entropy,
    c1_closed_form,
    c_coefficient,
    elementary_symmetric,
    m_inverse_entry,
    poisson_weight,
    s_im,
)
from .profiles import (
    CHI_BASELINE,
    CHI_GENERAL,
    IntensityProfile,
    IntensitySet,
    ProtocolParams,
    chi,
    intensity_expectation,
)

__version__ = "0.1.0"
