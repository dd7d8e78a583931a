"""Secret-key rate evaluation, finite and asymptotic.

The rate per pulse is

    R = p_x^2 { <e^-mu> Y_X0 + <mu e^-mu> Y_X1 [1 - H2(e_p)]
                - <Q_X H2(E_X)>
                - (<Q_X>/l_raw) [6 log2(chi/eps_sec) + log2(2/eps_cor)] }

clamped below at zero; the last bracket is dropped in asymptotic mode.
eps_sec is tied to the final key length by eps_sec = kappa * l_final with
l_final = R s_x / (p_x^2 <Q_X>), which is circular; it is resolved by plain
fixed-point iteration starting from l_final = s_x.
"""

import math
from dataclasses import dataclass

import numpy as np

from .bounds import BoundSet, ObservedStats, bound_set
from .channel import exact_stats
from .polysym import binary_entropy
from .profiles import IntensityProfile, ProtocolParams

__all__ = ["key_rate", "self_consistent_rate", "asymptotic_rate", "evaluate_rate", "RateResult"]

_FIXED_POINT_RTOL = 1e-10
_FIXED_POINT_MAX_ITER = 100


@dataclass
class RateResult:
    """Outcome of a rate evaluation.

    ``status`` is one of ``ok``, ``degenerate`` (yield bounds collapsed to
    zero, rate 0), ``ill_gamma`` (no valid phase-error inflation exists,
    rate 0) or ``max_iterations`` (fixed point not converged; the last
    iterate is reported).
    """

    rate: float
    eps_sec: float
    final_length: float
    converged: bool
    iterations: int
    status: str = "ok"
    bounds: BoundSet | None = None


def _error_correction_term(profile: IntensityProfile, stats: ObservedStats) -> float:
    """<Q_X H2(E_X)> with E = QE/Q (zero-gain intensities contribute 0)."""
    total = 0.0
    for p, q, qe in zip(profile.probabilities, stats.q_x, stats.qe_x):
        if q > 0.0:
            total += p * q * binary_entropy(min(1.0, qe / q))
    return total


def key_rate(
    profile: IntensityProfile,
    params: ProtocolParams,
    bounds: BoundSet,
    stats: ObservedStats,
    eps_sec: float = math.nan,
) -> float:
    """Evaluate the rate formula for given bounds; NaN e_p yields 0."""
    if math.isnan(bounds.e_p):
        return 0.0
    exp_mean = profile.expectation(lambda mu: math.exp(-mu))
    mu_exp_mean = profile.expectation(lambda mu: mu * math.exp(-mu))
    r = (
        exp_mean * bounds.y_x0
        + mu_exp_mean * bounds.y_x1 * (1.0 - binary_entropy(bounds.e_p))
        - _error_correction_term(profile, stats)
    )
    if not params.asymptotic:
        if not 0.0 < eps_sec < 1.0:
            raise ValueError(f"finite mode needs eps_sec in (0, 1), got {eps_sec}")
        chi_k = params.chi(profile.k)
        leak = 6.0 * math.log2(chi_k / eps_sec) + math.log2(2.0 / params.eps_cor)
        r -= stats.mean_gain(profile.probabilities, "X") / params.s_x * leak
    return max(0.0, profile.p_x**2 * r)


def self_consistent_rate(
    profile: IntensityProfile,
    params: ProtocolParams,
    source,
) -> RateResult:
    """Finite-key rate at the self-consistent eps_sec = kappa * l_final.

    Starts from l_final = s_x and alternates
    eps_sec -> fluctuation radii -> bounds -> rate -> l_final until the
    rate changes by less than 1e-10 relative (at most 100 iterations).
    A zero rate is absorbing and reported with final_length 0.
    """
    if params.asymptotic:
        raise ValueError("self_consistent_rate requires finite mode")
    chi_k = params.chi(profile.k)
    ell = params.s_x
    r_prev = None
    eps = params.kappa * ell
    for it in range(1, _FIXED_POINT_MAX_ITER + 1):
        eps = params.kappa * ell
        stats = exact_stats(source, profile, params, eps)
        bs = bound_set(stats, profile, eps / chi_k, asymptotic=False)
        if math.isnan(bs.e_p):
            status = "ill_gamma" if bs.ill_gamma else "degenerate"
            return RateResult(0.0, eps, 0.0, True, it, status, bs)
        r = key_rate(profile, params, bs, stats, eps)
        if r == 0.0:
            return RateResult(0.0, eps, 0.0, True, it, "ok", bs)
        ell = r * params.s_x / (profile.p_x**2 * stats.mean_gain(profile.probabilities, "X"))
        if r_prev is not None and abs(r - r_prev) <= _FIXED_POINT_RTOL * r_prev:
            return RateResult(r, eps, ell, True, it, "ok", bs)
        r_prev = r
    return RateResult(r, eps, ell, False, _FIXED_POINT_MAX_ITER, "max_iterations", bs)


def asymptotic_rate(profile: IntensityProfile, params: ProtocolParams, source) -> RateResult:
    """Infinite-key rate: zero fluctuation radii, e_p = e_Z1, no leak term."""
    if not params.asymptotic:
        params = ProtocolParams(
            s_x=params.s_x if math.isfinite(params.s_x) else 1e9,
            eps_cor=params.eps_cor,
            kappa=params.kappa,
            chi_policy=params.chi_policy,
            mode="asymptotic",
        )
    stats = exact_stats(source, profile, params, None)
    bs = bound_set(stats, profile, asymptotic=True)
    if math.isnan(bs.e_p):
        return RateResult(0.0, 0.0, 0.0, True, 1, "degenerate", bs)
    r = key_rate(profile, params, bs, stats)
    return RateResult(r, 0.0, math.inf, True, 1, "ok", bs)


def evaluate_rate(profile: IntensityProfile, params: ProtocolParams, source) -> RateResult:
    """Dispatch on the protocol mode."""
    if params.asymptotic:
        return asymptotic_rate(profile, params, source)
    return self_consistent_rate(profile, params, source)
