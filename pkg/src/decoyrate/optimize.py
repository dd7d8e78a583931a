"""Derivative-free optimization of the decoy configuration.

The search space (strictly decreasing intensities with a pinned minimum,
a probability simplex, and a basis bias in (0, 1)) is mapped to an
unconstrained vector: log-gaps between consecutive intensities, softmax
logits for the probabilities, and a logit for the basis bias.  Nelder-Mead
with random restarts then runs on the transformed space; the rate surface
has clamp kinks, so a simplex method is a safer choice than anything
gradient-based.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize as sciopt

from . import backend
from .channel import FiberChannelModel
from .keyrate import RateResult, evaluate_rate
from .mc import CaseTables, prepare_deterministic, run_deterministic, unclamped_first_iterate
from .profiles import IntensityProfile, ProtocolParams

__all__ = ["OptimizationResult", "optimize_profile", "MU_MIN_DEFAULT", "MU_CAP_DEFAULT"]

MU_MIN_DEFAULT = 1e-6
# default cap: the fiber model's stated validity range tops out at mu = 1;
# the hard domain limit 1.5 stays reachable through the mu_cap argument
MU_CAP_DEFAULT = 1.0
MU_DOMAIN_MAX = 1.5
_K_RANGE = (2, 6)


@dataclass
class OptimizationResult:
    profile: IntensityProfile
    rate: float
    rate_result: RateResult
    restarts: int
    best_restart: int
    restart_rates: list
    n_evaluations: int


def _decode(theta: np.ndarray, k: int, mu_min: float):
    gaps = np.exp(theta[: k - 1])
    mus = np.append(mu_min + np.cumsum(gaps[::-1])[::-1], mu_min)
    logits = np.concatenate([theta[k - 1 : 2 * k - 2], [0.0]])
    logits = logits - logits.max()
    probs = np.exp(logits)
    probs = probs / probs.sum()
    p_x = 1.0 / (1.0 + math.exp(-theta[-1]))
    return mus, probs, p_x


def _encode(mus, probs, p_x, mu_min: float) -> np.ndarray:
    mus = np.asarray(mus, dtype=float)
    full = np.append(mus, mu_min)
    z = np.log(full[:-1] - full[1:])
    logits = np.log(np.asarray(probs, dtype=float))
    logits = logits[:-1] - logits[-1]
    return np.concatenate([z, logits, [math.log(p_x / (1.0 - p_x))]])


def _random_start(rng: np.random.Generator, k: int, mu_min: float, mu_cap: float):
    top = min(1.2, mu_cap)
    while True:
        mus = np.sort(rng.uniform(0.05, top, size=k - 1))[::-1]
        full = np.append(mus, mu_min)
        if np.min(full[:-1] - full[1:]) >= 0.02:
            break
    probs = rng.dirichlet(np.full(k, 2.0))
    probs = np.maximum(probs, 1e-3)
    probs = probs / probs.sum()
    p_x = rng.uniform(0.55, 0.95)
    return _encode(mus, probs, p_x, mu_min)


def _structured_starts(k: int, mu_min: float, mu_cap: float):
    """Deterministic seeds: evenly spaced intensities, signal-heavy picks."""
    starts = []
    for top in (0.3, 0.6, min(1.0, mu_cap)):
        mus = np.linspace(top, 0.05, k - 1)
        probs = np.full(k, 0.5 / (k - 1))
        probs[0] = 0.5
        for p_x in (0.8, 0.92):
            starts.append(_encode(mus, probs, p_x, mu_min))
    return starts


def optimize_profile(
    channel,
    k: int,
    params: ProtocolParams,
    mu_min: float = MU_MIN_DEFAULT,
    mu_cap: float = MU_CAP_DEFAULT,
    restarts: int = 20,
    seed: int = 0,
    maxiter: int | None = None,
) -> OptimizationResult:
    """Maximize the key rate over intensities, probabilities and p_x.

    The smallest intensity stays pinned at ``mu_min``; the largest must not
    exceed ``mu_cap``.  ``restarts`` independent Nelder-Mead runs are
    seeded from random feasible points and the winner gets one polishing
    run.  The returned rate is re-evaluated from the returned profile, so
    it reproduces exactly.
    """
    if not _K_RANGE[0] <= k <= _K_RANGE[1]:
        raise ValueError(f"k must lie in {_K_RANGE}, got {k}")
    if restarts < 1:
        raise ValueError("at least one restart is required")
    if not mu_min < mu_cap <= MU_DOMAIN_MAX:
        raise ValueError(
            f"need mu_min < mu_cap <= {MU_DOMAIN_MAX}, got [{mu_min}, {mu_cap}]"
        )
    dim = 2 * k - 1
    rng = np.random.default_rng(seed)
    evals = 0

    impl = backend.get_impl()
    fast_path = isinstance(channel, FiberChannelModel)

    def objective(theta) -> float:
        nonlocal evals
        evals += 1
        mus, probs, p_x = _decode(np.asarray(theta), k, mu_min)
        if not np.all(np.isfinite(mus)):
            return 2.0
        if mus[0] > mu_cap:
            return 1.0 + (mus[0] - mu_cap)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            profile = IntensityProfile(mus, probs, p_x)
            if fast_path:
                tables = CaseTables.build(profile, 0, with_weights=False)
                q = np.array([channel.gain(mu) for mu in mus])
                qe = np.array([channel.error_gain(mu) for mu in mus])
                chunk = prepare_deterministic(tables, q, qe)
                rate, _ = run_deterministic(tables, chunk, params, impl)
                if rate > 0.0:
                    return -rate
                # keep a slope in the clamped-to-zero region
                proxy = unclamped_first_iterate(tables, chunk, params)
            else:
                result = evaluate_rate(profile, params, channel)
                if result.rate > 0.0:
                    return -result.rate
                proxy = -1.0
        return 1e-9 + max(0.0, -proxy)

    options = {
        "maxiter": maxiter or 400 * dim,
        "xatol": 1e-6,
        "fatol": 1e-13,
        "adaptive": True,
    }
    best_theta = None
    best_val = math.inf
    best_restart = -1
    restart_rates = []
    structured = _structured_starts(k, mu_min, mu_cap)
    for r in range(restarts):
        theta0 = structured[r] if r < len(structured) else _random_start(rng, k, mu_min, mu_cap)
        res = sciopt.minimize(objective, theta0, method="Nelder-Mead", options=options)
        restart_rates.append(-res.fun if res.fun < 0 else 0.0)
        if res.fun < best_val:
            best_val = res.fun
            best_theta = res.x
            best_restart = r
    # polish the winner
    res = sciopt.minimize(objective, best_theta, method="Nelder-Mead", options=options)
    if res.fun < best_val:
        best_val = res.fun
        best_theta = res.x

    mus, probs, p_x = _decode(np.asarray(best_theta), k, mu_min)
    profile = IntensityProfile(mus, probs, p_x)  # gap warnings surface here
    rate_result = evaluate_rate(profile, params, channel)
    return OptimizationResult(
        profile=profile,
        rate=rate_result.rate,
        rate_result=rate_result,
        restarts=restarts,
        best_restart=best_restart,
        restart_rates=restart_rates,
        n_evaluations=evals,
    )
