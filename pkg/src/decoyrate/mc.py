"""Batch Monte Carlo evaluation of self-consistent key rates.

The per-sample work splits into a vectorized preparation stage (mixing the
sampled yields into gains, and collapsing each bound into an affine
function ``A - sqrt(ln(chi/eps)) * B`` of the iteration-dependent secrecy
budget) and a fixed-point iteration stage.  The iteration stage is the hot
kernel: it runs either in the compiled extension or in the numpy fallback
selected in :mod:`decoyrate.backend`.

Sample i of a batch is a pure function of (seed, i), so chunked or
threaded execution returns bit-identical arrays.
"""

import concurrent.futures
import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .bounds import bound_coefficients
from .channel import SamplerConfig, sample_uniform_block
from .polysym import poisson_weights
from .profiles import IntensityProfile, ProtocolParams

__all__ = ["CaseTables", "run_batch", "STATUS_OK", "STATUS_DEGENERATE", "STATUS_ILL_GAMMA", "STATUS_MAX_ITER"]

STATUS_OK = 0
STATUS_DEGENERATE = 1
STATUS_ILL_GAMMA = 2
STATUS_MAX_ITER = 3

_CHUNK = 8192
_FIXED_POINT_RTOL = 1e-10
_FIXED_POINT_MAX_ITER = 100


@dataclass
class CaseTables:
    """Per-profile constants reused across all samples of a study."""

    profile: IntensityProfile
    m_max: int
    weights: np.ndarray       # (k, m_max+1) Poisson weights per intensity
    probs: np.ndarray         # (k,)
    exp_mean: float           # <exp(-mu)>
    mu_exp_mean: float        # <mu exp(-mu)>
    idx_y0: np.ndarray
    coef_y0: np.ndarray
    idx_y1: np.ndarray
    coef_y1: np.ndarray
    idx_e1: np.ndarray
    coef_e1: np.ndarray
    gsum_y0: float            # sum |coef| / p over the subset
    gsum_y1: float
    gsum_e1: float

    @classmethod
    def build(cls, profile: IntensityProfile, m_max: int, with_weights: bool = True) -> "CaseTables":
        mus = profile.intensities.values
        probs = np.asarray(profile.probabilities)
        weights = (
            np.vstack([poisson_weights(mu, m_max) for mu in mus]) if with_weights else None
        )
        coefs = bound_coefficients(mus)
        idx_y0, coef_y0 = coefs["y0"]
        idx_y1, coef_y1 = coefs["y1"]
        idx_e1, coef_e1 = coefs["y1e1"]
        return cls(
            profile=profile,
            m_max=m_max,
            weights=weights,
            probs=probs,
            exp_mean=profile.expectation(lambda mu: math.exp(-mu)),
            mu_exp_mean=profile.expectation(lambda mu: mu * math.exp(-mu)),
            idx_y0=idx_y0,
            coef_y0=coef_y0,
            idx_y1=idx_y1,
            coef_y1=coef_y1,
            idx_e1=idx_e1,
            coef_e1=coef_e1,
            gsum_y0=float(np.sum(np.abs(coef_y0) / probs[idx_y0])),
            gsum_y1=float(np.sum(np.abs(coef_y1) / probs[idx_y1])),
            gsum_e1=float(np.sum(np.abs(coef_e1) / probs[idx_e1])),
        )


def _binary_entropy_arr(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    mask = (x > 0.0) & (x < 1.0)
    xm = x[mask]
    out[mask] = -(xm * np.log2(xm) + (1.0 - xm) * np.log2(1.0 - xm))
    return out


def prepare_chunk(tables: CaseTables, sampler: SamplerConfig, lo: int, hi: int) -> dict:
    """Affine bound pieces and per-sample scalars for samples [lo, hi)."""
    n = hi - lo
    m1 = tables.m_max + 1
    u = np.empty((n, 4, m1))
    for j in range(n):
        u[j] = sample_uniform_block(sampler, lo + j)
    y_x = sampler.y_max * u[:, 0, :]
    y_z = sampler.y_max * u[:, 1, :]
    e_x = sampler.e_max * u[:, 2, :]
    e_z = sampler.e_max * u[:, 3, :]
    e_x[:, 0] = 0.5
    e_z[:, 0] = 0.5

    wt = tables.weights.T                    # (m_max+1, k)
    q_x = y_x @ wt
    q_z = y_z @ wt
    qe_x = (y_x * e_x) @ wt
    qe_z = (y_z * e_z) @ wt

    qbar_x = q_x @ tables.probs
    qbar_z = q_z @ tables.probs
    qebar_z = qe_z @ tables.probs

    with np.errstate(divide="ignore", invalid="ignore"):
        err_x = np.where(q_x > 0.0, np.minimum(1.0, qe_x / q_x), 0.0)
    ec = (q_x * _binary_entropy_arr(err_x)) @ tables.probs

    return {
        "a_x0": q_x[:, tables.idx_y0] @ tables.coef_y0,
        "a_x1": q_x[:, tables.idx_y1] @ tables.coef_y1,
        "a_z1": q_z[:, tables.idx_y1] @ tables.coef_y1,
        "a_e1": qe_z[:, tables.idx_e1] @ tables.coef_e1,
        "qbar_x": qbar_x,
        "qbar_z": qbar_z,
        "qebar_z": qebar_z,
        "ec": ec,
        "truth_y_x1": y_x[:, 1],
        "truth_y_z1": y_z[:, 1],
        "truth_y1e1_z": y_z[:, 1] * e_z[:, 1],
        "truth_y_x0": y_x[:, 0],
        "truth_y_z0": y_z[:, 0],
    }


def _kernel_args(tables: CaseTables, chunk: dict, params: ProtocolParams):
    profile = tables.profile
    s_x = params.s_x
    asymptotic = params.asymptotic or math.isinf(s_x)
    if asymptotic:
        s_x = s_z = math.inf
        b_x0 = b_x1 = b_z1 = b_e1 = np.zeros_like(chunk["a_x0"])
    else:
        s_z = profile.sifted_z_count(s_x)
        b_x0 = chunk["qbar_x"] * (tables.gsum_y0 / math.sqrt(2.0 * s_x))
        b_x1 = chunk["qbar_x"] * (tables.gsum_y1 / math.sqrt(2.0 * s_x))
        b_z1 = chunk["qbar_z"] * (tables.gsum_y1 / math.sqrt(2.0 * s_z))
        b_e1 = np.sqrt(chunk["qbar_z"] * chunk["qebar_z"]) * (
            tables.gsum_e1 / math.sqrt(2.0 * s_z)
        )
    return dict(
        a_x0=np.ascontiguousarray(chunk["a_x0"]),
        b_x0=np.ascontiguousarray(b_x0),
        a_x1=np.ascontiguousarray(chunk["a_x1"]),
        b_x1=np.ascontiguousarray(b_x1),
        a_z1=np.ascontiguousarray(chunk["a_z1"]),
        b_z1=np.ascontiguousarray(b_z1),
        a_e1=np.ascontiguousarray(chunk["a_e1"]),
        b_e1=np.ascontiguousarray(b_e1),
        qbar_x=np.ascontiguousarray(chunk["qbar_x"]),
        qbar_z=np.ascontiguousarray(chunk["qbar_z"]),
        ec=np.ascontiguousarray(chunk["ec"]),
        exp_mean=tables.exp_mean,
        mu_exp_mean=tables.mu_exp_mean,
        p_x=profile.p_x,
        s_x=s_x,
        s_z=s_z,
        eps_cor=params.eps_cor,
        kappa=params.kappa,
        chi_val=float(params.chi(profile.k)),
        asymptotic=asymptotic,
        max_iter=_FIXED_POINT_MAX_ITER,
        rtol=_FIXED_POINT_RTOL,
    )


def prepare_deterministic(tables: CaseTables, q_x, qe_x, q_z=None, qe_z=None) -> dict:
    """Single-sample chunk from explicit per-intensity gains.

    Used for deterministic channels (the fiber model gives the same gains
    in both bases); shares the downstream kernel with the Monte Carlo
    path.
    """
    q_x = np.asarray(q_x, dtype=float).reshape(1, -1)
    qe_x = np.asarray(qe_x, dtype=float).reshape(1, -1)
    q_z = q_x if q_z is None else np.asarray(q_z, dtype=float).reshape(1, -1)
    qe_z = qe_x if qe_z is None else np.asarray(qe_z, dtype=float).reshape(1, -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.where(q_x > 0.0, np.minimum(1.0, qe_x / q_x), 0.0)
    ec = (q_x * _binary_entropy_arr(err)) @ tables.probs
    return {
        "a_x0": q_x[:, tables.idx_y0] @ tables.coef_y0,
        "a_x1": q_x[:, tables.idx_y1] @ tables.coef_y1,
        "a_z1": q_z[:, tables.idx_y1] @ tables.coef_y1,
        "a_e1": qe_z[:, tables.idx_e1] @ tables.coef_e1,
        "qbar_x": q_x @ tables.probs,
        "qbar_z": q_z @ tables.probs,
        "qebar_z": qe_z @ tables.probs,
        "ec": ec,
    }


def unclamped_first_iterate(tables: CaseTables, chunk: dict, params: ProtocolParams) -> float:
    """Rate expression without the zero clamp at eps_sec = kappa * s_x.

    Negative values grade how infeasible a configuration is; the profile
    optimizer uses this as a search signal where the true rate clamps to
    zero.  Undefined phase error maps to -1.
    """
    args = _kernel_args(tables, chunk, params)
    eps = params.kappa * params.s_x
    if not args["asymptotic"] and eps >= args["chi_val"]:
        return -1.0
    sq = 0.0 if args["asymptotic"] else math.sqrt(math.log(args["chi_val"] / eps))
    yx0 = min(1.0, max(0.0, float(args["a_x0"][0] - sq * args["b_x0"][0])))
    yx1 = min(1.0, max(0.0, float(args["a_x1"][0] - sq * args["b_x1"][0])))
    yz1 = min(1.0, max(0.0, float(args["a_z1"][0] - sq * args["b_z1"][0])))
    y1e1 = min(0.5, max(0.0, float(args["a_e1"][0] + sq * args["b_e1"][0])))
    if yz1 <= 0.0:
        return -1.0
    e1 = min(0.5, y1e1 / yz1)
    if args["asymptotic"]:
        ep = e1
    elif e1 == 0.0:
        ep = 0.0
    else:
        if yx1 <= 0.0:
            return -1.0
        c = args["s_z"] * yz1 * tables.mu_exp_mean / float(args["qbar_z"][0])
        d = args["s_x"] * yx1 * tables.mu_exp_mean / float(args["qbar_x"][0])
        fail = eps / args["chi_val"]
        arg = (c + d) / (2.0 * math.pi * c * d * (1.0 - e1) * e1 * fail * fail)
        if arg <= 1.0:
            return -1.0
        ep = min(0.5, e1 + math.sqrt((c + d) * (1.0 - e1) * e1 / (c * d) * math.log(arg)))
    h = 0.0 if ep <= 0.0 or ep >= 1.0 else -(ep * math.log2(ep) + (1 - ep) * math.log2(1 - ep))
    r = tables.exp_mean * yx0 + tables.mu_exp_mean * yx1 * (1.0 - h) - float(args["ec"][0])
    if not args["asymptotic"]:
        leak = 6.0 * math.log2(args["chi_val"] / eps) + math.log2(2.0 / params.eps_cor)
        r -= float(args["qbar_x"][0]) / args["s_x"] * leak
    return tables.profile.p_x**2 * r


def run_deterministic(tables: CaseTables, chunk: dict, params: ProtocolParams, impl=None):
    """Kernel-backed rate for a single deterministic-channel chunk."""
    if impl is None:
        impl = backend.get_impl()
    rate = np.zeros(1)
    status = np.zeros(1, dtype=np.int8)
    args = _kernel_args(tables, chunk, params)
    impl.iterate_rates(out_rate=rate, out_status=status, **args)
    return float(rate[0]), int(status[0])


def run_batch(
    tables: CaseTables,
    sampler: SamplerConfig,
    params: ProtocolParams,
    threads: int = 1,
    impl=None,
):
    """Rates and statuses for all samples of the sampler configuration.

    The sample axis is processed in fixed-size chunks; with ``threads > 1``
    chunks run concurrently, writing into disjoint slices, so the result
    does not depend on the thread count.
    """
    if impl is None:
        impl = backend.get_impl()
    n = sampler.n_samples
    rates = np.zeros(n)
    status = np.zeros(n, dtype=np.int8)

    def work(lo: int, hi: int):
        chunk = prepare_chunk(tables, sampler, lo, hi)
        args = _kernel_args(tables, chunk, params)
        impl.iterate_rates(out_rate=rates[lo:hi], out_status=status[lo:hi], **args)

    spans = [(lo, min(lo + _CHUNK, n)) for lo in range(0, n, _CHUNK)]
    if threads <= 1 or len(spans) == 1:
        for lo, hi in spans:
            work(lo, hi)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda span: work(*span), spans))
    return rates, status
