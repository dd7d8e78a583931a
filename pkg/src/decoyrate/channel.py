"""Ground-truth channels and the exact statistics they induce.

Two channel sources are supported: the 100 km fiber model (affine gain and
error-gain in the intensity) and random per-photon-number channels with
uniform yields and error rates.  Observation noise itself is never sampled;
finite-size effects are charged entirely through the Hoeffding radii, so
the "observed" gains are the exact model values.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bounds import ObservedStats, hoeffding_delta_error_gain, hoeffding_delta_gain
from .polysym import poisson_weights
from .profiles import IntensityProfile, ProtocolParams

__all__ = [
    "FiberChannelModel",
    "ChannelTruth",
    "SamplerConfig",
    "sample_random_channel",
    "exact_stats",
    "channel_truth_to_dict",
    "channel_truth_from_dict",
]

# Poisson tail above this order contributes < 1e-15 to any gain for mu <= 1.5
M_MAX_DEFAULT = 30


@dataclass(frozen=True)
class FiberChannelModel:
    """Affine gain model of a dedicated 100 km fiber system.

    Q(mu)  = (1 + p_ap) (2 p_dc + eta_sys mu)
    QE(mu) = (1 + p_ap) p_dc + (e_mis eta_ch + p_ap eta_sys / 2) mu

    valid for 0 <= mu <= 1 (evaluating outside warns).  Defaults are the
    reference parameter set: after-pulse probability 4e-2, dark count
    probability 6e-7, optical misalignment 5e-3, fiber and system
    transmittances 1e-2 and 1e-3.
    """

    p_ap: float = 4e-2
    p_dc: float = 6e-7
    e_mis: float = 5e-3
    eta_ch: float = 1e-2
    eta_sys: float = 1e-3

    def __post_init__(self):
        for name in ("p_ap", "p_dc", "e_mis", "eta_ch", "eta_sys"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def _check_mu(self, mu: float):
        if mu < 0:
            raise ValueError(f"intensity must be >= 0, got {mu}")
        if mu > 1.0:
            warnings.warn(
                f"fiber model evaluated at mu={mu:g} outside its stated range [0, 1]",
                stacklevel=3,
            )

    def gain(self, mu: float) -> float:
        self._check_mu(mu)
        return min(1.0, (1.0 + self.p_ap) * (2.0 * self.p_dc + self.eta_sys * mu))

    def error_gain(self, mu: float) -> float:
        self._check_mu(mu)
        val = (1.0 + self.p_ap) * self.p_dc + (
            self.e_mis * self.eta_ch + self.p_ap * self.eta_sys / 2.0
        ) * mu
        return min(val, self.gain(mu))


@dataclass
class ChannelTruth:
    """Per-photon-number yields and error rates for both bases.

    Yields Y_{B,m} and error rates e_{B,m} for m = 0..m_max.  e_{B,0} must
    be 1/2 (a vacuum detection is a coin flip).  Orders above m_max are
    treated as zero; with m_max >= 30 their Poisson weight at mu <= 1.5 is
    below 1e-15, so truncation is invisible at double precision.
    """

    y_x: np.ndarray
    y_z: np.ndarray
    e_x: np.ndarray
    e_z: np.ndarray

    def __post_init__(self):
        for name in ("y_x", "y_z", "e_x", "e_z"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.y_x)
        if any(len(getattr(self, name)) != n for name in ("y_z", "e_x", "e_z")):
            raise ValueError("yield and error arrays must share one length")
        if self.m_max < M_MAX_DEFAULT:
            warnings.warn(
                f"m_max={self.m_max} < {M_MAX_DEFAULT}: Poisson truncation error "
                "may exceed 1e-15",
                stacklevel=2,
            )
        for y in (self.y_x, self.y_z):
            if np.any(y < 0) or np.any(y > 1):
                raise ValueError("yields must lie in [0, 1]")
        for e in (self.e_x, self.e_z):
            if np.any(e < 0) or np.any(e > 0.5):
                raise ValueError("error rates must lie in [0, 1/2]")
            if e[0] != 0.5:
                raise ValueError(f"e_B0 must equal 1/2, got {e[0]}")

    @property
    def m_max(self) -> int:
        return len(self.y_x) - 1

    def _arrays(self, basis: str):
        if basis == "X":
            return self.y_x, self.e_x
        if basis == "Z":
            return self.y_z, self.e_z
        raise ValueError(f"basis must be 'X' or 'Z', got {basis!r}")

    def gain(self, mu: float, basis: str) -> float:
        y, _ = self._arrays(basis)
        return float(np.dot(poisson_weights(mu, self.m_max), y))

    def error_gain(self, mu: float, basis: str) -> float:
        y, e = self._arrays(basis)
        return float(np.dot(poisson_weights(mu, self.m_max), y * e))


@dataclass(frozen=True)
class SamplerConfig:
    """Uniform channel sampler: Y ~ U[0, y_max], e ~ U[0, e_max], e_B0 = 1/2."""

    y_max: float = 0.1
    e_max: float = 0.01
    seed: int = 0
    n_samples: int = 1000
    m_max: int = M_MAX_DEFAULT

    def __post_init__(self):
        if not 0.0 < self.y_max <= 1.0:
            raise ValueError(f"y_max must be in (0, 1], got {self.y_max}")
        if not 0.0 < self.e_max <= 0.5:
            raise ValueError(f"e_max must be in (0, 1/2], got {self.e_max}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


def _sample_stream(seed: int, index: int) -> np.random.Generator:
    # counter-based Philox keyed by (seed, sample index): independent,
    # order-free streams, so parallel and serial sampling agree exactly
    key = (seed & (2**64 - 1)) | (index << 64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_uniform_block(config: SamplerConfig, index: int) -> np.ndarray:
    """Raw uniforms for sample `index`: rows y_x, y_z, e_x, e_z."""
    rng = _sample_stream(config.seed, index)
    return rng.random((4, config.m_max + 1))


def sample_random_channel(config: SamplerConfig, index: int) -> ChannelTruth:
    """Deterministic channel draw for (config.seed, index)."""
    u = sample_uniform_block(config, index)
    y_x = config.y_max * u[0]
    y_z = config.y_max * u[1]
    e_x = config.e_max * u[2]
    e_z = config.e_max * u[3]
    e_x[0] = 0.5
    e_z[0] = 0.5
    return ChannelTruth(y_x=y_x, y_z=y_z, e_x=e_x, e_z=e_z)


def exact_stats(
    source,
    profile: IntensityProfile,
    params: ProtocolParams,
    eps_sec: float | None = None,
) -> ObservedStats:
    """Observed statistics induced by a channel, with Hoeffding radii.

    ``source`` is a :class:`FiberChannelModel` (identical gains in both
    bases) or a :class:`ChannelTruth`.  In asymptotic mode (or when
    eps_sec is None) all radii are zero; otherwise each observable gets
    its radius at failure probability eps_sec / chi(k).
    """
    mus = profile.intensities.values
    k = len(mus)
    if isinstance(source, FiberChannelModel):
        q = np.array([source.gain(mu) for mu in mus])
        qe = np.array([source.error_gain(mu) for mu in mus])
        q_x, q_z, qe_x, qe_z = q, q.copy(), qe, qe.copy()
    elif isinstance(source, ChannelTruth):
        q_x = np.array([source.gain(mu, "X") for mu in mus])
        q_z = np.array([source.gain(mu, "Z") for mu in mus])
        qe_x = np.array([source.error_gain(mu, "X") for mu in mus])
        qe_z = np.array([source.error_gain(mu, "Z") for mu in mus])
    else:
        raise TypeError(f"unsupported channel source {type(source).__name__}")

    s_x = params.s_x
    s_z = profile.sifted_z_count(s_x) if math.isfinite(s_x) else math.inf
    zeros = np.zeros(k)
    stats = ObservedStats(
        q_x=q_x, q_z=q_z, qe_x=qe_x, qe_z=qe_z,
        dq_x=zeros.copy(), dq_z=zeros.copy(),
        dqe_x=zeros.copy(), dqe_z=zeros.copy(),
        s_x=s_x, s_z=s_z,
    )
    if params.asymptotic or eps_sec is None:
        return stats

    fail = eps_sec / params.chi(k)
    probs = profile.probabilities
    qbar_x = stats.mean_gain(probs, "X")
    qbar_z = stats.mean_gain(probs, "Z")
    qebar_x = stats.mean_error_product(probs, "X")
    qebar_z = stats.mean_error_product(probs, "Z")
    for i in range(k):
        stats.dq_x[i] = hoeffding_delta_gain(profile, qbar_x, i, s_x, fail)
        stats.dq_z[i] = hoeffding_delta_gain(profile, qbar_z, i, s_z, fail)
        stats.dqe_x[i] = hoeffding_delta_error_gain(profile, qbar_x, qebar_x, i, s_x, fail)
        stats.dqe_z[i] = hoeffding_delta_error_gain(profile, qbar_z, qebar_z, i, s_z, fail)
    return stats


def channel_truth_to_dict(truth: ChannelTruth) -> dict:
    """JSON-ready record; inverse of :func:`channel_truth_from_dict`."""
    return {
        "m_max": truth.m_max,
        "y_x": truth.y_x.tolist(),
        "y_z": truth.y_z.tolist(),
        "e_x": truth.e_x.tolist(),
        "e_z": truth.e_z.tolist(),
    }


def channel_truth_from_dict(record: dict) -> ChannelTruth:
    truth = ChannelTruth(
        y_x=record["y_x"], y_z=record["y_z"], e_x=record["e_x"], e_z=record["e_z"]
    )
    if "m_max" in record and record["m_max"] != truth.m_max:
        raise ValueError(
            f"m_max={record['m_max']} inconsistent with arrays of length {truth.m_max + 1}"
        )
    return truth
