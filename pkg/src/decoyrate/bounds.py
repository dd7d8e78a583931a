"""One-sided estimates of vacuum/single-photon yields and error rates.

Given observed per-intensity gains and error-gain products, the k-intensity
inversion yields:

* lower bounds on the vacuum and single-photon yields Y_{B,0}, Y_{B,1},
* an upper bound on the Z-basis single-photon error product Y_{Z,1} e_{Z,1},
* and from those an upper bound on the phase error rate e_p.

Each bound inverts the Poisson mixing system restricted to a subset of the
intensities chosen so that zero-filling the unknown high-photon-number
yields errs on the safe side (the truncation coefficients of an even-size
subset are >= 0 for the m=0 row and < 0 for the m=1 row, and vice versa for
odd sizes).  Finite-sample fluctuations enter through per-observable
Hoeffding radii, applied with the worst-case sign for each inversion entry.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .polysym import m_inverse_row
from .profiles import IntensityProfile

__all__ = [
    "ObservedStats",
    "BoundSet",
    "hoeffding_delta_gain",
    "hoeffding_delta_error_gain",
    "subset_for_yield",
    "subset_for_error_product",
    "bound_coefficients",
    "generalized_yield_lower",
    "generalized_error_product_upper",
    "baseline_bounds",
    "gamma_bar",
    "phase_error_upper",
    "bound_set",
    "PhaseErrorResult",
]


@dataclass
class ObservedStats:
    """Per-intensity observed statistics for both bases, with Hoeffding radii.

    Arrays are indexed like the profile's intensities.  ``dq_*``/``dqe_*``
    are the one-sided fluctuation radii (all zero in asymptotic mode).
    """

    q_x: np.ndarray
    q_z: np.ndarray
    qe_x: np.ndarray
    qe_z: np.ndarray
    dq_x: np.ndarray
    dq_z: np.ndarray
    dqe_x: np.ndarray
    dqe_z: np.ndarray
    s_x: float
    s_z: float

    def __post_init__(self):
        for name in ("q_x", "q_z", "qe_x", "qe_z", "dq_x", "dq_z", "dqe_x", "dqe_z"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        for q, qe in ((self.q_x, self.qe_x), (self.q_z, self.qe_z)):
            if np.any(q < 0) or np.any(q > 1):
                raise ValueError("gains must lie in [0, 1]")
            if np.any(qe < 0) or np.any(qe > q + 1e-15):
                raise ValueError("error products must lie in [0, gain]")
        for d in (self.dq_x, self.dq_z, self.dqe_x, self.dqe_z):
            if np.any(d < 0):
                raise ValueError("fluctuation radii must be non-negative")

    def gains(self, basis: str) -> np.ndarray:
        return self.q_x if basis == "X" else self.q_z

    def error_products(self, basis: str) -> np.ndarray:
        return self.qe_x if basis == "X" else self.qe_z

    def gain_deltas(self, basis: str) -> np.ndarray:
        return self.dq_x if basis == "X" else self.dq_z

    def mean_gain(self, probabilities, basis: str) -> float:
        return float(np.dot(probabilities, self.gains(basis)))

    def mean_error_product(self, probabilities, basis: str) -> float:
        return float(np.dot(probabilities, self.error_products(basis)))


@dataclass
class BoundSet:
    """The estimated quantities feeding the key-rate formula.

    Lower bounds on the yields, upper bounds on the error quantities.
    ``e_z1``/``e_p`` are NaN until :func:`phase_error_upper` fills them and
    stay NaN when the estimate is undefined (y_z1 == 0 or an ill-defined
    inflation term).
    """

    y_x0: float
    y_x1: float
    y_z0: float
    y_z1: float
    y1e1_z: float
    e_z1: float = math.nan
    e_p: float = math.nan
    # True when e_p is NaN because gamma_bar's log argument was <= 1
    # (as opposed to degenerate yield bounds)
    ill_gamma: bool = False

    def __post_init__(self):
        for name in ("y_x0", "y_x1", "y_z0", "y_z1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 <= self.y1e1_z <= 0.5:
            raise ValueError(f"y1e1_z must lie in [0, 1/2], got {self.y1e1_z}")


def hoeffding_delta_gain(
    profile: IntensityProfile,
    mean_gain: float,
    intensity_index: int,
    s_b: float,
    failure_prob: float,
) -> float:
    """Hoeffding radius on the gain observed at one intensity.

    ``mean_gain`` is the intensity-averaged gain <Q_B> of the same basis;
    ``failure_prob`` is the per-observable budget (callers pass
    eps_sec / chi(k)).
    """
    p = profile.probabilities[intensity_index]
    if p <= 0:
        raise ValueError("intensity probability must be positive")
    if s_b <= 0:
        raise ValueError(f"sample count must be positive, got {s_b}")
    if not 0.0 < failure_prob < 1.0:
        raise ValueError(f"failure probability must be in (0, 1), got {failure_prob}")
    return mean_gain / p * math.sqrt(math.log(1.0 / failure_prob) / (2.0 * s_b))


def hoeffding_delta_error_gain(
    profile: IntensityProfile,
    mean_gain: float,
    mean_error_gain: float,
    intensity_index: int,
    s_z: float,
    failure_prob: float,
) -> float:
    """Hoeffding radius on the error-gain product at one intensity."""
    p = profile.probabilities[intensity_index]
    if p <= 0:
        raise ValueError("intensity probability must be positive")
    if s_z <= 0:
        raise ValueError(f"sample count must be positive, got {s_z}")
    if not 0.0 < failure_prob < 1.0:
        raise ValueError(f"failure probability must be in (0, 1), got {failure_prob}")
    if mean_error_gain < 0 or mean_error_gain > mean_gain + 1e-15:
        raise ValueError("mean error product must lie in [0, mean gain]")
    return math.sqrt(
        mean_gain * mean_error_gain * math.log(1.0 / failure_prob) / (2.0 * s_z)
    ) / p


def subset_for_yield(k: int, m: int) -> range:
    """Indices of the intensities used for the Y_{B,m} lower bound.

    m=0 takes the smallest even-size tail (2*floor(k/2) intensities); m=1
    the smallest odd-size tail (2*floor((k-1)/2)+1).  Exception: at k=2 the
    odd rule would leave a single intensity, from which no m=1 row exists,
    so both intensities are used.  That solves the 2x2 system exactly but
    is only an estimate, not a one-sided bound, when yields of photon
    number >= 2 are present.
    """
    if m == 0:
        size = 2 * (k // 2)
    elif m == 1:
        size = 2 * ((k - 1) // 2) + 1 if k >= 3 else 2
    else:
        raise ValueError(f"only m in {{0, 1}} is supported, got {m}")
    if size < 2:
        raise ValueError(f"subset of {size} intensities cannot bound Y_{m} (k={k})")
    return range(k - size, k)


def subset_for_error_product(k: int) -> range:
    """Indices used for the Y_{Z,1} e_{Z,1} upper bound (even-size tail)."""
    size = 2 * (k // 2)
    if size < 2:
        raise ValueError(f"subset of {size} intensities cannot bound Y1e1 (k={k})")
    return range(k - size, k)


def bound_coefficients(intensities: Sequence[float]):
    """Per-bound inversion coefficients, shared by scalar and batch paths.

    Returns a dict mapping bound name -> (subset indices, coefficient
    array) where ``coef[i] = Minv_row[i] * exp(mu_i)`` over the subset, so
    that a bound is ``sum coef * observable`` before fluctuation handling.
    """
    mus = [float(v) for v in intensities]
    k = len(mus)
    out = {}
    for name, (subset, m) in {
        "y0": (subset_for_yield(k, 0), 0),
        "y1": (subset_for_yield(k, 1), 1),
        "y1e1": (subset_for_error_product(k), 1),
    }.items():
        sub = [mus[i] for i in subset]
        row = m_inverse_row(sub, m)
        coef = row * np.exp(sub)
        out[name] = (np.array(subset, dtype=np.intp), coef)
    return out


def _worst_case_lower(coef, values, deltas):
    worst = values - np.sign(coef) * deltas
    return float(np.dot(coef, worst))


def _worst_case_upper(coef, values, deltas):
    worst = values + np.sign(coef) * deltas
    return float(np.dot(coef, worst))


def generalized_yield_lower(
    stats: ObservedStats,
    intensities: Sequence[float],
    m: int,
    basis: str,
) -> float:
    """Lower bound on Y_{B,m}, m in {0, 1}, from the subset inversion.

    Fluctuations are applied per entry with the harmful sign:
    Q -> Q - sign(entry) * dQ, which attains the minimum over the whole
    fluctuation box.  The result is clamped to [0, 1].
    """
    mus = [float(v) for v in intensities]
    k = len(mus)
    subset = subset_for_yield(k, m)
    idx = np.array(subset, dtype=np.intp)
    row = m_inverse_row([mus[i] for i in subset], m)
    coef = row * np.exp([mus[i] for i in subset])
    value = _worst_case_lower(coef, stats.gains(basis)[idx], stats.gain_deltas(basis)[idx])
    return min(1.0, max(0.0, value))


def generalized_error_product_upper(
    stats: ObservedStats,
    intensities: Sequence[float],
) -> float:
    """Upper bound on Y_{Z,1} e_{Z,1}; clamped to [0, 1/2]."""
    mus = [float(v) for v in intensities]
    k = len(mus)
    subset = subset_for_error_product(k)
    idx = np.array(subset, dtype=np.intp)
    row = m_inverse_row([mus[i] for i in subset], 1)
    coef = row * np.exp([mus[i] for i in subset])
    value = _worst_case_upper(coef, stats.qe_z[idx], stats.dqe_z[idx])
    return min(0.5, max(0.0, value))


# --- three-intensity closed forms -----------------------------------------
#
# The li/lo helpers stay numpy-broadcastable: the error studies evaluate
# them over whole channel batches.


def baseline_y0(q2, q3, d2, d3, mu2, mu3):
    """Closed-form Y_{B,0} lower bound from the two weakest intensities."""
    num = mu2 * (q3 - d3) * np.exp(mu3) - mu3 * (q2 + d2) * np.exp(mu2)
    return np.clip(num / (mu2 - mu3), 0.0, 1.0)


def baseline_y1e1(qe2, qe3, de2, de3, mu2, mu3):
    """Closed-form Y_{Z,1} e_{Z,1} upper bound from the two weakest intensities."""
    num = (qe2 + de2) * np.exp(mu2) - (qe3 - de3) * np.exp(mu3)
    return np.clip(num / (mu2 - mu3), 0.0, 0.5)


def baseline_y1(q1, q2, q3, d1, d2, d3, mu1, mu2, mu3):
    """Closed-form Y_{B,1} lower bound with the Y_{B,0} bound substituted.

    The vacuum-yield bound is substituted algebraically and the fluctuation
    radii are then applied with the worst-case sign of each collapsed gain
    coefficient (valid under mu1 > mu2 + mu3: the net signs are -, +, -
    for Q1, Q2, Q3).  Applying the radii before collapsing would charge
    d3 twice with opposite signs and give a strictly looser bound.
    """
    pref = mu1 / (mu1 * (mu2 - mu3) - mu2**2 + mu3**2)
    w1 = q1 + d1
    w2 = q2 - d2
    w3 = q3 + d3
    y0 = (mu2 * w3 * np.exp(mu3) - mu3 * w2 * np.exp(mu2)) / (mu2 - mu3)
    inner = (
        w2 * np.exp(mu2)
        - w3 * np.exp(mu3)
        + (mu2**2 - mu3**2) * (y0 - w1 * np.exp(mu1)) / mu1**2
    )
    return np.clip(pref * inner, 0.0, 1.0)


def baseline_bounds(stats: ObservedStats, intensities: Sequence[float]) -> BoundSet:
    """Three-intensity bounds (Y0, Y1 per basis; Y1e1 in Z).

    Requires exactly three intensities with mu1 > mu2 + mu3.  The phase
    error fields are left unset; use :func:`phase_error_upper` to fill
    them.
    """
    mus = [float(v) for v in intensities]
    if len(mus) != 3:
        raise ValueError(f"baseline bounds need exactly 3 intensities, got {len(mus)}")
    mu1, mu2, mu3 = mus
    if not mu1 > mu2 + mu3:
        raise ValueError(
            f"baseline bounds require mu1 > mu2 + mu3 ({mu1} <= {mu2} + {mu3})"
        )

    def per_basis(q, dq):
        y0 = baseline_y0(q[1], q[2], dq[1], dq[2], mu2, mu3)
        y1 = baseline_y1(q[0], q[1], q[2], dq[0], dq[1], dq[2], mu1, mu2, mu3)
        return float(y0), float(y1)

    y_x0, y_x1 = per_basis(stats.q_x, stats.dq_x)
    y_z0, y_z1 = per_basis(stats.q_z, stats.dq_z)
    y1e1 = float(
        baseline_y1e1(
            stats.qe_z[1], stats.qe_z[2], stats.dqe_z[1], stats.dqe_z[2], mu2, mu3
        )
    )
    return BoundSet(y_x0=y_x0, y_x1=y_x1, y_z0=y_z0, y_z1=y_z1, y1e1_z=y1e1)


# --- phase error -----------------------------------------------------------


def gamma_bar(a: float, b: float, c: float, d: float) -> float:
    """Finite-size inflation added to e_{Z,1} to bound the phase error rate.

        sqrt( (c+d)(1-b)b / (cd) * ln[ (c+d) / (2 pi c d (1-b) b a^2) ] )

    Returns NaN when the logarithm's argument is <= 1: no valid inflation
    exists at failure probability ``a`` and callers must treat the
    configuration as yielding zero key.
    """
    if not 0.0 < a < 1.0:
        raise ValueError(f"failure probability a must be in (0, 1), got {a}")
    if not 0.0 < b < 1.0:
        raise ValueError(f"error rate b must be in (0, 1), got {b}")
    if c <= 0 or d <= 0:
        raise ValueError(f"counts must be positive, got c={c}, d={d}")
    v = (c + d) * (1.0 - b) * b / (c * d)
    arg = (c + d) / (2.0 * math.pi * c * d * (1.0 - b) * b * a * a)
    if arg <= 1.0:
        return math.nan
    return math.sqrt(v * math.log(arg))


class PhaseErrorResult(NamedTuple):
    e_z1: float
    e_p: float
    ill_gamma: bool


def phase_error_upper(
    bounds: BoundSet,
    profile: IntensityProfile,
    stats: ObservedStats,
    failure_prob: float,
    asymptotic: bool = False,
) -> PhaseErrorResult:
    """Upper-bound the phase error rate of single-photon raw-key events.

    e_Z1 is the ratio of the error-product upper bound to the Y_{Z,1}
    lower bound (clamped to 1/2); finitely many samples inflate it by
    gamma_bar evaluated with the *lower* yield bounds in the count
    arguments (smaller counts -> larger inflation -> conservative).  In
    asymptotic mode e_p equals e_Z1.

    Degenerate bounds (y_z1 == 0, or y_x1 == 0 in finite mode) yield NaN
    with ``ill_gamma=False``; an ill-defined gamma_bar yields NaN with
    ``ill_gamma=True``.
    """
    if bounds.y_z1 <= 0.0:
        return PhaseErrorResult(math.nan, math.nan, False)
    e_z1 = min(0.5, bounds.y1e1_z / bounds.y_z1)
    if asymptotic:
        return PhaseErrorResult(e_z1, e_z1, False)
    if e_z1 == 0.0:
        # b -> 0 limit of gamma_bar is 0
        return PhaseErrorResult(e_z1, 0.0, False)
    if bounds.y_x1 <= 0.0:
        return PhaseErrorResult(e_z1, math.nan, False)
    mu_exp = profile.expectation(lambda mu: mu * math.exp(-mu))
    qbar_z = stats.mean_gain(profile.probabilities, "Z")
    qbar_x = stats.mean_gain(profile.probabilities, "X")
    c = stats.s_z * bounds.y_z1 * mu_exp / qbar_z
    d = stats.s_x * bounds.y_x1 * mu_exp / qbar_x
    g = gamma_bar(failure_prob, e_z1, c, d)
    if math.isnan(g):
        return PhaseErrorResult(e_z1, math.nan, True)
    return PhaseErrorResult(e_z1, min(0.5, e_z1 + g), False)


def bound_set(
    stats: ObservedStats,
    profile: IntensityProfile,
    failure_prob: float = math.nan,
    asymptotic: bool = False,
) -> BoundSet:
    """Full generalized BoundSet including the phase error fields."""
    mus = profile.intensities.values
    bs = BoundSet(
        y_x0=generalized_yield_lower(stats, mus, 0, "X"),
        y_x1=generalized_yield_lower(stats, mus, 1, "X"),
        y_z0=generalized_yield_lower(stats, mus, 0, "Z"),
        y_z1=generalized_yield_lower(stats, mus, 1, "Z"),
        y1e1_z=generalized_error_product_upper(stats, mus),
    )
    res = phase_error_upper(bs, profile, stats, failure_prob, asymptotic=asymptotic)
    bs.e_z1 = res.e_z1
    bs.e_p = res.e_p
    bs.ill_gamma = res.ill_gamma
    return bs
