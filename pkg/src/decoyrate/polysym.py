"""Exact-formula numerics behind the photon-number decomposition.

The observed gain at intensity mu mixes the per-photon-number yields with
Poisson weights.  Restricted to k intensities, the mixing matrix
``M[i, j] = mu_i**j / j!`` (j = 0..k-1) is Vandermonde-like and has an
explicit inverse built from elementary symmetric polynomials.  This module
provides those building blocks plus the truncation coefficients that weight
the unknown yields of photon number >= k after inversion.

Everything here is a pure function; nothing holds state.
"""

import math
from typing import Sequence

import numpy as np

__all__ = [
    "binary_entropy",
    "elementary_symmetric",
    "complete_homogeneous",
    "s_im",
    "m_inverse_entry",
    "m_inverse_row",
    "c_coefficient",
    "c1_closed_form",
    "poisson_weight",
    "poisson_weights",
]

# factorials above this size go through lgamma to dodge overflow
_EXACT_FACTORIAL_MAX = 20


def binary_entropy(x: float) -> float:
    """Shannon entropy of a bit with bias x, in bits.

    Uses the limit convention 0*log2(0) = 0.  Raises ValueError outside
    [0, 1].
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy requires 0 <= x <= 1, got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -(x * math.log2(x) + (1.0 - x) * math.log2(1.0 - x))


def elementary_symmetric(values: Sequence[float], degree: int) -> float:
    """Sum over all size-`degree` subsets of the product of their elements.

    Computed with the add-one-variable recurrence
    ``e_d(x_1..x_n) = e_d(x_1..x_{n-1}) + x_n * e_{d-1}(x_1..x_{n-1})``,
    which has no cancellation for non-negative inputs.  degree 0 gives 1,
    degree > len(values) gives 0.
    """
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    e = [1.0] + [0.0] * degree
    top = 0
    for x in values:
        top = min(top + 1, degree)
        for d in range(top, 0, -1):
            e[d] += x * e[d - 1]
    return e[degree]


def complete_homogeneous(values: Sequence[float], degree: int) -> float:
    """Sum of all degree-`degree` monomials in the given variables.

    Same incremental recurrence as :func:`elementary_symmetric` but with
    repetition allowed (ascending inner loop reuses the current variable).
    """
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    if not values:
        return 1.0 if degree == 0 else 0.0
    h = [1.0] + [0.0] * degree
    for x in values:
        for d in range(1, degree + 1):
            h[d] += x * h[d - 1]
    return h[degree]


def s_im(intensities: Sequence[float], i: int, m: int) -> float:
    """Elementary symmetric polynomial of the intensities without entry i.

    `i` is a 0-based index; the degree is k - m - 1 as required by the
    explicit inverse-matrix entries.
    """
    k = len(intensities)
    if not 0 <= i < k:
        raise IndexError(f"intensity index {i} out of range for k={k}")
    if not 0 <= m <= k - 1:
        raise ValueError(f"m must be in [0, {k - 1}], got {m}")
    rest = [v for t, v in enumerate(intensities) if t != i]
    return elementary_symmetric(rest, k - m - 1)


def _factorial(n: int) -> float:
    if n <= _EXACT_FACTORIAL_MAX:
        return float(math.factorial(n))
    return math.exp(math.lgamma(n + 1))


def m_inverse_entry(intensities: Sequence[float], m: int, i: int) -> float:
    """Entry (m+1, i+1) of the inverse mixing matrix.

    The mixing matrix is ``M[i, j] = mu_i**j / j!`` over the given
    intensities.  The explicit inverse entry is

        (-1)**(k-m-1) * S_im * m! / prod_{t != i} (mu_i - mu_t)

    whose sign is (-1)**(k-m-i) for strictly decreasing non-negative
    intensities (0-based i makes that ``(-1)**(k-m-i-1)`` here).
    """
    k = len(intensities)
    if not 0 <= i < k:
        raise IndexError(f"intensity index {i} out of range for k={k}")
    if not 0 <= m <= k - 1:
        raise ValueError(f"m must be in [0, {k - 1}], got {m}")
    mu_i = intensities[i]
    den = 1.0
    for t, mu_t in enumerate(intensities):
        if t == i:
            continue
        diff = mu_i - mu_t
        if diff == 0.0:
            raise ZeroDivisionError(
                f"degenerate intensities: mu[{i}] == mu[{t}] == {mu_i}"
            )
        den *= diff
    sign = -1.0 if (k - m - 1) % 2 else 1.0
    return sign * s_im(intensities, i, m) * _factorial(m) / den


def m_inverse_row(intensities: Sequence[float], m: int) -> np.ndarray:
    """Row m+1 of the inverse mixing matrix as an array over i."""
    return np.array(
        [m_inverse_entry(intensities, m, i) for i in range(len(intensities))]
    )


def c_coefficient(intensities: Sequence[float], m: int, j: int) -> float:
    """Truncation coefficient C_{m+1,j} weighting the photon-number-j yield.

    After inverting the k-intensity system, the yield of photon number m
    picks up ``sum_{j>=k} C_{m+1,j} Y_j`` from the dropped high orders,
    with ``C_{m+1,j} = -sum_i Minv[m, i] * mu_i**j / j!``.  For strictly
    decreasing non-negative intensities the sign of C_{1j} (C_{2j}) is
    +/- (-/+) for even/odd k.
    """
    k = len(intensities)
    if j < k:
        raise ValueError(f"j must be >= k={k}, got {j}")
    if not 0 <= m <= k - 1:
        raise ValueError(f"m must be in [0, {k - 1}], got {m}")
    jfact = _factorial(j)
    total = 0.0
    for i, mu in enumerate(intensities):
        total += m_inverse_entry(intensities, m, i) * mu**j
    return -total / jfact


def c1_closed_form(intensities: Sequence[float], j: int) -> float:
    """Closed form of C_{1j}: (-1)**k / j! * prod(mu) * h_{j-k}(mu).

    ``h_d`` is the complete homogeneous symmetric polynomial.  Serves as an
    independent cross-check of :func:`c_coefficient` at m=0; it vanishes
    exactly when the least intensity is zero.
    """
    k = len(intensities)
    if j < k:
        raise ValueError(f"j must be >= k={k}, got {j}")
    prod = 1.0
    for mu in intensities:
        prod *= mu
    sign = 1.0 if k % 2 == 0 else -1.0
    return sign * prod * complete_homogeneous(intensities, j - k) / _factorial(j)


def poisson_weight(mu: float, m: int) -> float:
    """Probability that a pulse of mean photon number mu carries m photons."""
    if mu < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mu}")
    if m < 0:
        raise ValueError(f"photon count must be >= 0, got {m}")
    if mu == 0.0:
        return 1.0 if m == 0 else 0.0
    if m <= _EXACT_FACTORIAL_MAX:
        return mu**m * math.exp(-mu) / math.factorial(m)
    return math.exp(m * math.log(mu) - mu - math.lgamma(m + 1))


def poisson_weights(mu: float, m_max: int) -> np.ndarray:
    """Poisson probabilities for photon numbers 0..m_max as an array."""
    return np.array([poisson_weight(mu, m) for m in range(m_max + 1)])
