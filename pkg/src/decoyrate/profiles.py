"""Decoy configurations and protocol parameters."""

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

__all__ = [
    "MIN_GAP_DEFAULT",
    "IntensitySet",
    "IntensityProfile",
    "ProtocolParams",
    "chi",
    "intensity_expectation",
    "CHI_GENERAL",
    "CHI_BASELINE",
]

# Intensities closer than this lose precision in the 1/(mu_i - mu_t)
# denominators; construction warns but does not refuse.
MIN_GAP_DEFAULT = 0.05

CHI_GENERAL = "general"
CHI_BASELINE = "baseline"

_PROB_SUM_TOL = 1e-12


@dataclass(frozen=True)
class IntensitySet:
    """Strictly decreasing mean photon numbers mu_1 > ... > mu_k >= 0."""

    values: tuple
    min_gap: float = MIN_GAP_DEFAULT

    def __init__(self, values: Sequence[float], min_gap: float = MIN_GAP_DEFAULT):
        object.__setattr__(self, "values", tuple(float(v) for v in values))
        object.__setattr__(self, "min_gap", float(min_gap))
        vals = self.values
        if not vals:
            raise ValueError("at least one intensity is required")
        if any(v < 0 for v in vals):
            raise ValueError(f"intensities must be non-negative, got {vals}")
        for a, b in zip(vals, vals[1:]):
            if not a > b:
                raise ValueError(f"intensities must be strictly decreasing, got {vals}")
        gaps = [a - b for a, b in zip(vals, vals[1:])]
        if gaps and min(gaps) < self.min_gap:
            warnings.warn(
                f"intensity gap {min(gaps):.4g} below {self.min_gap:g}; "
                "inversion may lose precision",
                stacklevel=2,
            )

    @property
    def k(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


@dataclass(frozen=True)
class IntensityProfile:
    """Intensity set plus the probabilities Alice uses to pick from it."""

    intensities: IntensitySet
    probabilities: tuple
    p_x: float

    def __init__(
        self,
        intensities,
        probabilities: Sequence[float],
        p_x: float,
        min_gap: float = MIN_GAP_DEFAULT,
    ):
        if not isinstance(intensities, IntensitySet):
            intensities = IntensitySet(intensities, min_gap=min_gap)
        probs = tuple(float(p) for p in probabilities)
        object.__setattr__(self, "intensities", intensities)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "p_x", float(p_x))
        if len(probs) != intensities.k:
            raise ValueError(
                f"{len(probs)} probabilities for {intensities.k} intensities"
            )
        if any(p <= 0 for p in probs):
            raise ValueError(f"intensity probabilities must be positive, got {probs}")
        if abs(sum(probs) - 1.0) > _PROB_SUM_TOL:
            raise ValueError(f"intensity probabilities must sum to 1, got {sum(probs)!r}")
        if not 0.0 < self.p_x < 1.0:
            raise ValueError(f"basis bias p_x must be in (0, 1), got {p_x}")

    @property
    def k(self) -> int:
        return self.intensities.k

    def expectation(self, f: Callable[[float], float]) -> float:
        """<f(mu)> = sum_n p_n f(mu_n)."""
        return sum(p * f(mu) for p, mu in zip(self.probabilities, self.intensities))

    def sifted_z_count(self, s_x: float) -> float:
        """Z-basis sifted count implied by the basis bias and s_x."""
        return (1.0 - self.p_x) ** 2 * s_x / self.p_x**2


def intensity_expectation(profile: IntensityProfile, f) -> float:
    return profile.expectation(f)


def chi(k: int, policy: str = CHI_GENERAL) -> int:
    """Number of failure-probability budget items charged against eps_sec.

    ``general``  -> 9 + (4k - 2), the accounting for the subset bounds
                    (2 * even subset + 2 * odd subset observables, plus 9
                    scheme-level items).
    ``baseline`` -> the legacy three-intensity accounting, 21 (k=3 only).
    """
    if k < 2:
        raise ValueError(f"need at least two intensities, got k={k}")
    if policy == CHI_GENERAL:
        return 9 + 4 * k - 2
    if policy == CHI_BASELINE:
        if k != 3:
            raise ValueError(f"baseline chi accounting is defined for k=3 only, got k={k}")
        return 21
    raise ValueError(f"unknown chi policy {policy!r}")


@dataclass(frozen=True)
class ProtocolParams:
    """Finite-key protocol knobs.

    s_x is the raw sifted key length (bits); eps_cor the correctness
    failure probability; kappa the secrecy leakage per final secret bit
    (eps_sec = kappa * l_final at the self-consistent point).
    """

    s_x: float = 1e9
    eps_cor: float = 1e-15
    kappa: float = 1e-15
    chi_policy: str = CHI_GENERAL
    mode: str = "finite"

    def __post_init__(self):
        if self.mode not in ("finite", "asymptotic"):
            raise ValueError(f"mode must be 'finite' or 'asymptotic', got {self.mode!r}")
        if self.mode == "finite":
            if not self.s_x >= 1:
                raise ValueError(f"s_x must be >= 1, got {self.s_x}")
            if math.isinf(self.s_x):
                raise ValueError("finite mode needs a finite s_x")
        if not 0.0 < self.eps_cor < 1.0:
            raise ValueError(f"eps_cor must be in (0, 1), got {self.eps_cor}")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError(f"kappa must be in (0, 1), got {self.kappa}")

    @property
    def asymptotic(self) -> bool:
        return self.mode == "asymptotic"

    def chi(self, k: int) -> int:
        return chi(k, self.chi_policy)
