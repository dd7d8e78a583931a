"""Profile, parameter and budget-count tests."""

import math

import pytest

from decoyrate.profiles import (
    CHI_BASELINE,
    CHI_GENERAL,
    IntensityProfile,
    IntensitySet,
    ProtocolParams,
    chi,
    intensity_expectation,
)


class TestIntensitySet:
    def test_basic(self):
        s = IntensitySet((0.8, 0.4, 0.1))
        assert s.k == 3
        assert list(s) == [0.8, 0.4, 0.1]

    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            IntensitySet((0.4, 0.8))
        with pytest.raises(ValueError):
            IntensitySet((0.4, 0.4))

    def test_non_negative(self):
        with pytest.raises(ValueError):
            IntensitySet((0.4, -0.1))

    def test_gap_warning(self):
        with pytest.warns(UserWarning, match="gap"):
            IntensitySet((0.5, 0.47))

    def test_no_warning_for_wide_gaps(self, recwarn):
        IntensitySet((0.5, 0.4, 0.1))
        assert len(recwarn) == 0

    def test_configurable_gap(self, recwarn):
        IntensitySet((0.5, 0.47), min_gap=0.01)
        assert len(recwarn) == 0


class TestIntensityProfile:
    def test_validation(self):
        with pytest.raises(ValueError):
            IntensityProfile((0.5, 0.1), (0.5, 0.4), 0.5)  # probs not normalized
        with pytest.raises(ValueError):
            IntensityProfile((0.5, 0.1), (1.0, 0.0), 0.5)  # zero probability
        with pytest.raises(ValueError):
            IntensityProfile((0.5, 0.1), (0.5, 0.5), 1.0)  # p_x out of range
        with pytest.raises(ValueError):
            IntensityProfile((0.5, 0.1), (0.5, 0.3, 0.2), 0.5)  # length mismatch

    def test_expectation_normalized(self):
        p = IntensityProfile((0.6, 0.2, 1e-6), (0.5, 0.25, 0.25), 0.5, min_gap=0.01)
        assert p.expectation(lambda mu: 1.0) == pytest.approx(1.0, rel=1e-15)

    def test_expectation_single(self):
        p = IntensityProfile((0.4,), (1.0,), 0.5)
        assert p.expectation(lambda mu: mu * mu) == pytest.approx(0.16, rel=1e-15)

    def test_expectation_case_a(self):
        # frozen via mpmath: <mu exp(-mu)> for (0.66, 0.05, 1e-6), equal picks
        with pytest.warns(UserWarning):
            p = IntensityProfile((0.66, 0.05, 1e-6), (1 / 3, 1 / 3, 1 / 3), 0.5)
        got = intensity_expectation(p, lambda mu: mu * math.exp(-mu))
        assert got == pytest.approx(0.12956145066285239925, rel=1e-14)

    def test_expectation_between_extremes(self):
        p = IntensityProfile((0.9, 0.5, 0.1), (0.2, 0.5, 0.3), 0.5)
        f = lambda mu: mu**3 + 1
        vals = [f(mu) for mu in p.intensities]
        assert min(vals) <= p.expectation(f) <= max(vals)

    def test_sifted_z_count(self):
        p = IntensityProfile((0.5, 0.1), (0.5, 0.5), 0.75)
        assert p.sifted_z_count(9e8) == pytest.approx((0.25 / 0.75) ** 2 * 9e8, rel=1e-14)
        p2 = IntensityProfile((0.5, 0.1), (0.5, 0.5), 0.5)
        assert p2.sifted_z_count(1e9) == pytest.approx(1e9, rel=1e-14)


class TestChi:
    def test_general_values(self):
        assert chi(3, CHI_GENERAL) == 19
        assert chi(5, CHI_GENERAL) == 27
        assert chi(2, CHI_GENERAL) == 15

    def test_baseline(self):
        assert chi(3, CHI_BASELINE) == 21

    def test_baseline_requires_k3(self):
        with pytest.raises(ValueError):
            chi(4, CHI_BASELINE)

    def test_k_too_small(self):
        with pytest.raises(ValueError):
            chi(1, CHI_GENERAL)

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            chi(3, "bogus")


class TestProtocolParams:
    def test_defaults(self):
        p = ProtocolParams()
        assert p.s_x == 1e9
        assert p.eps_cor == 1e-15
        assert p.kappa == 1e-15
        assert not p.asymptotic
        assert p.chi(3) == 19

    def test_validation(self):
        with pytest.raises(ValueError):
            ProtocolParams(s_x=0)
        with pytest.raises(ValueError):
            ProtocolParams(eps_cor=0)
        with pytest.raises(ValueError):
            ProtocolParams(kappa=1.5)
        with pytest.raises(ValueError):
            ProtocolParams(mode="sometimes")
        with pytest.raises(ValueError):
            ProtocolParams(s_x=math.inf, mode="finite")

    def test_asymptotic(self):
        p = ProtocolParams(mode="asymptotic")
        assert p.asymptotic
