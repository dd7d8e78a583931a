"""Unit tests for the symmetric-polynomial / inversion layer.

Expected values marked "frozen" were computed once with mpmath at 50
digits; brute-force oracles (subset enumeration, exact matrix products)
live next to the functions they check.
"""

import itertools
import math

import numpy as np
import pytest

from decoyrate.polysym import (
    binary_entropy,
    c1_closed_form,
    c_coefficient,
    complete_homogeneous,
    elementary_symmetric,
    m_inverse_entry,
    m_inverse_row,
    poisson_weight,
    poisson_weights,
    s_im,
)

# Table-1 intensity sets, used by the sign sweeps
CASE_INTENSITIES = [
    (0.66, 0.05, 1e-6),
    (0.8, 0.1, 1e-6),
    (0.8, 0.5, 0.35, 1e-6),
    (1.0, 0.67, 0.33, 1e-6),
    (0.8, 0.65, 0.5, 0.35, 1e-6),
    (1.0, 0.75, 0.5, 0.1, 1e-6),
    (1.0, 0.8, 0.65, 0.5, 0.35, 1e-6),
    (1.0, 0.8, 0.6, 0.4, 0.2, 1e-6),
]


def random_separated(rng, k, lo=0.02, hi=1.4, gap=0.06):
    while True:
        vals = np.sort(rng.uniform(lo, hi, size=k))[::-1]
        if np.min(-np.diff(vals)) >= gap:
            return tuple(vals)


def brute_elementary(values, degree):
    return sum(math.prod(c) for c in itertools.combinations(values, degree))


def brute_homogeneous(values, degree):
    return sum(
        math.prod(c) for c in itertools.combinations_with_replacement(values, degree)
    )


class TestBinaryEntropy:
    def test_endpoints(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0

    def test_maximum(self):
        assert binary_entropy(0.5) == 1.0

    def test_frozen_value(self):
        # mpmath, 50 digits
        assert binary_entropy(0.11) == pytest.approx(0.49991595816452799564, rel=1e-15)

    def test_symmetry(self):
        for x in np.linspace(0.01, 0.49, 25):
            assert binary_entropy(x) == pytest.approx(binary_entropy(1 - x), rel=1e-14)

    @pytest.mark.parametrize("bad", [-0.1, 1.1, 2.0])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            binary_entropy(bad)


class TestElementarySymmetric:
    def test_example(self):
        assert elementary_symmetric([1, 2, 3], 2) == pytest.approx(11.0, rel=1e-15)

    def test_degree_zero(self):
        assert elementary_symmetric([0.3, 0.7, 0.9], 0) == 1.0
        assert elementary_symmetric([], 0) == 1.0

    def test_degree_exceeds_length(self):
        assert elementary_symmetric([0.5, 0.25], 3) == 0.0

    def test_against_brute_force(self):
        rng = np.random.default_rng(101)
        for _ in range(50):
            n = rng.integers(1, 9)
            vals = rng.uniform(0, 2, size=n).tolist()
            for d in range(n + 2):
                ref = brute_elementary(vals, d)
                got = elementary_symmetric(vals, d)
                assert got == pytest.approx(ref, rel=1e-14, abs=1e-300)

    def test_negative_degree(self):
        with pytest.raises(ValueError):
            elementary_symmetric([1.0], -1)


class TestCompleteHomogeneous:
    def test_against_brute_force(self):
        rng = np.random.default_rng(55)
        for _ in range(30):
            n = rng.integers(1, 6)
            vals = rng.uniform(0, 1.2, size=n).tolist()
            for d in range(6):
                ref = brute_homogeneous(vals, d)
                assert complete_homogeneous(vals, d) == pytest.approx(ref, rel=1e-13, abs=1e-300)

    def test_degree_zero(self):
        assert complete_homogeneous([0.4], 0) == 1.0


class TestSim:
    def test_two_intensities(self):
        # removing the second (zero) intensity leaves {1}; degree k-m-1 = 1
        assert s_im((1.0, 0.0), i=1, m=0) == pytest.approx(1.0)

    def test_degree_zero_case(self):
        assert s_im((1.0, 0.5, 0.1), i=0, m=2) == 1.0
        assert s_im((1.0, 0.5, 0.1), i=2, m=2) == 1.0

    def test_product_case(self):
        assert s_im((1.0, 0.5, 0.1), i=0, m=0) == pytest.approx(0.05, rel=1e-15)

    def test_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            k = int(rng.integers(2, 7))
            vals = random_separated(rng, k)
            for i in range(k):
                for m in range(k):
                    rest = [v for t, v in enumerate(vals) if t != i]
                    ref = brute_elementary(rest, k - m - 1)
                    assert s_im(vals, i, m) == pytest.approx(ref, rel=1e-13)

    def test_index_errors(self):
        with pytest.raises(IndexError):
            s_im((1.0, 0.5), i=2, m=0)
        with pytest.raises(ValueError):
            s_im((1.0, 0.5), i=0, m=2)


def mixing_matrix(values):
    k = len(values)
    return np.array(
        [[values[i] ** j / math.factorial(j) for j in range(k)] for i in range(k)]
    )


class TestMInverse:
    def test_single_intensity(self):
        assert m_inverse_entry((0.5,), m=0, i=0) == pytest.approx(1.0)

    def test_two_intensities_explicit(self):
        vals = (1.0, 0.0)
        assert m_inverse_entry(vals, m=0, i=0) == pytest.approx(0.0, abs=1e-15)
        assert m_inverse_entry(vals, m=0, i=1) == pytest.approx(1.0)
        assert m_inverse_entry(vals, m=1, i=0) == pytest.approx(1.0)
        assert m_inverse_entry(vals, m=1, i=1) == pytest.approx(-1.0)

    def test_identity_product(self):
        rng = np.random.default_rng(13)
        for k in range(2, 7):
            for _ in range(20):
                vals = random_separated(rng, k)
                minv = np.vstack([m_inverse_row(vals, m) for m in range(k)])
                err = np.abs(minv @ mixing_matrix(vals) - np.eye(k)).max()
                assert err <= 1e-9

    def test_sign_rule(self):
        # sign((Minv)_{m+1,i}) = (-1)**(k-m-i) with 1-based i
        rng = np.random.default_rng(17)
        for k in range(2, 7):
            for _ in range(10):
                vals = random_separated(rng, k, lo=0.05)
                for m in range(k):
                    for i in range(k):
                        entry = m_inverse_entry(vals, m, i)
                        expected = (-1.0) ** (k - m - (i + 1))
                        assert math.copysign(1.0, entry) == expected

    def test_degenerate(self):
        with pytest.raises(ZeroDivisionError):
            m_inverse_entry((0.5, 0.5), m=0, i=0)


class TestCCoefficient:
    def test_zero_when_least_intensity_zero(self):
        assert c_coefficient((1.0, 0.0), m=0, j=2) == pytest.approx(0.0, abs=1e-15)

    def test_explicit_value(self):
        # C_{1,2} for (0.5, 0.25): (1/2!) * mu1 * mu2 * h_0 = 0.0625
        assert c_coefficient((0.5, 0.25), m=0, j=2) == pytest.approx(0.0625, rel=1e-12)

    def test_sign_parity(self):
        rng = np.random.default_rng(23)
        sets = list(CASE_INTENSITIES)
        for k in range(2, 7):
            for _ in range(10):
                sets.append(random_separated(rng, k, lo=0.03))
        for vals in sets:
            k = len(vals)
            for j in range(k, k + 11):
                c1 = c_coefficient(vals, 0, j)
                c2 = c_coefficient(vals, 1, j)
                if k % 2 == 0:
                    assert c1 >= 0.0
                    assert c2 < 0.0
                else:
                    assert c1 <= 0.0
                    assert c2 > 0.0
                if min(vals) > 0:
                    assert c1 != 0.0

    def test_preconditions(self):
        with pytest.raises(ValueError):
            c_coefficient((0.5, 0.25), m=0, j=1)
        with pytest.raises(ValueError):
            c_coefficient((0.5, 0.25), m=2, j=3)


class TestC1ClosedForm:
    def test_explicit_value(self):
        # (1/3!) * 0.5*0.25 * (0.5+0.25) = 0.015625
        assert c1_closed_form((0.5, 0.25), 3) == pytest.approx(0.015625, rel=1e-12)

    def test_j_equals_k(self):
        vals = (0.9, 0.4, 0.1)
        expected = -0.9 * 0.4 * 0.1 / math.factorial(3)
        assert c1_closed_form(vals, 3) == pytest.approx(expected, rel=1e-13)

    def test_zero_intensity(self):
        assert c1_closed_form((0.7, 0.2, 0.0), 5) == 0.0

    def test_matches_direct_evaluation(self):
        rng = np.random.default_rng(29)
        sets = list(CASE_INTENSITIES)
        for k in range(2, 7):
            for _ in range(10):
                sets.append(random_separated(rng, k, lo=0.03))
        for vals in sets:
            k = len(vals)
            for j in range(k, k + 11):
                direct = c_coefficient(vals, 0, j)
                closed = c1_closed_form(vals, j)
                assert closed == pytest.approx(direct, rel=1e-10, abs=1e-18)


class TestPoissonWeight:
    def test_vacuum_source(self):
        assert poisson_weight(0.0, 0) == 1.0
        assert poisson_weight(0.0, 3) == 0.0

    def test_frozen_value(self):
        assert poisson_weight(1.0, 2) == pytest.approx(0.1839397205857211608, rel=1e-14)

    @pytest.mark.parametrize("mu", [0.3, 1.0, 1.5])
    def test_normalization(self, mu):
        assert poisson_weights(mu, 60).sum() == pytest.approx(1.0, abs=1e-14)

    def test_log_space_branch_continuous(self):
        # m=20 uses the exact branch, m=21 the lgamma branch
        mu = 1.3
        ratio = poisson_weight(mu, 21) / (poisson_weight(mu, 20) * mu / 21)
        assert ratio == pytest.approx(1.0, rel=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            poisson_weight(-0.1, 0)
        with pytest.raises(ValueError):
            poisson_weight(0.5, -1)
