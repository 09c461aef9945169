import math
from fractions import Fraction

import numpy as np
import pytest

from src.errors import ParameterError
from src.special_functions import (
    EULER_GAMMA,
    LOG_ZERO,
    bessel_ratio_A,
    digamma,
    harmonic,
    log_bessel_i,
)


def _bessel_series(order, x, terms=200):
    """Power series sum (x/2)^(2m+order) / (m! (m+order)!) in exact rationals."""
    half = Fraction(x) / 2
    total = Fraction(0)
    for m in range(terms):
        total += half ** (2 * m + order) / (math.factorial(m) * math.factorial(m + order))
    return total


class TestLogBessel:
    def test_values_at_zero(self):
        assert log_bessel_i(0, 0.0) == 0.0
        assert log_bessel_i(1, 0.0) == LOG_ZERO

    def test_matches_power_series(self):
        expected = math.log(_bessel_series(0, 10))
        assert log_bessel_i(0, 10.0) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("x", [0.5, 3.0, 25.0])
    def test_order_one_matches_power_series(self, x):
        assert log_bessel_i(1, x) == pytest.approx(math.log(_bessel_series(1, x)), rel=1e-12)

    def test_no_overflow_for_large_arguments(self):
        # log I_0(x) ~ x - log(2 pi x) / 2 + 1 / (8x)
        x = 5000.0
        value = log_bessel_i(0, x)
        assert math.isfinite(value)
        assert value == pytest.approx(x - 0.5 * math.log(2 * math.pi * x) + 1.0 / (8 * x), abs=1e-6)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ParameterError):
            log_bessel_i(2, 1.0)
        with pytest.raises(ParameterError):
            log_bessel_i(0, -1.0)
        with pytest.raises(ParameterError):
            log_bessel_i(0, math.inf)


class TestBesselRatio:
    def test_zero(self):
        assert bessel_ratio_A(0.0) == 0.0

    def test_matches_series_ratio(self):
        expected = float(_bessel_series(1, 10) / _bessel_series(0, 10))
        assert bessel_ratio_A(10.0) == pytest.approx(expected, rel=1e-10)

    @pytest.mark.parametrize("x", [0.0, 1e-6, 0.3, 1.0, 4.5, 30.0, 700.0, 1e3, 2.5e4, 1e5])
    def test_equals_exp_of_log_bessel_difference(self, x):
        ratio = math.exp(log_bessel_i(1, x) - log_bessel_i(0, x))
        assert ratio == pytest.approx(bessel_ratio_A(x), abs=1e-9)

    def test_strictly_increasing_below_one(self):
        values = [bessel_ratio_A(x) for x in np.linspace(0.0, 200.0, 400)]
        assert np.all(np.diff(values) > 0)
        assert values[-1] < 1.0
        assert bessel_ratio_A(5.0) < bessel_ratio_A(6.0)


class TestDigamma:
    def test_known_values(self):
        assert digamma(1.0) == pytest.approx(-EULER_GAMMA, abs=1e-15)
        assert digamma(2.0) == pytest.approx(1.0 - EULER_GAMMA, abs=1e-15)

    def test_half_integer(self):
        # Psi(n + 1/2) = -gamma - 2 ln 2 + sum_{j=1..n} 2 / (2j - 1)
        expected = -EULER_GAMMA - 2.0 * math.log(2.0) + sum(2.0 / (2 * j - 1) for j in range(1, 11))
        assert digamma(10.5) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("x", [0.5, 0.9, 1.0, 2.25, 7.5, 19.0, 42.7, 99.0, 100.0])
    def test_recurrence(self, x):
        assert digamma(x + 1.0) - digamma(x) == pytest.approx(1.0 / x, rel=1e-12)

    def test_rejects_non_positive(self):
        with pytest.raises(ParameterError):
            digamma(0.0)
        with pytest.raises(ParameterError):
            digamma(-2.5)


class TestHarmonic:
    @pytest.mark.parametrize("k, expected", [(1, 1.0), (2, 1.5), (10, 2.9289682539682538)])
    def test_values(self, k, expected):
        assert harmonic(k) == pytest.approx(expected, rel=1e-15)

    def test_matches_digamma_up_to_200(self):
        for k in range(1, 201):
            assert harmonic(k) == pytest.approx(digamma(k + 1.0) + EULER_GAMMA, abs=1e-12)

    def test_matches_exact_sum(self):
        exact = sum(Fraction(1, i) for i in range(1, 41))
        assert harmonic(40) == pytest.approx(float(exact), rel=1e-14)

    def test_rejects_non_positive(self):
        with pytest.raises(ParameterError):
            harmonic(0)
        with pytest.raises(ParameterError):
            harmonic(2.5)
