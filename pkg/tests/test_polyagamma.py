import math

import numpy as np
import pytest
from scipy import stats

from mvlogit.exceptions import ValidationError
from mvlogit.polyagamma import pg1_mean, pg1_var, sample_pg1


def series_variance(z, terms=200_000):
    # PG(1, z) is an infinite convolution of gammas; its variance is a series
    k = np.arange(1, terms + 1)
    c = (k - 0.5) ** 2 + z * z / (4 * math.pi ** 2)
    return float(np.sum(1.0 / c ** 2) / (4 * math.pi ** 4))


def test_mean_oracle_values():
    assert pg1_mean(0.0) == 0.25
    assert pg1_mean(2.0) == pytest.approx(math.tanh(1.0) / 4, rel=1e-15)
    assert pg1_mean(2.0) == pytest.approx(0.1903985, abs=1e-7)
    assert pg1_mean(-2.0) == pg1_mean(2.0)
    assert pg1_mean(1e-8) == pytest.approx(0.25)


@pytest.mark.parametrize("z", [0.0, 1e-4, 0.5, 2.0, 10.0, 60.0])
def test_variance_oracle_matches_series(z):
    assert pg1_var(z) == pytest.approx(series_variance(z), rel=1e-5)


@pytest.mark.parametrize("z", [0.0, 0.5, 1.0, 2.0, 5.0, 10.0])
def test_sample_moments(z):
    rng = np.random.default_rng(int(z * 10) + 1)
    n = 100_000
    x = sample_pg1(z, rng, size=n)
    m, v = pg1_mean(z), pg1_var(z)
    assert abs(x.mean() - m) < 4 * math.sqrt(v / n)
    # SE of the sample variance from the fourth central moment of the draws
    c = x - x.mean()
    se_var = math.sqrt((np.mean(c ** 4) - x.var() ** 2) / n)
    assert abs(x.var() - v) < 4 * se_var


def test_symmetry_in_z():
    a = sample_pg1(2.0, np.random.default_rng(1), size=20_000)
    b = sample_pg1(-2.0, np.random.default_rng(2), size=20_000)
    assert stats.ks_2samp(a, b).pvalue > 1e-3


def test_positive_and_tail():
    x = sample_pg1(0.0, np.random.default_rng(3), size=1_000_000)
    assert np.all(x > 0)
    assert x.max() < 50


def test_deterministic_under_seed():
    a = sample_pg1([0.3, 4.0, -1.0], np.random.default_rng(9))
    b = sample_pg1([0.3, 4.0, -1.0], np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


def test_scalar_and_shape():
    assert isinstance(sample_pg1(1.0, np.random.default_rng(0)), float)
    assert sample_pg1(1.0, np.random.default_rng(0), size=(2, 3)).shape == (2, 3)


@pytest.mark.parametrize("z", [np.nan, np.inf, -np.inf])
def test_rejects_non_finite(z):
    with pytest.raises(ValidationError):
        sample_pg1(z, np.random.default_rng(0))
