import math

import numpy as np
import pytest

from src.core.combining import (
    barnard_rubin_df,
    mi_fraction_missing,
    pool_cov,
    pool_point,
    relative_efficiency,
    t_interval,
    t_quantile,
)
from src.core.dataset import EstimateVector
from src.core.exceptions import CombiningError


def _two_estimates():
    return [EstimateVector([0.1], [[0.04]]), EstimateVector([0.3], [[0.06]])]


def test_pool_two_imputations():
    pooled = pool_cov(_two_estimates())
    assert pooled.theta_bar[0] == pytest.approx(0.2)
    assert pooled.W[0, 0] == pytest.approx(0.05)
    assert pooled.V[0, 0] == pytest.approx(0.02)
    assert pooled.total_cov[0, 0] == pytest.approx(0.08)
    assert pooled.se[0] == pytest.approx(math.sqrt(0.08))
    assert pooled.df[0] == pytest.approx((1.0 + 2.0 * 0.05 / (3.0 * 0.02)) ** 2)


def test_pool_point_is_the_mean():
    estimates = [EstimateVector([1.0, 2.0]), EstimateVector([3.0, 6.0])]
    np.testing.assert_allclose(pool_point(estimates), [2.0, 4.0])


def test_pool_rejects_bad_input():
    with pytest.raises(CombiningError):
        pool_point([])
    with pytest.raises(CombiningError, match="ragged"):
        pool_point([EstimateVector([1.0]), EstimateVector([1.0, 2.0])])
    with pytest.raises(CombiningError):
        pool_cov([EstimateVector([1.0], [[1.0]])])
    with pytest.raises(CombiningError):
        pool_cov([EstimateVector([1.0]), EstimateVector([2.0])])


def test_barnard_rubin_df():
    assert barnard_rubin_df(1.0, 1.0, 10) == pytest.approx(32.80, abs=0.01)
    assert barnard_rubin_df(0.0, 2.0, 5) == 4.0
    assert math.isinf(barnard_rubin_df(1.0, 0.0, 5))


def test_df_grows_with_within_variance():
    dfs = [barnard_rubin_df(w, 1.0, 5) for w in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert all(a < b for a, b in zip(dfs, dfs[1:]))


def test_fraction_missing_information():
    assert mi_fraction_missing(3.0, 1.0) == pytest.approx(0.25)
    assert mi_fraction_missing(1.0, 0.0) == 0.0
    assert mi_fraction_missing(0.0, 1.0) == 1.0
    with pytest.raises(CombiningError):
        mi_fraction_missing(0.0, 0.0)


def test_relative_efficiency():
    assert relative_efficiency(0.5, 10) == pytest.approx(0.952, abs=1e-3)
    assert relative_efficiency(0.0, 1) == 1.0
    with pytest.raises(CombiningError):
        relative_efficiency(1.5, 10)


def test_t_quantiles():
    assert t_quantile(0.975, math.inf) == pytest.approx(1.959964, abs=1e-6)
    assert t_quantile(0.975, 10) == pytest.approx(2.228139, abs=1e-6)
    assert t_quantile(0.025, 10) == pytest.approx(-2.228139, abs=1e-6)
    assert t_quantile(0.5, 7) == 0.0
    assert t_quantile(0.975, 1) == pytest.approx(12.7062, abs=1e-4)
    with pytest.raises(CombiningError):
        t_quantile(1.0, 5)
    with pytest.raises(CombiningError):
        t_quantile(0.9, 0.0)


def test_t_interval():
    lower, upper = t_interval(1.0, 4.0, math.inf, 0.025)
    assert lower == pytest.approx(1.0 - 2.0 * 1.959964, abs=1e-5)
    assert upper == pytest.approx(1.0 + 2.0 * 1.959964, abs=1e-5)
    assert t_interval(0.3, 0.0, 12.0, 0.025) == (0.3, 0.3)
    with pytest.raises(CombiningError):
        t_interval(0.0, -1.0, 5.0, 0.025)


def test_pooling_commutes_with_linear_maps():
    gen = np.random.default_rng(50)
    estimates = []
    for _ in range(6):
        root = gen.normal(size=(2, 2))
        estimates.append(EstimateVector(gen.normal(size=2), root @ root.T + np.eye(2)))
    A = np.array([[2.0, -1.0], [0.5, 3.0]])
    mapped = [EstimateVector(A @ e.theta_hat, A @ e.cov_hat @ A.T) for e in estimates]
    original, transformed = pool_cov(estimates), pool_cov(mapped)
    np.testing.assert_allclose(transformed.theta_bar, A @ original.theta_bar)
    np.testing.assert_allclose(transformed.total_cov, A @ original.total_cov @ A.T)
