import math

import numpy as np
import pytest

from src.core.dataset import IncompleteDataset, LongitudinalDataset
from src.core.exceptions import EstimationError, IncompatibleConfigError, PositivityError, RankDeficiencyError
from src.core.factory import EstimatorFactory
from src.core.models import ColumnMeta, GformulaDesign, GformulaFitting, RegimeName, Transform
from src.estimators.cox import CoxEstimator, cox_fit
from src.estimators.gformula import RegimeSpec, SeqGformulaEstimator, regime_spec, seq_gformula
from src.estimators.ols import OlsEstimator, ols_fit
from src.simulation.longitudinal import SemParameters, simulate_sem
from src.stochastics.streams import RngStream


def test_ols_exact_fit():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    fit = ols_fit(X, X @ np.array([1.0, 2.0]))
    np.testing.assert_allclose(fit.theta_hat, [1.0, 2.0])
    np.testing.assert_allclose(fit.cov_hat, 0.0, atol=1e-20)


def test_ols_intercept_only():
    y = np.array([1.0, 4.0, 2.0, 7.0, 3.0, 5.0])
    fit = ols_fit(np.ones((6, 1)), y)
    assert fit.theta_hat[0] == pytest.approx(y.mean())
    assert fit.cov_hat[0, 0] == pytest.approx(y.var(ddof=1) / y.size)


def test_ols_rejects_collinear_design():
    x = np.arange(6.0)
    with pytest.raises(RankDeficiencyError):
        ols_fit(np.column_stack([np.ones(6), x, 2 * x]), x)
    with pytest.raises(RankDeficiencyError):
        ols_fit(np.ones((1, 1)), np.ones(1))


def test_ols_residuals_are_orthogonal_to_design():
    gen = np.random.default_rng(39)
    X = np.column_stack([np.ones(300), gen.normal(size=(300, 3))])
    y = X @ np.array([0.5, 1.0, -2.0, 0.3]) + gen.normal(size=300)
    fit = ols_fit(X, y)
    residual = y - X @ fit.theta_hat
    assert np.max(np.abs(X.T @ residual)) < 1e-8 * np.linalg.norm(X.T @ y)


def test_ols_estimator_names_coordinates(complete_linear):
    estimator = OlsEstimator()
    estimate = estimator.estimate(complete_linear)
    assert estimator.coordinates == ["intercept", "X1", "X2"]
    np.testing.assert_allclose(estimate.theta_hat, [1.0, 2.0, -1.0], atol=0.15)


def test_ols_estimator_needs_complete_data(linear_data):
    with pytest.raises(EstimationError):
        OlsEstimator().estimate(linear_data)


def _partial_loglik(betas, times, events, x):
    """Breslow log partial likelihood for each beta in a grid"""
    total = np.zeros_like(betas)
    for i in np.flatnonzero(events):
        at_risk = times >= times[i]
        total += betas * x[i] - np.log(np.exp(np.outer(betas, x[at_risk])).sum(axis=1))
    return total


def test_cox_four_subjects_matches_grid_search():
    times = np.array([1.0, 2.0, 3.0, 4.0])
    events = np.array([1, 1, 0, 1])
    x = np.array([1.0, 0.0, 1.0, 0.0])
    fit = cox_fit(times, events, x)

    grid = np.arange(-3.0, 3.0, 1e-4)
    best = grid[np.argmax(_partial_loglik(grid, times, events, x))]
    assert fit.theta_hat[0] == pytest.approx(best, abs=1e-4)
    assert fit.theta_hat[0] == pytest.approx(math.log(math.sqrt(2.0)), abs=1e-6)


def test_cox_null_covariate():
    gen = np.random.default_rng(40)
    n = 2000
    x = gen.normal(size=n)
    times = gen.exponential(5.0, size=n)
    censor = gen.exponential(10.0, size=n)
    fit = cox_fit(np.minimum(times, censor), times <= censor, x)
    assert abs(fit.theta_hat[0]) < 3.0 * math.sqrt(fit.cov_hat[0, 0])


def test_cox_recovers_log_hazard_ratio():
    gen = np.random.default_rng(41)
    n = 3000
    x = gen.normal(size=(n, 2))
    times = gen.exponential(1.0, size=n) / np.exp(x @ np.array([0.5, -0.3]))
    fit = cox_fit(times, np.ones(n, dtype=bool), x)
    se = np.sqrt(np.diag(fit.cov_hat))
    assert np.all(np.abs(fit.theta_hat - [0.5, -0.3]) < 4.0 * se)


def _breslow_score(beta, times, events, X):
    score = np.zeros_like(beta)
    for i in np.flatnonzero(events):
        at_risk = times >= times[i]
        weights = np.exp(X[at_risk] @ beta)
        score += X[i] - weights @ X[at_risk] / weights.sum()
    return score


def _censored_cohort(seed=48, n=300):
    gen = np.random.default_rng(seed)
    X = gen.normal(size=(n, 2))
    times = gen.exponential(1.0, size=n) / np.exp(X @ np.array([0.4, -0.6]))
    censor = gen.exponential(2.0, size=n)
    return np.minimum(times, censor), times <= censor, X


def test_cox_solution_zeroes_the_score():
    times, events, X = _censored_cohort()
    fit = cox_fit(times, events, X)
    assert np.max(np.abs(_breslow_score(fit.theta_hat, times, events, X))) < 1e-6
    assert np.all(np.linalg.eigvalsh(np.linalg.inv(fit.cov_hat)) > 0.0)


def test_cox_ignores_follow_up_after_last_event():
    times, events, X = _censored_cohort()
    last_event = times[events].max()
    later = np.where(~events & (times > last_event), times + 10.0, times)
    assert np.sum(later != times) > 0
    np.testing.assert_allclose(cox_fit(later, events, X).theta_hat, cox_fit(times, events, X).theta_hat, atol=1e-10)


def test_cox_needs_an_event():
    with pytest.raises(EstimationError, match="event"):
        cox_fit([1.0, 2.0], [0, 0], [0.0, 1.0])


def test_cox_estimator_applies_transforms():
    gen = np.random.default_rng(42)
    n = 400
    x1 = np.exp(gen.normal(size=n))
    times = gen.exponential(1.0, size=n) / np.exp(0.4 * np.log(x1))
    values = np.column_stack([times, np.ones(n), x1])
    meta = [ColumnMeta(name="time"), ColumnMeta(name="event"), ColumnMeta(name="X1")]
    estimator = CoxEstimator(transforms={"X1": Transform.LOG})
    estimate = estimator.estimate(IncompleteDataset(values, None, meta))
    assert estimator.coordinates == ["X1"]
    assert estimate.theta_hat[0] == pytest.approx(0.4, abs=0.15)


def test_estimator_factory_pairs_estimators_with_settings():
    factory = EstimatorFactory()
    cox = factory.create_estimator("cox", setting="3")
    assert cox.transforms == {"X1": Transform.LOG, "X2": Transform.LOG10}
    assert isinstance(factory.create_estimator("seqg", regimes=["always"]), SeqGformulaEstimator)
    with pytest.raises(IncompatibleConfigError):
        factory.create_estimator("ols", setting="3")
    with pytest.raises(IncompatibleConfigError):
        factory.create_estimator("cox", setting="4")


def _discrete_two_step(n=2000, seed=43):
    """Binary L and A over t = 0, 1 with every history cell populated"""
    gen = np.random.default_rng(seed)
    L0 = gen.integers(0, 2, size=n).astype(float)
    A0 = (gen.random(n) < 0.3 + 0.4 * L0).astype(float)
    L1 = (gen.random(n) < 0.4 + 0.3 * A0).astype(float)
    A1 = np.where(A0 == 1.0, 1.0, (gen.random(n) < 0.3 + 0.3 * L1).astype(float))
    A1 = np.where(gen.random(n) < 0.1, 1.0 - A1, A1)
    Y0 = gen.normal(size=n)
    Y1 = 1.0 + L0 + 0.5 * A0 + L1 - A1 + gen.normal(size=n)
    L = np.stack([L0, L1], axis=1)[:, :, None]
    A = np.column_stack([A0, A1])
    C = np.zeros((n, 2))
    Y = np.column_stack([Y0, Y1])
    return LongitudinalDataset(None, L, A, C, Y)


def _brute_force(data: LongitudinalDataset, g: float) -> float:
    L0, L1 = data.L[:, 0, 0], data.L[:, 1, 0]
    A0, A1, Y1 = data.A[:, 0], data.A[:, 1], data.Y[:, 1]
    total = 0.0
    for l0 in (0.0, 1.0):
        p_l0 = np.mean(L0 == l0)
        arm = (L0 == l0) & (A0 == g)
        inner = 0.0
        for l1 in (0.0, 1.0):
            p_l1 = np.mean(L1[arm] == l1)
            cell = arm & (L1 == l1) & (A1 == g)
            inner += p_l1 * Y1[cell].mean()
        total += p_l0 * inner
    return total


@pytest.mark.parametrize("regime, g", [(RegimeName.ALWAYS, 1.0), (RegimeName.NEVER, 0.0)])
def test_saturated_gformula_matches_brute_force(regime, g):
    data = _discrete_two_step()
    estimate = seq_gformula(data, regime_spec(regime), design=GformulaDesign.SATURATED)
    assert estimate.theta_hat[0] == pytest.approx(_brute_force(data, g), abs=1e-8)


def test_gformula_single_step_is_sample_mean():
    gen = np.random.default_rng(44)
    n = 50
    data = LongitudinalDataset(
        gen.normal(size=(n, 1)), gen.normal(size=(n, 1)), np.zeros((n, 1)), np.zeros((n, 1)), gen.normal(size=(n, 1))
    )
    estimate = seq_gformula(data, regime_spec(RegimeName.NEVER))
    assert estimate.theta_hat[0] == pytest.approx(data.Y[:, 0].mean())


def test_gformula_positivity_violation():
    n = 30
    gen = np.random.default_rng(45)
    data = LongitudinalDataset(None, gen.normal(size=(n, 2)), np.zeros((n, 2)), np.zeros((n, 2)), gen.normal(size=(n, 2)))
    with pytest.raises(PositivityError) as info:
        seq_gformula(data, regime_spec(RegimeName.ALWAYS))
    assert info.value.t == 1


def test_gformula_rejects_incomplete_data():
    L = np.array([[1.0, np.nan], [2.0, 3.0]])
    data = LongitudinalDataset(None, L, np.zeros((2, 2)), np.zeros((2, 2)), np.ones((2, 2)))
    with pytest.raises(EstimationError, match="complete"):
        seq_gformula(data, regime_spec(RegimeName.NEVER))


def test_gformula_null_treatment_effect():
    data = simulate_sem(SemParameters(), 4000, RngStream(46, ("null",)), horizon=3)
    estimator = SeqGformulaEstimator(outcome_time=3)
    always, never = estimator.estimate(data).theta_hat
    assert estimator.coordinates == ["psi_always", "psi_never"]
    assert abs(always - never) < 0.2


def test_cd4_regime_starts_and_keeps_treatment():
    L = np.array([[[500.0, 0.3], [300.0, 0.3], [600.0, 0.3]]])
    data = LongitudinalDataset(None, L, np.zeros((1, 3)), np.zeros((1, 3)), np.zeros((1, 3)))
    regime = RegimeSpec(name=RegimeName.CD4_THRESHOLD)
    rows = np.array([0])
    assert [regime.assign(data, t, rows)[0] for t in range(3)] == [0.0, 1.0, 1.0]


def test_gformula_fits_only_regime_followers():
    data = _discrete_two_step()
    followers = (data.A[:, 0] == 1.0) & (data.A[:, 1] == 1.0)
    shifted_Y = data.Y.copy()
    shifted_Y[~followers, 1] += 100.0
    shifted = LongitudinalDataset(data.V, data.L, data.A, data.C, shifted_Y)

    regime = regime_spec(RegimeName.ALWAYS)
    before = seq_gformula(data, regime).theta_hat[0]
    after = seq_gformula(shifted, regime).theta_hat[0]
    assert after == pytest.approx(before, abs=1e-10)

    pooled_before = seq_gformula(data, regime, fitting=GformulaFitting.POOLED).theta_hat[0]
    pooled_after = seq_gformula(shifted, regime, fitting=GformulaFitting.POOLED).theta_hat[0]
    assert abs(pooled_after - pooled_before) > 1.0


def test_gformula_no_followers_reports_time():
    n = 40
    gen = np.random.default_rng(47)
    A = np.column_stack([np.ones(n), np.zeros(n)])
    data = LongitudinalDataset(None, gen.normal(size=(n, 2)), A, np.zeros((n, 2)), gen.normal(size=(n, 2)))
    with pytest.raises(PositivityError) as info:
        seq_gformula(data, regime_spec(RegimeName.ALWAYS))
    assert info.value.t == 1
    assert seq_gformula(data, regime_spec(RegimeName.ALWAYS), outcome_time=0).theta_hat[0] == pytest.approx(
        data.Y[:, 0].mean()
    )


def test_factory_passes_gformula_fitting():
    factory = EstimatorFactory()
    assert factory.create_estimator("seqg").fitting == GformulaFitting.RULE_CONSISTENT
    assert factory.create_estimator("seqg", fitting="pooled").fitting == GformulaFitting.POOLED
