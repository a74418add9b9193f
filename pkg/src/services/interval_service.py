"""Bootstrap and multiple-imputation interval constructors.

Stream lanes below a method's stream:

* MI Boot (both reductions): imputations under ``impute``; bootstrap draw b
  of completed dataset m under ``resample/m/b``.
* Boot MI (both reductions and the t variant): bootstrap draw b under
  ``resample/b``; its M imputations under ``impute/b``; the point estimate's
  imputations over the original data under ``point``.
"""
import logging
import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..core.combining import pool_cov, pool_point, t_interval, t_quantile
from ..core.dataset import EstimateVector, IntervalEstimate
from ..core.exceptions import EstimationError, ImputationError, InvalidPlanError, ReplicateFailureError
from ..core.models import MethodTag, ResamplingPlan
from ..estimators.base import Estimator
from ..stochastics.samplers import bootstrap_indices
from ..stochastics.streams import RngStream

logger = logging.getLogger(__name__)

FAILURE_TOLERANCE = 0.01

LANES = {
    "mi_then_boot": {"impute": "impute/imputation/{m}", "resample": "resample/{m}/{b}"},
    "boot_then_mi": {"resample": "resample/{b}", "impute": "impute/{b}/imputation/{m}",
                     "point": "point/imputation/{m}"},
    "analytic": {"impute": "impute/imputation/{m}"},
}


def percentile(sample, p: float) -> float:
    """Order-statistic interpolation at h = (N-1)p + 1 (1-based ranks)"""
    values = np.sort(np.asarray(sample, dtype=float).ravel())
    if values.size == 0:
        raise EstimationError("percentile of an empty sample")
    if not 0.0 < p < 1.0:
        raise EstimationError("percentile level must lie in (0, 1)")
    h = (values.size - 1) * p + 1.0
    lower = math.floor(h)
    upper = math.ceil(h)
    return float(values[lower - 1] + (h - lower) * (values[upper - 1] - values[lower - 1]))


def _try_estimate(estimator: Estimator, dataset) -> Optional[np.ndarray]:
    try:
        return estimator.estimate(dataset).theta_hat
    except EstimationError as exc:
        logger.debug("replicate dropped: %s", exc)
        return None


def _enforce_failure_policy(failed: int, total: int) -> None:
    if total and failed / total > FAILURE_TOLERANCE:
        raise ReplicateFailureError(failed, total)
    if failed:
        logger.warning("dropped %d of %d failed replicates", failed, total)


def _percentile_bounds(replicates: np.ndarray, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    lower = np.array([percentile(replicates[:, j], alpha) for j in range(replicates.shape[1])])
    upper = np.array([percentile(replicates[:, j], 1.0 - alpha) for j in range(replicates.shape[1])])
    return lower, upper


def _lane_metadata(stream: RngStream, schema: str, point_source: str) -> Dict[str, object]:
    return {
        "lane_prefix": stream.describe(),
        "lane_schema": LANES[schema],
        "point_source": point_source,
    }


def mi_then_bootstrap(D, engine, estimator: Estimator, M: int, B: int, stream: RngStream):
    """M imputations of D, then B bootstrap replicates of each completed dataset.

    Returns (M point estimates, M x B x k replicate array with NaN rows for
    failed replicates, failure count).
    """
    imputations = engine.impute(D, M, stream.child("impute"))
    points = [estimator.estimate(completed) for completed in imputations]
    k = points[0].k
    replicates = np.full((M, B, k), np.nan)
    failed = 0
    for m, completed in enumerate(imputations):
        for b in range(B):
            rows = bootstrap_indices(stream.child("resample", m, b), completed.n_rows)
            theta = _try_estimate(estimator, completed.take(rows))
            if theta is None:
                failed += 1
            else:
                replicates[m, b] = theta
    return points, replicates, failed


def bootstrap_then_mi(D, engine, estimator: Estimator, M: int, B: int, stream: RngStream, k: int):
    """B bootstrap samples of incomplete D, each imputed M times: B x M x k"""
    replicates = np.full((B, M, k), np.nan)
    failed = 0
    for b in range(B):
        rows = bootstrap_indices(stream.child("resample", b), D.n_rows)
        try:
            completions = engine.impute(D.take(rows), M, stream.child("impute", b))
        except ImputationError as exc:
            logger.debug("bootstrap sample %d failed to impute: %s", b, exc)
            failed += M
            continue
        for m, completed in enumerate(completions):
            theta = _try_estimate(estimator, completed)
            if theta is None:
                failed += 1
            else:
                replicates[b, m] = theta
    return replicates, failed


def point_from_original(D, engine, estimator: Estimator, M: int, stream: RngStream) -> np.ndarray:
    imputations = engine.impute(D, M, stream.child("point"))
    return pool_point([estimator.estimate(completed) for completed in imputations])


def mi_boot_pooled(D, engine, estimator, plan: ResamplingPlan, stream: RngStream) -> IntervalEstimate:
    plan.check(MethodTag.MI_BOOT_PS)
    points, replicates, failed = mi_then_bootstrap(D, engine, estimator, plan.M, plan.B, stream)
    _enforce_failure_policy(failed, plan.M * plan.B)
    pooled = replicates.reshape(-1, replicates.shape[-1])
    pooled = pooled[~np.isnan(pooled).any(axis=1)]
    lower, upper = _percentile_bounds(pooled, plan.alpha)
    return IntervalEstimate(
        lower, upper, MethodTag.MI_BOOT_PS, plan.alpha, plan.M, plan.B,
        point=pool_point(points), dropped_replicates=failed,
        metadata=_lane_metadata(stream, "mi_then_boot", "pooled over M imputations of the original data"),
        replicates=replicates,
    )


def mi_boot(D, engine, estimator, plan: ResamplingPlan, stream: RngStream) -> IntervalEstimate:
    plan.check(MethodTag.MI_BOOT)
    points, replicates, failed = mi_then_bootstrap(D, engine, estimator, plan.M, plan.B, stream)
    _enforce_failure_policy(failed, plan.M * plan.B)
    with_cov = []
    for m, point in enumerate(points):
        valid = replicates[m][~np.isnan(replicates[m]).any(axis=1)]
        if valid.shape[0] < 2:
            raise ReplicateFailureError(failed, plan.M * plan.B)
        cov = np.atleast_2d(np.cov(valid, rowvar=False, ddof=1))
        with_cov.append(EstimateVector(point.theta_hat, cov))
    pooled = pool_cov(with_cov)
    bounds = [
        t_interval(pooled.theta_bar[j], pooled.total_cov[j, j], pooled.df[j], plan.alpha)
        for j in range(pooled.theta_bar.size)
    ]
    lower, upper = (np.array(side) for side in zip(*bounds))
    return IntervalEstimate(
        lower, upper, MethodTag.MI_BOOT, plan.alpha, plan.M, plan.B,
        df=pooled.df, point=pooled.theta_bar, se=pooled.se, dropped_replicates=failed,
        metadata=_lane_metadata(stream, "mi_then_boot", "pooled over M imputations of the original data"),
        replicates=replicates,
    )


def _boot_mi_replicates(D, engine, estimator, plan: ResamplingPlan, stream: RngStream):
    point = point_from_original(D, engine, estimator, plan.M, stream)
    replicates, failed = bootstrap_then_mi(D, engine, estimator, plan.M, plan.B, stream, point.size)
    _enforce_failure_policy(failed, plan.M * plan.B)
    return point, replicates, failed


def _averaged(replicates: np.ndarray) -> np.ndarray:
    complete = ~np.isnan(replicates).any(axis=(1, 2))
    return replicates[complete].mean(axis=1)


def boot_mi_pooled(D, engine, estimator, plan: ResamplingPlan, stream: RngStream) -> IntervalEstimate:
    plan.check(MethodTag.BOOT_MI_PS)
    point, replicates, failed = _boot_mi_replicates(D, engine, estimator, plan, stream)
    pooled = replicates.reshape(-1, replicates.shape[-1])
    pooled = pooled[~np.isnan(pooled).any(axis=1)]
    lower, upper = _percentile_bounds(pooled, plan.alpha)
    return IntervalEstimate(
        lower, upper, MethodTag.BOOT_MI_PS, plan.alpha, plan.M, plan.B,
        point=point, dropped_replicates=failed,
        metadata=_lane_metadata(stream, "boot_then_mi", "pooled over M imputations of the original data"),
        replicates=replicates,
    )


def boot_mi(D, engine, estimator, plan: ResamplingPlan, stream: RngStream) -> IntervalEstimate:
    plan.check(MethodTag.BOOT_MI)
    point, replicates, failed = _boot_mi_replicates(D, engine, estimator, plan, stream)
    lower, upper = _percentile_bounds(_averaged(replicates), plan.alpha)
    return IntervalEstimate(
        lower, upper, MethodTag.BOOT_MI, plan.alpha, plan.M, plan.B,
        point=point, dropped_replicates=failed,
        metadata=_lane_metadata(stream, "boot_then_mi", "pooled over M imputations of the original data"),
        replicates=replicates,
    )


def t_bootstrap_interval(averaged: np.ndarray, alpha: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """mean +- t_{B-1, 1-alpha} * sd over B averaged replicates; returns (lower, upper, sd)"""
    averaged = np.atleast_2d(np.asarray(averaged, dtype=float))
    if averaged.shape[0] == 1 and averaged.shape[1] > 1:
        averaged = averaged.T
    count = averaged.shape[0]
    if count < 2:
        raise InvalidPlanError("t interval needs at least two bootstrap replicates")
    center = averaged.mean(axis=0)
    sd = averaged.std(axis=0, ddof=1)
    half = t_quantile(1.0 - alpha, count - 1) * sd
    return center - half, center + half, sd


def boot_mi_t(D, engine, estimator, plan: ResamplingPlan, stream: RngStream) -> IntervalEstimate:
    plan.check(MethodTag.BOOT_MI_T)
    point, replicates, failed = _boot_mi_replicates(D, engine, estimator, plan, stream)
    averaged = _averaged(replicates)
    lower, upper, sd = t_bootstrap_interval(averaged, plan.alpha)
    metadata = _lane_metadata(stream, "boot_then_mi", "pooled over M imputations of the original data")
    metadata["assumes_normality"] = True
    metadata["interval_center"] = [float(x) for x in averaged.mean(axis=0)]
    return IntervalEstimate(
        lower, upper, MethodTag.BOOT_MI_T, plan.alpha, plan.M, plan.B,
        df=np.full(lower.size, float(averaged.shape[0] - 1)), point=point, se=sd,
        dropped_replicates=failed, metadata=metadata,
        replicates=replicates,
    )


def no_bootstrap(D, engine, estimator, plan: ResamplingPlan, stream: RngStream) -> IntervalEstimate:
    plan.check(MethodTag.NO_BOOTSTRAP)
    if not estimator.has_analytic_cov:
        raise InvalidPlanError(f"estimator '{estimator.name}' has no analytic covariance")
    imputations = engine.impute(D, plan.M, stream.child("impute"))
    pooled = pool_cov([estimator.estimate(completed) for completed in imputations])
    bounds = [
        t_interval(pooled.theta_bar[j], pooled.total_cov[j, j], pooled.df[j], plan.alpha)
        for j in range(pooled.theta_bar.size)
    ]
    lower, upper = (np.array(side) for side in zip(*bounds))
    return IntervalEstimate(
        lower, upper, MethodTag.NO_BOOTSTRAP, plan.alpha, plan.M, 0,
        df=pooled.df, point=pooled.theta_bar, se=pooled.se,
        metadata=_lane_metadata(stream, "analytic", "pooled over M imputations of the original data"),
    )


def percentile_bootstrap(D, estimator: Estimator, B: int, alpha: float, stream: RngStream) -> IntervalEstimate:
    """Plain percentile bootstrap of complete data on the Boot MI resample lanes"""
    point = estimator.estimate(D).theta_hat
    replicates = np.full((B, point.size), np.nan)
    failed = 0
    for b in range(B):
        rows = bootstrap_indices(stream.child("resample", b), D.n_rows)
        theta = _try_estimate(estimator, D.take(rows))
        if theta is None:
            failed += 1
        else:
            replicates[b] = theta
    _enforce_failure_policy(failed, B)
    lower, upper = _percentile_bounds(replicates[~np.isnan(replicates).any(axis=1)], alpha)
    return IntervalEstimate(
        lower, upper, MethodTag.BOOT_MI_PS, alpha, 1, B,
        point=point, dropped_replicates=failed,
        metadata={"lane_prefix": stream.describe(), "lane_schema": {"resample": "resample/{b}"}},
        replicates=replicates[:, None, :],
    )


CONSTRUCTORS: Dict[MethodTag, Callable[..., IntervalEstimate]] = {
    MethodTag.MI_BOOT_PS: mi_boot_pooled,
    MethodTag.MI_BOOT: mi_boot,
    MethodTag.BOOT_MI_PS: boot_mi_pooled,
    MethodTag.BOOT_MI: boot_mi,
    MethodTag.BOOT_MI_T: boot_mi_t,
    MethodTag.NO_BOOTSTRAP: no_bootstrap,
}


class IntervalService:
    """Dispatches a ResamplingPlan to its constructor"""

    def construct(self, D, engine, estimator, plan: ResamplingPlan, stream: RngStream) -> IntervalEstimate:
        try:
            constructor = CONSTRUCTORS[plan.method_tag]
        except KeyError:
            raise InvalidPlanError(f"unknown method {plan.method_tag}") from None
        return constructor(D, engine, estimator, plan, stream)

    def available_methods(self) -> List[str]:
        return [tag.value for tag in CONSTRUCTORS]
