"""Longitudinal setting 4: a structural equation model for paediatric HIV follow-up.

Baseline (t = 0) holds region V1, sex V2, age V3, CD4 count L1, CD4 fraction
L2, weight-for-age L3 and the outcome height-for-age Y. Each follow-up step
updates L1..L3 autoregressively with a treatment effect, starts treatment
through a logistic model in current CD4, draws censoring, then the outcome.
Treatment once started is never stopped. The treatment effects are calibrated
so that the population means at t = 12 match the cohort summaries.
"""
import functools
import logging
from dataclasses import dataclass, replace
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
from scipy import special

from ..core.dataset import LongitudinalDataset
from ..core.exceptions import SamplerError
from ..core.models import ColumnKind, ColumnMeta, RegimeName, Transform
from ..estimators.gformula import RegimeSpec, regime_spec
from ..stochastics.samplers import TruncationSpec, sample_truncated_normal_array
from ..stochastics.streams import RngStream
from .missingness import impose, setting4_rules

logger = logging.getLogger(__name__)

SEM_VERSION = "sem-v1"
HORIZON = 12

L1_BANDS = TruncationSpec.from_bands(0.0, 50.0, 5000.0, 10000.0)
L2_BANDS = TruncationSpec.from_bands(0.03, 0.09, 0.7, 0.8)
L3_BANDS = TruncationSpec.from_bands(-10.0, 3.0, 3.0, 10.0)
Y_BANDS = L3_BANDS

FOLLOW_UP_TARGETS = (1092.0, 0.272, -0.8, -1.5)
CALIBRATION_SUBJECTS = 100_000
CALIBRATION_SEED = 20240612


@dataclass(frozen=True)
class SemParameters:
    version: str = SEM_VERSION
    p_region: float = 0.755
    p_male: float = 0.512
    age_range: Tuple[float, float] = (0.5, 5.5)
    cd4_mean: float = 672.5
    cd4_age_slope: float = -40.0
    cd4_sd: float = 300.0
    pct_mean: float = 0.155
    pct_cd4_slope: float = 1e-4
    pct_sd: float = 0.06
    waz_mean: float = -1.5
    waz_cd4_slope: float = 1e-3
    waz_sd: float = 1.0
    haz_mean: float = -2.5
    haz_waz_slope: float = 0.4
    haz_sd: float = 1.0
    autoregression: float = 0.7
    follow_up_sd: Tuple[float, float, float] = (150.0, 0.03, 0.4)
    pct_cd4_slope_t: float = 5e-5
    haz_autoregression: float = 0.8
    haz_waz_slope_t: float = 0.2
    haz_sd_t: float = 0.3
    treat_intercept: float = -2.0
    treat_cd4_coef: float = -0.3
    treat_pct_coef: float = -0.3
    censor_intercept: float = -4.5
    censor_cd4_coef: float = -0.2
    # treatment effects on L1, L2, L3 and Y one step after treatment
    deltas: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def with_deltas(self, deltas) -> "SemParameters":
        return replace(self, deltas=tuple(float(d) for d in deltas))

    def treatment_logit(self, l1: np.ndarray, l2: np.ndarray) -> np.ndarray:
        return (
            self.treat_intercept
            + self.treat_cd4_coef * (l1 - self.cd4_mean) / 100.0
            + self.treat_pct_coef * (l2 - self.pct_mean) / 0.05
        )

    def censoring_logit(self, l1: np.ndarray) -> np.ndarray:
        return self.censor_intercept + self.censor_cd4_coef * (l1 - self.cd4_mean) / 100.0

    def cache_key(self) -> str:
        return f"{self.version}-" + "-".join(f"{d:.6g}" for d in self.deltas)


@dataclass
class _Step:
    t: int
    L: np.ndarray
    A: np.ndarray
    C: np.ndarray
    Y: np.ndarray


def _forced(regime: RegimeSpec, L: np.ndarray, flagged: np.ndarray) -> np.ndarray:
    if regime.name == RegimeName.ALWAYS:
        return np.ones(L.shape[0])
    if regime.name == RegimeName.NEVER:
        return np.zeros(L.shape[0])
    flagged |= (L[:, regime.count_index] < regime.count_threshold) | (
        L[:, regime.percent_index] < regime.percent_threshold
    )
    return flagged.astype(float)


def sem_steps(
    params: SemParameters,
    n: int,
    stream: RngStream,
    horizon: int = HORIZON,
    regime: Optional[RegimeSpec] = None,
) -> Iterator:
    """Yield the baseline matrix V, then one _Step per t = 0..horizon.

    Every step consumes the same draws whether or not a regime forces
    treatment, so natural-course and intervened cohorts share lanes. Under a
    regime censoring is switched off.
    """
    p = params
    gen = stream.child("t", 0).generator()
    V = np.column_stack([
        (gen.random(n) < p.p_region).astype(float),
        (gen.random(n) < p.p_male).astype(float),
        gen.uniform(p.age_range[0], p.age_range[1], size=n),
    ])
    yield V

    l1 = sample_truncated_normal_array(gen, p.cd4_mean + p.cd4_age_slope * (V[:, 2] - 3.0), p.cd4_sd, L1_BANDS, n)
    l2 = sample_truncated_normal_array(gen, p.pct_mean + p.pct_cd4_slope * (l1 - p.cd4_mean), p.pct_sd, L2_BANDS, n)
    l3 = sample_truncated_normal_array(gen, p.waz_mean + p.waz_cd4_slope * (l1 - p.cd4_mean), p.waz_sd, L3_BANDS, n)
    u_treat = gen.random(n)
    y = sample_truncated_normal_array(gen, p.haz_mean + p.haz_waz_slope * (l3 - p.waz_mean), p.haz_sd, Y_BANDS, n)
    L = np.column_stack([l1, l2, l3])
    flagged = np.zeros(n, dtype=bool)
    if regime is None:
        a = (u_treat < special.expit(p.treatment_logit(l1, l2))).astype(float)
    else:
        a = _forced(regime, L, flagged)
    c = np.zeros(n)
    yield _Step(0, L, a, c, y)

    rho = p.autoregression
    d1, d2, d3, dy = p.deltas
    for t in range(1, horizon + 1):
        gen = stream.child("t", t).generator()
        prev_l, prev_a, prev_y = L, a, y
        l1 = sample_truncated_normal_array(
            gen, rho * prev_l[:, 0] + (1 - rho) * p.cd4_mean + d1 * prev_a, p.follow_up_sd[0], L1_BANDS, n)
        l2 = sample_truncated_normal_array(
            gen, rho * prev_l[:, 1] + (1 - rho) * p.pct_mean + d2 * prev_a + p.pct_cd4_slope_t * (l1 - p.cd4_mean),
            p.follow_up_sd[1], L2_BANDS, n)
        l3 = sample_truncated_normal_array(
            gen, rho * prev_l[:, 2] + (1 - rho) * p.waz_mean + d3 * prev_a, p.follow_up_sd[2], L3_BANDS, n)
        u_treat = gen.random(n)
        u_censor = gen.random(n)
        y = sample_truncated_normal_array(
            gen,
            p.haz_autoregression * prev_y + (1 - p.haz_autoregression) * p.haz_mean
            + p.haz_waz_slope_t * (l3 - p.waz_mean) + dy * prev_a,
            p.haz_sd_t, Y_BANDS, n)
        L = np.column_stack([l1, l2, l3])
        if regime is None:
            starts = u_treat < special.expit(p.treatment_logit(l1, l2))
            a = np.where(prev_a == 1.0, 1.0, starts.astype(float))
            c = (u_censor < special.expit(p.censoring_logit(l1))).astype(float)
        else:
            a = _forced(regime, L, flagged)
            c = np.zeros(n)
        yield _Step(t, L, a, c, y)


def simulate_sem(params: SemParameters, n: int, stream: RngStream, horizon: int = HORIZON) -> LongitudinalDataset:
    """Complete longitudinal data (no missing cells) under the natural course"""
    steps = sem_steps(params, n, stream, horizon)
    V = next(steps)
    L = np.empty((n, horizon + 1, 3))
    A = np.empty((n, horizon + 1))
    C = np.empty((n, horizon + 1))
    Y = np.empty((n, horizon + 1))
    for step in steps:
        L[:, step.t], A[:, step.t], C[:, step.t], Y[:, step.t] = step.L, step.A, step.C, step.Y
    return LongitudinalDataset(V, L, A, C, Y, v_meta=V_META, l_meta=L_META)


V_META = (
    ColumnMeta(name="V1", kind=ColumnKind.BINARY),
    ColumnMeta(name="V2", kind=ColumnKind.BINARY),
    ColumnMeta(name="V3"),
)
L_META = (
    ColumnMeta(name="L1", transform=Transform.SQRT),
    ColumnMeta(name="L2"),
    ColumnMeta(name="L3"),
)


def present_means(data: LongitudinalDataset, t: int) -> np.ndarray:
    """Means of (L1, L2, L3, Y) at t among subjects still under follow-up"""
    rows = data.present[:, t]
    y_rows = data.y_available[:, t]
    return np.concatenate([data.L[rows, t, :].mean(axis=0), [data.Y[y_rows, t].mean()]])


def sem_summary(data: LongitudinalDataset) -> Dict[str, float]:
    """Baseline and end-of-follow-up summaries of complete SEM data"""
    baseline = present_means(data, 0)
    final = present_means(data, data.horizon)
    return {
        "region_a": float(data.V[:, 0].mean()),
        "male": float(data.V[:, 1].mean()),
        "age": float(data.V[:, 2].mean()),
        "cd4_0": float(baseline[0]),
        "cd4_pct_0": float(baseline[1]),
        "waz_0": float(baseline[2]),
        "haz_0": float(baseline[3]),
        f"cd4_{data.horizon}": float(final[0]),
        f"cd4_pct_{data.horizon}": float(final[1]),
        f"waz_{data.horizon}": float(final[2]),
        f"haz_{data.horizon}": float(final[3]),
        "treated_final": float(np.nanmean(data.A[data.present[:, data.horizon], data.horizon])),
    }


def _final_means(params: SemParameters, subjects: int, seed: int) -> np.ndarray:
    data = simulate_sem(params, subjects, RngStream(seed, ("sem-calibration",)))
    return present_means(data, HORIZON)


@functools.lru_cache(maxsize=4)
def calibrate_sem(subjects: int = CALIBRATION_SUBJECTS, seed: int = CALIBRATION_SEED, refinements: int = 2) -> SemParameters:
    """Solve for the treatment effects that put the t = 12 means on target.

    Untreated subjects never feel a treatment effect, so the uptake path does
    not move with the effects and the end-of-follow-up means are close to
    affine in them. The Jacobian is taken by finite differences on common
    random numbers, then a few Newton corrections absorb truncation and
    censoring.
    """
    base = SemParameters()
    origin = _final_means(base, subjects, seed)
    steps = (100.0, 0.05, 0.5, 0.5)
    jacobian = np.empty((4, 4))
    for k, h in enumerate(steps):
        deltas = np.zeros(4)
        deltas[k] = h
        jacobian[:, k] = (_final_means(base.with_deltas(deltas), subjects, seed) - origin) / h

    target = np.asarray(FOLLOW_UP_TARGETS)
    deltas = np.linalg.solve(jacobian, target - origin)
    for _ in range(refinements):
        current = _final_means(base.with_deltas(deltas), subjects, seed)
        deltas = deltas + np.linalg.solve(jacobian, target - current)
    params = base.with_deltas(deltas)
    logger.info("calibrated %s treatment effects %s", params.version, np.round(deltas, 6).tolist())
    return params


def gen_setting4(
    n: int,
    stream: RngStream,
    horizon: int = HORIZON,
    params: Optional[SemParameters] = None,
) -> LongitudinalDataset:
    """SEM follow-up data with covariate and outcome cells missing at random"""
    if n < 50:
        raise SamplerError(f"setting 4 needs at least 50 subjects, got {n}")
    params = calibrate_sem() if params is None else params
    complete = simulate_sem(params, n, stream.child("sem"), horizon)

    columns = {}
    for t in range(horizon + 1):
        for j in range(3):
            columns[f"L{j + 1}_{t}"] = complete.L[:, t, j]
        columns[f"Y_{t}"] = complete.Y[:, t]
    filled = {name: np.nan_to_num(values) for name, values in columns.items()}
    masks = impose(filled, setting4_rules(horizon), stream)

    L_mask = np.zeros((n, horizon + 1, 3), dtype=bool)
    Y_mask = np.zeros((n, horizon + 1), dtype=bool)
    for t in range(horizon + 1):
        for j in range(3):
            L_mask[:, t, j] = masks[f"L{j + 1}_{t}"]
        Y_mask[:, t] = masks[f"Y_{t}"]
    return LongitudinalDataset(
        complete.V, complete.L, complete.A, complete.C, complete.Y, L_mask, Y_mask,
        v_meta=V_META, l_meta=L_META,
    )


def _regime_mean(params: SemParameters, regime: RegimeSpec, subjects: int, stream: RngStream, horizon: int) -> float:
    steps = sem_steps(params, subjects, stream, horizon, regime)
    next(steps)
    last = None
    for step in steps:
        last = step
    return float(last.Y.mean())


def setting4_truth(
    regime,
    stream: RngStream,
    params: Optional[SemParameters] = None,
    horizon: int = HORIZON,
    subjects: int = 1_000_000,
    store=None,
) -> float:
    """Counterfactual mean outcome at the horizon under a regime, without censoring.

    ``store`` is any object with ``get(key)`` and ``put(key, value)``; results
    are cached there by SEM version, effects, regime, horizon, size and seed.
    """
    spec = regime if isinstance(regime, RegimeSpec) else regime_spec(regime)
    params = calibrate_sem() if params is None else params
    key = f"setting4-truth/{params.cache_key()}/{spec.name.value}/T{horizon}/N{subjects}/{stream.describe()}"
    if store is not None:
        cached = store.get(key)
        if cached is not None:
            return float(cached)
    value = _regime_mean(params, spec, subjects, stream, horizon)
    logger.info("oracle %s = %.6f", key, value)
    if store is not None:
        store.put(key, value)
    return value
