"""Sequential (iterated conditional expectation) g-formula for longitudinal regimes."""
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from ..core.dataset import EstimateVector, LongitudinalDataset
from ..core.exceptions import EstimationError, PositivityError
from ..core.models import GformulaDesign, GformulaFitting, RegimeName
from .base import Estimator
from .ols import ols_fit


@dataclass(frozen=True)
class RegimeSpec:
    """Treatment rule under no censoring.

    The CD4 rule starts treatment the first time CD4 count (L column
    ``count_index``) drops below ``count_threshold`` or CD4 fraction (L column
    ``percent_index``) below ``percent_threshold``, and keeps it thereafter.
    """

    name: RegimeName
    count_threshold: float = 350.0
    percent_threshold: float = 0.15
    count_index: int = 0
    percent_index: int = 1

    def assign(self, data: LongitudinalDataset, t: int, rows: np.ndarray) -> np.ndarray:
        if self.name == RegimeName.ALWAYS:
            return np.ones(rows.size)
        if self.name == RegimeName.NEVER:
            return np.zeros(rows.size)
        history = data.L[rows, : t + 1, :]
        low = (history[:, :, self.count_index] < self.count_threshold) | (
            history[:, :, self.percent_index] < self.percent_threshold
        )
        return low.any(axis=1).astype(float)


def regime_spec(name) -> RegimeSpec:
    return RegimeSpec(name=RegimeName(name))


def linear_features(data: LongitudinalDataset, t: int, rows: np.ndarray, a_t: np.ndarray) -> np.ndarray:
    """[1, L_t, Y_{t-1}, L_{t-1}, A_t, A_{t-1}, sum_{s<t} A_s, V] for the given rows"""
    blocks = [np.ones((rows.size, 1)), data.L[rows, t, :]]
    if t >= 1:
        blocks.extend([data.Y[rows, t - 1:t], data.L[rows, t - 1, :]])
    blocks.append(np.asarray(a_t, dtype=float)[:, None])
    if t >= 1:
        blocks.append(data.A[rows, t - 1:t])
    if t >= 2:
        blocks.append(data.A[rows, :t].sum(axis=1, keepdims=True))
    blocks.append(data.V[rows])
    return np.hstack(blocks)


def _history_keys(data: LongitudinalDataset, t: int, rows: np.ndarray) -> np.ndarray:
    return np.hstack([data.V[rows], data.L[rows, : t + 1, :].reshape(rows.size, -1), data.A[rows, :t]])


def _check_positivity(t: int, observed_a: np.ndarray, assignment: np.ndarray) -> None:
    for value in np.unique(assignment):
        if not np.any(observed_a == value):
            raise PositivityError(t, int(value))


def _linear_step(data, t, fit_rows, pred_rows, q_fit, assignment) -> np.ndarray:
    fit_features = linear_features(data, t, fit_rows, data.A[fit_rows, t])
    pred_features = linear_features(data, t, pred_rows, assignment)
    keep = [0] + [j for j in range(1, fit_features.shape[1]) if np.ptp(fit_features[:, j]) > 0]
    fit = ols_fit(fit_features[:, keep], q_fit)
    return pred_features[:, keep] @ fit.theta_hat


def _saturated_step(data, t, fit_rows, pred_rows, q_fit, assignment) -> np.ndarray:
    fit_keys = _history_keys(data, t, fit_rows)
    names = [f"h{j}" for j in range(fit_keys.shape[1])] + ["a"]
    fitted = pd.DataFrame(np.column_stack([fit_keys, data.A[fit_rows, t]]), columns=names)
    fitted["q"] = q_fit
    cell_means = fitted.groupby(names, sort=False)["q"].mean().reset_index()
    wanted = pd.DataFrame(np.column_stack([_history_keys(data, t, pred_rows), assignment]), columns=names)
    merged = wanted.merge(cell_means, on=names, how="left")
    empty = merged["q"].isna().to_numpy()
    if empty.any():
        raise PositivityError(t, int(assignment[np.argmax(empty)]))
    return merged["q"].to_numpy()


def _follows_regime(data: LongitudinalDataset, regime: RegimeSpec, t: int, rows: np.ndarray) -> np.ndarray:
    """Mask of rows whose observed A_0..A_t all match the regime"""
    keep = np.ones(rows.size, dtype=bool)
    for s in range(t + 1):
        keep &= data.A[rows, s] == regime.assign(data, s, rows)
    return keep


def seq_gformula(
    data: LongitudinalDataset,
    regime: RegimeSpec,
    outcome_time: Optional[int] = None,
    design: GformulaDesign = GformulaDesign.LINEAR,
    fitting: GformulaFitting = GformulaFitting.RULE_CONSISTENT,
) -> EstimateVector:
    """Counterfactual mean of Y at ``outcome_time`` under ``regime`` with no censoring.

    Works backward from Q = Y_T among subjects uncensored through T. At each t
    the regression of Q_{t+1} is fitted on uncensored subjects whose treatment
    through t followed the regime, and evaluated with A_t set by the regime for
    every subject present at t who followed it through t-1. ``fitting="pooled"``
    fits on all uncensored subjects with A_t as a covariate and predicts for
    everyone present at t.
    """
    T = data.horizon if outcome_time is None else int(outcome_time)
    if not 0 <= T <= data.horizon:
        raise EstimationError(f"outcome_time {T} outside 0..{data.horizon}")
    if not data.is_complete:
        raise EstimationError("sequential g-formula needs complete (imputed) data")
    step = _saturated_step if GformulaDesign(design) == GformulaDesign.SATURATED else _linear_step
    rule_consistent = GformulaFitting(fitting) == GformulaFitting.RULE_CONSISTENT

    q = np.full(data.n_rows, np.nan)
    observed = data.y_available[:, T]
    q[observed] = data.Y[observed, T]
    for t in range(T, -1, -1):
        fit_rows = np.flatnonzero(~np.isnan(q))
        pred_rows = np.flatnonzero(data.present[:, t])
        if rule_consistent:
            fit_rows = fit_rows[_follows_regime(data, regime, t, fit_rows)]
            pred_rows = pred_rows[_follows_regime(data, regime, t - 1, pred_rows)]
        assignment = regime.assign(data, t, pred_rows)
        if fit_rows.size == 0:
            raise PositivityError(t, int(assignment[0]) if assignment.size else -1)
        _check_positivity(t, data.A[fit_rows, t], assignment)
        q_t = step(data, t, fit_rows, pred_rows, q[fit_rows], assignment)
        q = np.full(data.n_rows, np.nan)
        q[pred_rows] = q_t
    return EstimateVector(np.array([float(np.nanmean(q))]))


class SeqGformulaEstimator(Estimator):
    name = "seqg"
    has_analytic_cov = False

    def __init__(self, regimes: Sequence = (RegimeName.ALWAYS, RegimeName.NEVER),
                 outcome_time: Optional[int] = None, design: GformulaDesign = GformulaDesign.LINEAR,
                 fitting: GformulaFitting = GformulaFitting.RULE_CONSISTENT):
        self.regimes = [regime_spec(r) for r in regimes]
        self.outcome_time = outcome_time
        self.design = GformulaDesign(design)
        self.fitting = GformulaFitting(fitting)

    @property
    def coordinates(self) -> List[str]:
        return [f"psi_{regime.name.value}" for regime in self.regimes]

    def estimate(self, dataset: LongitudinalDataset) -> EstimateVector:
        if not isinstance(dataset, LongitudinalDataset):
            raise EstimationError("sequential g-formula needs longitudinal data")
        values = [
            seq_gformula(dataset, regime, self.outcome_time, self.design, self.fitting).theta_hat[0]
            for regime in self.regimes
        ]
        return EstimateVector(np.array(values))
