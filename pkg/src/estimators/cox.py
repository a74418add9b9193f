import logging
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..core.dataset import EstimateVector, IncompleteDataset
from ..core.exceptions import EstimationError, NonConvergenceError, SeparationError
from ..core.models import Transform
from .base import TabularEstimator

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 50
MAX_HALVINGS = 10
SCORE_TOLERANCE = 1e-8
ACCEPT_TOLERANCE = 1e-6
SEPARATION_BOUND = 20.0


class _BreslowTerms:
    """Risk-set sums for the Breslow partial likelihood, reused across iterations"""

    def __init__(self, times: np.ndarray, events: np.ndarray, X: np.ndarray):
        order = np.argsort(-times, kind="mergesort")
        self.X = X[order]
        self.events = events[order]
        sorted_times = times[order]
        ascending = sorted_times[::-1]
        # last position, in descending order, of the block of subjects with time >= t_i
        self.risk_end = times.size - np.searchsorted(ascending, sorted_times, side="left") - 1

    def evaluate(self, beta: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        eta = self.X @ beta
        shift = float(eta.max())
        w = np.exp(eta - shift)
        s0 = np.cumsum(w)[self.risk_end]
        s1 = np.cumsum(w[:, None] * self.X, axis=0)[self.risk_end]
        s2 = np.cumsum(w[:, None, None] * self.X[:, :, None] * self.X[:, None, :], axis=0)[self.risk_end]

        e = self.events
        mean = s1[e] / s0[e][:, None]
        loglik = float(np.sum(eta[e] - shift - np.log(s0[e])))
        score = np.sum(self.X[e] - mean, axis=0)
        information = np.sum(s2[e] / s0[e][:, None, None] - mean[:, :, None] * mean[:, None, :], axis=0)
        return loglik, score, information


def cox_fit(times, events, X) -> EstimateVector:
    """Breslow partial-likelihood Cox fit by Newton-Raphson with step halving"""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if times.shape != events.shape or X.shape[0] != times.shape[0]:
        raise EstimationError("times, events and covariates disagree in length")
    if not events.any():
        raise EstimationError("Cox fit needs at least one event")
    if np.any(times <= 0) or not np.all(np.isfinite(times)):
        raise EstimationError("survival times must be positive and finite")

    terms = _BreslowTerms(times, events, X)
    beta = np.zeros(X.shape[1])
    loglik, score, information = terms.evaluate(beta)

    for iteration in range(1, MAX_ITERATIONS + 1):
        if np.max(np.abs(score)) < SCORE_TOLERANCE:
            break
        try:
            step = np.linalg.solve(information, score)
        except np.linalg.LinAlgError:
            raise NonConvergenceError("observed information is singular") from None

        for _ in range(MAX_HALVINGS + 1):
            candidate = beta + step
            cand_loglik, cand_score, cand_info = terms.evaluate(candidate)
            if cand_loglik >= loglik:
                break
            step = step / 2.0
        else:
            if np.max(np.abs(score)) < ACCEPT_TOLERANCE:
                break
            raise NonConvergenceError(f"no ascent after {MAX_HALVINGS} step halvings at iteration {iteration}")

        beta, loglik, score, information = candidate, cand_loglik, cand_score, cand_info
        if np.any(np.abs(beta) > SEPARATION_BOUND):
            raise SeparationError(f"separation: coefficient diverging (|beta| > {SEPARATION_BOUND})")
    else:
        if np.max(np.abs(score)) >= ACCEPT_TOLERANCE:
            raise NonConvergenceError(f"Cox fit did not converge in {MAX_ITERATIONS} iterations")
        logger.debug("Cox fit accepted at the iteration cap with max|score|=%.2e", np.max(np.abs(score)))

    try:
        cov = np.linalg.inv(information)
        np.linalg.cholesky(information)
    except np.linalg.LinAlgError:
        raise NonConvergenceError("observed information is not positive definite at the solution") from None
    return EstimateVector(beta, (cov + cov.T) / 2.0)


class CoxEstimator(TabularEstimator):
    name = "cox"
    has_analytic_cov = True

    def __init__(self, time: str = "time", event: str = "event",
                 covariates: Optional[Sequence[str]] = None,
                 transforms: Optional[Mapping[str, Transform]] = None):
        super().__init__(covariates, transforms)
        self.time = time
        self.event = event

    @property
    def coordinates(self) -> List[str]:
        return list(self.covariates or [])

    def estimate(self, dataset: IncompleteDataset) -> EstimateVector:
        covariates = self._resolve_covariates(dataset, exclude=[self.time, self.event])
        if self.covariates is None:
            self.covariates = list(covariates)
        X = self._design(dataset, covariates)
        return cox_fit(dataset.column(self.time), dataset.column(self.event) > 0.5, X)
