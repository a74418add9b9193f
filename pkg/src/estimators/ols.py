from typing import List, Mapping, Optional, Sequence

import numpy as np

from ..core.dataset import EstimateVector, IncompleteDataset
from ..core.exceptions import RankDeficiencyError
from ..core.models import Transform
from .base import TabularEstimator

RANK_CONDITION = 1e10


def ols_fit(X, y) -> EstimateVector:
    """Least squares with the classical covariance s^2 (X'X)^-1, s^2 = RSS/(n-p)"""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise RankDeficiencyError("design and response disagree in shape")
    n, p = X.shape
    if n <= p:
        raise RankDeficiencyError(f"need more rows than columns (n={n}, p={p})")
    condition = np.linalg.cond(X)
    if not np.isfinite(condition) or condition > RANK_CONDITION:
        raise RankDeficiencyError(f"design matrix is rank deficient (condition number {condition:.3g})")

    xtx_inv = np.linalg.inv(X.T @ X)
    theta, *_ = np.linalg.lstsq(X, y, rcond=None)
    residuals = y - X @ theta
    s2 = float(residuals @ residuals) / (n - p)
    cov = s2 * xtx_inv
    return EstimateVector(theta, (cov + cov.T) / 2.0)


class OlsEstimator(TabularEstimator):
    name = "ols"
    has_analytic_cov = True

    def __init__(self, outcome: str = "y", covariates: Optional[Sequence[str]] = None,
                 transforms: Optional[Mapping[str, Transform]] = None):
        super().__init__(covariates, transforms)
        self.outcome = outcome
        self._coordinates: Optional[List[str]] = None

    @property
    def coordinates(self) -> List[str]:
        if self._coordinates is None:
            return ["intercept"] + (self.covariates or [])
        return self._coordinates

    def estimate(self, dataset: IncompleteDataset) -> EstimateVector:
        covariates = self._resolve_covariates(dataset, exclude=[self.outcome])
        self._coordinates = ["intercept"] + list(covariates)
        X = np.column_stack([np.ones(dataset.n_rows), self._design(dataset, covariates)])
        return ols_fit(X, dataset.column(self.outcome))
