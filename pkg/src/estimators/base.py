from abc import ABC, abstractmethod
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from ..core.dataset import EstimateVector, IncompleteDataset, apply_transform
from ..core.exceptions import EstimationError
from ..core.models import Transform


class Estimator(ABC):
    """Maps a complete dataset to an EstimateVector"""

    name: str = "estimator"
    has_analytic_cov: bool = False

    @abstractmethod
    def estimate(self, dataset) -> EstimateVector:
        pass

    @property
    @abstractmethod
    def coordinates(self) -> List[str]:
        pass

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(coordinates={self.coordinates})"


class TabularEstimator(Estimator):
    """Shared column selection for estimators over an IncompleteDataset"""

    def __init__(self, covariates: Optional[Sequence[str]] = None,
                 transforms: Optional[Mapping[str, Transform]] = None):
        self.covariates = list(covariates) if covariates is not None else None
        self.transforms: Dict[str, Transform] = {
            name: Transform(value) for name, value in (transforms or {}).items()
        }

    def _resolve_covariates(self, dataset: IncompleteDataset, exclude: Sequence[str]) -> List[str]:
        if self.covariates is not None:
            return self.covariates
        return [name for name in dataset.names if name not in exclude]

    def _design(self, dataset: IncompleteDataset, covariates: Sequence[str]) -> np.ndarray:
        if not dataset.is_complete:
            raise EstimationError("estimators need a complete dataset")
        columns = []
        for name in covariates:
            column = dataset.column(name)
            columns.append(apply_transform(column, self.transforms.get(name, Transform.NONE)))
        return np.column_stack(columns) if columns else np.empty((dataset.n_rows, 0))
