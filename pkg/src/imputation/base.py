from abc import ABC, abstractmethod
from typing import List, Union

from ..core.dataset import IncompleteDataset, LongitudinalDataset
from ..core.exceptions import ImputationError
from ..stochastics.streams import RngStream


class ImputationEngine(ABC):
    """Completes a dataset M times; observed cells are never touched"""

    name: str = "engine"

    @abstractmethod
    def impute(self, dataset: IncompleteDataset, M: int, stream: RngStream) -> List[IncompleteDataset]:
        pass

    def _check_m(self, M: int) -> None:
        if M < 1:
            raise ImputationError("M must be a positive integer")

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}()"


class IdentityEngine(ImputationEngine):
    """Passes complete data through unchanged"""

    name = "identity"

    def impute(self, dataset, M, stream):
        self._check_m(M)
        if not dataset.is_complete:
            raise ImputationError("identity engine cannot fill missing cells")
        return [dataset] * M


class LongitudinalEngine:
    """Runs a tabular engine on the wide layout of longitudinal data"""

    def __init__(self, inner: ImputationEngine):
        self.inner = inner
        self.name = inner.name

    def impute(self, dataset: Union[LongitudinalDataset, IncompleteDataset], M: int, stream: RngStream):
        if isinstance(dataset, IncompleteDataset):
            return self.inner.impute(dataset, M, stream)
        if dataset.is_complete:
            return [dataset] * M
        completions = self.inner.impute(dataset.to_wide(), M, stream)
        return [dataset.with_wide(completed) for completed in completions]

    def __repr__(self) -> str:
        return f"LongitudinalEngine({self.inner!r})"
