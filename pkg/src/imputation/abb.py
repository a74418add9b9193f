from typing import List, Optional, Sequence

import numpy as np

from ..core.dataset import IncompleteDataset
from ..core.exceptions import ImputationError, MissingDonorError
from ..stochastics.streams import RngStream
from .base import ImputationEngine


class AbbEngine(ImputationEngine):
    """Approximate Bayesian Bootstrap hot deck.

    Within each stratum and column: resample the observed donors with
    replacement, then fill every missing cell by a uniform draw from that
    resampled pool. Strata come from explicit row labels or from the values
    of a fully observed column; by default the whole table is one stratum.
    """

    name = "abb"

    def __init__(self, strata_column: Optional[str] = None):
        self.strata_column = strata_column

    def impute(
        self,
        dataset: IncompleteDataset,
        M: int,
        stream: RngStream,
        strata: Optional[Sequence] = None,
    ) -> List[IncompleteDataset]:
        self._check_m(M)
        if dataset.is_complete:
            return [dataset] * M

        labels = self._stratum_labels(dataset, strata)
        _, codes = np.unique(labels, return_inverse=True)
        codes = np.asarray(codes).reshape(-1)
        groups = [np.flatnonzero(codes == s) for s in range(codes.max() + 1)]

        completions = []
        for m in range(M):
            values = np.array(dataset.values)
            for s, rows in enumerate(groups):
                for j in range(dataset.n_cols):
                    missing = rows[dataset.mask[rows, j]]
                    if missing.size == 0:
                        continue
                    donors = dataset.values[rows[~dataset.mask[rows, j]], j]
                    if donors.size == 0:
                        raise MissingDonorError(s, dataset.column_meta[j].name)
                    gen = stream.child("imputation", m, "stratum", s, "column", j).generator()
                    pool = donors[gen.integers(0, donors.size, size=donors.size)]
                    values[missing, j] = pool[gen.integers(0, pool.size, size=missing.size)]
            completions.append(dataset.with_completed(values))
        return completions

    def _stratum_labels(self, dataset: IncompleteDataset, strata: Optional[Sequence]) -> np.ndarray:
        if strata is not None:
            labels = np.asarray(strata)
            if labels.shape != (dataset.n_rows,):
                raise ImputationError("strata must label every row")
            return labels
        if self.strata_column is None:
            return np.zeros(dataset.n_rows, dtype=int)
        j = dataset.column_index(self.strata_column)
        if dataset.mask[:, j].any():
            raise ImputationError(f"strata column '{self.strata_column}' has missing cells")
        return dataset.values[:, j]

    def __repr__(self) -> str:
        return f"AbbEngine(strata_column={self.strata_column!r})"


def abb_impute(
    dataset: IncompleteDataset,
    M: int,
    stream: RngStream,
    strata: Optional[Sequence] = None,
) -> List[IncompleteDataset]:
    return AbbEngine().impute(dataset, M, stream, strata=strata)
