import logging
from typing import List, Optional

import numpy as np

from ..core.config import Settings
from ..core.dataset import IncompleteDataset, apply_transform, invert_transform
from ..core.exceptions import ImputationError
from ..core.models import ColumnKind, Transform
from ..stochastics.samplers import bootstrap_indices
from ..stochastics.streams import RngStream
from .base import ImputationEngine
from .em import draw_missing, em_fit

logger = logging.getLogger(__name__)


class EmbEngine(ImputationEngine):
    """Bootstrap-EM imputation: one bootstrap sample and one EM fit per imputation.

    Each imputation m resamples the rows (with their missingness), fits the
    normal model by EM on the resample, and fills the original dataset's
    masked cells with draws from the fitted conditional normals. Columns are
    moved to the model scale by their declared transform first.
    """

    name = "emb"

    def __init__(self, tol: Optional[float] = None, max_iter: Optional[int] = None, ridge: Optional[float] = None):
        settings = Settings()
        self.tol = settings.em_tol if tol is None else tol
        self.max_iter = settings.em_max_iter if max_iter is None else max_iter
        self.ridge = settings.em_ridge if ridge is None else ridge

    def impute(self, dataset: IncompleteDataset, M: int, stream: RngStream) -> List[IncompleteDataset]:
        self._check_m(M)
        if dataset.is_complete:
            return [dataset] * M

        latent = self._to_latent(dataset)
        binary = np.array([meta.kind == ColumnKind.BINARY for meta in dataset.column_meta])
        completions = []
        for m in range(M):
            lane = stream.child("imputation", m)
            rows = bootstrap_indices(lane.child("bootstrap"), dataset.n_rows)
            drawn = self._impute_once(latent, dataset.mask, binary, rows, lane.child("draw"))
            completions.append(self._from_latent(dataset, drawn))
        return completions

    def _to_latent(self, dataset: IncompleteDataset) -> np.ndarray:
        latent = np.array(dataset.values)
        for j, meta in enumerate(dataset.column_meta):
            if meta.transform != Transform.NONE:
                latent[:, j] = apply_transform(latent[:, j], meta.transform)
        return latent

    def _impute_once(self, latent, mask, binary, rows, stream: RngStream) -> np.ndarray:
        sample_values = latent[rows]
        sample_mask = mask[rows]
        n_cols = latent.shape[1]

        constants = {}
        active = []
        for j in range(n_cols):
            observed = sample_values[~sample_mask[:, j], j]
            if observed.size == 0:
                raise ImputationError(f"column {j} has no observed values in the bootstrap sample")
            if np.ptp(observed) == 0.0:
                constants[j] = float(observed[0])
            else:
                active.append(j)
        active = np.asarray(active, dtype=np.intp)

        completed = np.where(mask, 0.0, latent)
        for j, value in constants.items():
            completed[mask[:, j], j] = value

        if active.size:
            boot = IncompleteDataset(
                sample_values[:, active], sample_mask[:, active], validate=False
            )
            params = em_fit(boot, tol=self.tol, max_iter=self.max_iter, ridge=self.ridge)
            logger.debug("EM on %d active columns: %d iterations, converged=%s",
                         active.size, params.iterations, params.converged)
            drawn = draw_missing(
                latent[:, active], mask[:, active], params, stream.generator(), binary[active], self.ridge
            )
            completed[:, active] = drawn
        return completed

    def _from_latent(self, dataset: IncompleteDataset, drawn: np.ndarray) -> IncompleteDataset:
        values = np.array(dataset.values)
        for j, meta in enumerate(dataset.column_meta):
            cells = dataset.mask[:, j]
            if not cells.any():
                continue
            filled = invert_transform(drawn[cells, j], meta.transform)
            if meta.kind == ColumnKind.COUNT:
                filled = np.clip(np.rint(filled), 0.0, None)
            values[cells, j] = filled
        return dataset.with_completed(values)

    def __repr__(self) -> str:
        return f"EmbEngine(tol={self.tol}, max_iter={self.max_iter}, ridge={self.ridge})"


def emb_impute(
    dataset: IncompleteDataset,
    M: int,
    stream: RngStream,
    tol: float = 1e-8,
    max_iter: int = 1000,
) -> List[IncompleteDataset]:
    return EmbEngine(tol=tol, max_iter=max_iter).impute(dataset, M, stream)
