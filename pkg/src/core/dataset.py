"""Dataset and estimate value types shared by every layer.

All arrays are copied on construction and marked read-only, so instances can
be handed to worker processes and reused across imputations without copies.
Masked cells hold NaN; nothing reads them, algorithms consult the mask.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd

from .exceptions import DatasetValidationError
from .models import ColumnKind, ColumnMeta, MethodTag, Transform


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


def apply_transform(values: np.ndarray, transform: Transform) -> np.ndarray:
    """Map observed values onto the scale an analysis or imputation model uses"""
    if transform == Transform.NONE:
        return values
    finite = values[np.isfinite(values)]
    if transform in (Transform.LOG, Transform.LOG10):
        if np.any(finite <= 0):
            raise DatasetValidationError(f"{transform.value} transform needs positive values")
        return np.log(values) if transform == Transform.LOG else np.log10(values)
    if np.any(finite < 0):
        raise DatasetValidationError("sqrt transform needs non-negative values")
    return np.sqrt(values)


def invert_transform(values: np.ndarray, transform: Transform) -> np.ndarray:
    if transform == Transform.LOG:
        return np.exp(values)
    if transform == Transform.LOG10:
        return np.power(10.0, values)
    if transform == Transform.SQRT:
        return np.square(np.clip(values, 0.0, None))
    return values


def infer_column_meta(name: str, observed: np.ndarray) -> ColumnMeta:
    if observed.size and np.all(np.isin(observed, (0.0, 1.0))):
        return ColumnMeta(name=name, kind=ColumnKind.BINARY)
    return ColumnMeta(name=name)


class IncompleteDataset:
    """Rectangular numeric table with a missingness mask (True = missing)"""

    __slots__ = ("values", "mask", "column_meta", "_index")

    def __init__(
        self,
        values,
        mask=None,
        column_meta: Optional[Sequence[ColumnMeta]] = None,
        validate: bool = True,
    ):
        self.values = np.array(values, dtype=float)
        self.mask = np.isnan(self.values) if mask is None else np.array(mask, dtype=bool)
        if column_meta is None and self.values.ndim == 2:
            column_meta = [ColumnMeta(name=f"x{j}") for j in range(self.values.shape[1])]
        self.column_meta = tuple(column_meta or ())
        if validate:
            validate_dataset(self)
        elif self.values.shape != self.mask.shape:
            raise DatasetValidationError("dimension mismatch between values and mask")
        self.values[self.mask] = np.nan
        _frozen(self.values)
        _frozen(self.mask)
        self._index = {meta.name: j for j, meta in enumerate(self.column_meta)}

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> List[str]:
        return [meta.name for meta in self.column_meta]

    @property
    def is_complete(self) -> bool:
        return not self.mask.any()

    def column_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DatasetValidationError(f"unknown column '{name}'") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def missing_fraction(self, column: int) -> float:
        return missing_fraction(self, column)

    def take(self, rows) -> "IncompleteDataset":
        """Row resample; masks travel with their rows"""
        rows = np.asarray(rows, dtype=np.intp)
        return IncompleteDataset(self.values[rows], self.mask[rows], self.column_meta, validate=False)

    def with_completed(self, values) -> "IncompleteDataset":
        """Return a complete dataset whose observed cells equal this one's"""
        completed = np.array(values, dtype=float)
        if completed.shape != self.values.shape:
            raise DatasetValidationError("dimension mismatch between values and mask")
        observed = ~self.mask
        if not np.array_equal(completed[observed], self.values[observed]):
            raise DatasetValidationError("completion altered an observed cell")
        if not np.all(np.isfinite(completed)):
            raise DatasetValidationError("completion left non-finite cells")
        return IncompleteDataset(completed, np.zeros_like(self.mask), self.column_meta, validate=False)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(np.array(self.values), columns=self.names)

    @classmethod
    def from_frame(
        cls, frame: pd.DataFrame, column_meta: Optional[Sequence[ColumnMeta]] = None
    ) -> "IncompleteDataset":
        values = frame.to_numpy(dtype=float)
        mask = frame.isna().to_numpy()
        if column_meta is None:
            column_meta = [
                infer_column_meta(str(name), values[~mask[:, j], j])
                for j, name in enumerate(frame.columns)
            ]
        return cls(values, mask, column_meta)

    def __repr__(self) -> str:
        return f"IncompleteDataset(n={self.n_rows}, columns={self.names}, missing={int(self.mask.sum())})"


def validate_dataset(dataset: IncompleteDataset) -> None:
    """Raise DatasetValidationError naming the first violated invariant"""
    values, mask = dataset.values, dataset.mask
    if values.ndim != 2 or values.shape != mask.shape:
        raise DatasetValidationError("dimension mismatch between values and mask")
    if len(dataset.column_meta) != values.shape[1]:
        raise DatasetValidationError("dimension mismatch between values and column_meta")
    if len({meta.name for meta in dataset.column_meta}) != len(dataset.column_meta):
        raise DatasetValidationError("duplicate column names")
    if values.shape[0] == 0:
        raise DatasetValidationError("dataset has no rows")
    for j, meta in enumerate(dataset.column_meta):
        if mask[:, j].all():
            raise DatasetValidationError(f"fully-missing column '{meta.name}'")
    if not np.all(np.isfinite(values[~mask])):
        raise DatasetValidationError("non-finite observed value")


validate = validate_dataset


def missing_fraction(dataset: IncompleteDataset, column: int) -> float:
    if not 0 <= column < dataset.n_cols:
        raise DatasetValidationError(f"column index {column} out of range")
    return float(dataset.mask[:, column].sum()) / dataset.n_rows


@dataclass(frozen=True)
class EstimateVector:
    theta_hat: np.ndarray
    cov_hat: Optional[np.ndarray] = None

    def __post_init__(self):
        theta = _frozen(np.atleast_1d(np.array(self.theta_hat, dtype=float)))
        object.__setattr__(self, "theta_hat", theta)
        if self.cov_hat is None:
            return
        cov = np.atleast_2d(np.array(self.cov_hat, dtype=float))
        k = theta.shape[0]
        if cov.shape != (k, k):
            raise DatasetValidationError(f"cov_hat must be {k}x{k}")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-8 * scale):
            raise DatasetValidationError("cov_hat is not symmetric")
        if np.any(np.diag(cov) < 0):
            raise DatasetValidationError("cov_hat has a negative variance")
        object.__setattr__(self, "cov_hat", _frozen((cov + cov.T) / 2.0))

    @property
    def k(self) -> int:
        return self.theta_hat.shape[0]


@dataclass(frozen=True)
class IntervalEstimate:
    lower: np.ndarray
    upper: np.ndarray
    method_tag: MethodTag
    alpha: float
    M: int
    B: int
    df: Optional[np.ndarray] = None
    point: Optional[np.ndarray] = None
    se: Optional[np.ndarray] = None
    dropped_replicates: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)
    # M x B x k for MI Boot, B x M x k for Boot MI; NaN rows for failed replicates
    replicates: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        lower = _frozen(np.atleast_1d(np.array(self.lower, dtype=float)))
        upper = _frozen(np.atleast_1d(np.array(self.upper, dtype=float)))
        if lower.shape != upper.shape:
            raise DatasetValidationError("lower and upper differ in length")
        if np.any(lower > upper):
            raise DatasetValidationError("interval with lower bound above upper bound")
        if not 0.0 < self.alpha < 0.5:
            raise DatasetValidationError("alpha must lie in (0, 0.5)")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        for name in ("df", "point", "se"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _frozen(np.atleast_1d(np.array(value, dtype=float))))

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def covers(self, truth) -> np.ndarray:
        truth = np.asarray(truth, dtype=float)
        return (self.lower <= truth) & (truth <= self.upper)

    def replicate_frame(self, coordinates: Sequence[str]) -> pd.DataFrame:
        """Raw replicate estimates as a table.

        MI Boot variants give one row per (imputation, bootstrap) pair. Boot MI
        variants give one row per bootstrap sample holding the estimate averaged
        over its M imputations.
        """
        if self.replicates is None:
            raise DatasetValidationError(f"method '{self.method_tag.value}' keeps no bootstrap replicates")
        coordinates = list(coordinates)
        first, second, k = self.replicates.shape
        if self.method_tag in (MethodTag.MI_BOOT, MethodTag.MI_BOOT_PS):
            frame = pd.DataFrame(self.replicates.reshape(first * second, k), columns=coordinates)
            frame.insert(0, "bootstrap", np.tile(np.arange(1, second + 1), first))
            frame.insert(0, "imputation", np.repeat(np.arange(1, first + 1), second))
            return frame
        frame = pd.DataFrame(self.replicates.mean(axis=1), columns=coordinates)
        frame.insert(0, "bootstrap", np.arange(1, first + 1))
        return frame

    def to_record(self) -> Dict[str, Any]:
        def listed(array):
            if array is None:
                return None
            return [float(x) for x in array]

        df = None
        if self.df is not None:
            df = ["unbounded" if math.isinf(x) else float(x) for x in self.df]
        return {
            "method": self.method_tag.value,
            "point": listed(self.point),
            "lower": listed(self.lower),
            "upper": listed(self.upper),
            "se": listed(self.se),
            "df": df,
            "alpha": self.alpha,
            "M": self.M,
            "B": self.B,
            "dropped_replicates": self.dropped_replicates,
            "metadata": self.metadata,
        }


class LongitudinalDataset:
    """Subject-major longitudinal data held as dense arrays.

    ``L`` is n x (T+1) x q, ``A``/``C``/``Y`` are n x (T+1), ``V`` is n x v.
    A record at t is present iff C_s = 0 for every s < t. When C_t = 1 the
    record still carries L_t and A_t but Y_t is absent. Absent cells hold NaN.
    """

    def __init__(
        self,
        V,
        L,
        A,
        C,
        Y,
        L_mask=None,
        Y_mask=None,
        v_meta: Optional[Sequence[ColumnMeta]] = None,
        l_meta: Optional[Sequence[ColumnMeta]] = None,
        validate: bool = True,
    ):
        self.L = np.array(L, dtype=float)
        if self.L.ndim == 2:
            self.L = self.L[:, :, None]
        n, horizon_plus_one, q = self.L.shape
        self.V = np.zeros((n, 0)) if V is None else np.array(V, dtype=float).reshape(n, -1)
        self.A = np.array(A, dtype=float)
        self.C = np.array(C, dtype=float)
        self.Y = np.array(Y, dtype=float)
        self.L_mask = np.isnan(self.L) if L_mask is None else np.array(L_mask, dtype=bool).reshape(self.L.shape)
        self.Y_mask = np.isnan(self.Y) if Y_mask is None else np.array(Y_mask, dtype=bool)
        self.v_meta = tuple(v_meta or [ColumnMeta(name=f"V{j + 1}") for j in range(self.V.shape[1])])
        self.l_meta = tuple(l_meta or [ColumnMeta(name=f"L{j + 1}") for j in range(q)])

        for name in ("A", "C", "Y", "Y_mask"):
            if getattr(self, name).shape != (n, horizon_plus_one):
                raise DatasetValidationError(f"dimension mismatch in {name}")
        if self.L_mask.shape != self.L.shape:
            raise DatasetValidationError("dimension mismatch in L_mask")
        if len(self.v_meta) != self.V.shape[1] or len(self.l_meta) != q:
            raise DatasetValidationError("dimension mismatch in column metadata")

        self.present = np.ones((n, horizon_plus_one), dtype=bool)
        censored = np.nan_to_num(self.C, nan=1.0) == 1.0
        for t in range(1, horizon_plus_one):
            self.present[:, t] = self.present[:, t - 1] & ~censored[:, t - 1]
        self.y_available = self.present & ~censored

        absent = ~self.present
        self.L[absent] = np.nan
        self.L_mask[absent] = True
        self.A[absent] = np.nan
        self.C[absent] = np.nan
        self.Y[~self.y_available] = np.nan
        self.Y_mask[~self.y_available] = True
        self.L[self.L_mask] = np.nan
        self.Y[self.Y_mask] = np.nan

        if validate:
            self._validate()
        for array in (self.V, self.L, self.A, self.C, self.Y, self.L_mask, self.Y_mask,
                      self.present, self.y_available):
            _frozen(array)

    def _validate(self) -> None:
        if self.n_rows == 0:
            raise DatasetValidationError("dataset has no subjects")
        if not np.all(np.isfinite(self.V)):
            raise DatasetValidationError("baseline covariates must be fully observed")
        for name in ("A", "C"):
            values = getattr(self, name)[self.present]
            if not np.all(np.isin(values, (0.0, 1.0))):
                raise DatasetValidationError(f"{name} must be binary on every present record")
        if not np.all(np.isfinite(self.L[~self.L_mask])) or not np.all(np.isfinite(self.Y[~self.Y_mask])):
            raise DatasetValidationError("non-finite observed value")

    @property
    def n_rows(self) -> int:
        return self.L.shape[0]

    @property
    def horizon(self) -> int:
        return self.L.shape[1] - 1

    @property
    def q(self) -> int:
        return self.L.shape[2]

    @property
    def is_complete(self) -> bool:
        return not (self.L_mask[self.present].any() or self.Y_mask[self.y_available].any())

    def take(self, rows) -> "LongitudinalDataset":
        rows = np.asarray(rows, dtype=np.intp)
        return LongitudinalDataset(
            self.V[rows], self.L[rows], self.A[rows], self.C[rows], self.Y[rows],
            self.L_mask[rows], self.Y_mask[rows], self.v_meta, self.l_meta, validate=False,
        )

    def records(self, subject: int) -> Iterator[Dict[str, Any]]:
        """Per-time records for one subject, in increasing t, stopping at censoring"""
        for t in range(self.horizon + 1):
            if not self.present[subject, t]:
                return
            yield {
                "t": t,
                "L": np.where(self.L_mask[subject, t], np.nan, self.L[subject, t]),
                "L_mask": self.L_mask[subject, t].copy(),
                "A": int(self.A[subject, t]),
                "C": int(self.C[subject, t]),
                "Y": None if not self.y_available[subject, t] else float(self.Y[subject, t]),
                "Y_mask": bool(self.Y_mask[subject, t]) and bool(self.y_available[subject, t]),
            }

    def wide_meta(self) -> List[ColumnMeta]:
        meta = list(self.v_meta)
        for t in range(self.horizon + 1):
            meta.extend(
                ColumnMeta(name=f"{m.name}_{t}", kind=m.kind, transform=m.transform) for m in self.l_meta
            )
            meta.append(ColumnMeta(name=f"A_{t}", kind=ColumnKind.BINARY))
            meta.append(ColumnMeta(name=f"Y_{t}"))
        return meta

    def to_wide(self) -> IncompleteDataset:
        """One row per subject; absent and masked cells become masked cells"""
        n, q = self.n_rows, self.q
        blocks = [self.V]
        masks = [np.zeros_like(self.V, dtype=bool)]
        for t in range(self.horizon + 1):
            blocks.extend([self.L[:, t, :], self.A[:, t:t + 1], self.Y[:, t:t + 1]])
            masks.extend([
                self.L_mask[:, t, :],
                ~self.present[:, t:t + 1],
                self.Y_mask[:, t:t + 1],
            ])
        values = np.hstack(blocks).reshape(n, -1)
        mask = np.hstack(masks).reshape(n, -1)
        return IncompleteDataset(values, mask, self.wide_meta(), validate=False)

    def with_wide(self, completed: IncompleteDataset) -> "LongitudinalDataset":
        """Fill masked L and Y cells from a completed wide table"""
        v = self.V.shape[1]
        q = self.q
        stride = q + 2
        values = completed.values
        L = np.array(self.L)
        Y = np.array(self.Y)
        for t in range(self.horizon + 1):
            start = v + t * stride
            L[:, t, :] = np.where(self.L_mask[:, t, :], values[:, start:start + q], self.L[:, t, :])
            Y[:, t] = np.where(self.Y_mask[:, t], values[:, start + q + 1], self.Y[:, t])
        L_mask = np.zeros_like(self.L_mask)
        Y_mask = np.zeros_like(self.Y_mask)
        return LongitudinalDataset(
            self.V, L, self.A, self.C, Y, L_mask, Y_mask, self.v_meta, self.l_meta, validate=False,
        )

    def to_long_frame(self) -> pd.DataFrame:
        """One row per present (subject, t) record; masked and absent cells are NaN"""
        subjects, times = np.nonzero(self.present)
        frame = pd.DataFrame({"id": subjects, "t": times})
        for j, meta in enumerate(self.v_meta):
            frame[meta.name] = self.V[subjects, j]
        for j, meta in enumerate(self.l_meta):
            frame[meta.name] = np.where(self.L_mask[subjects, times, j], np.nan, self.L[subjects, times, j])
        frame["A"] = self.A[subjects, times]
        frame["C"] = self.C[subjects, times]
        frame["Y"] = np.where(self.Y_mask[subjects, times], np.nan, self.Y[subjects, times])
        return frame

    @classmethod
    def from_long_frame(
        cls,
        frame: pd.DataFrame,
        v_meta: Optional[Sequence[ColumnMeta]] = None,
        l_meta: Optional[Sequence[ColumnMeta]] = None,
    ) -> "LongitudinalDataset":
        """Inverse of to_long_frame; V and L columns are recognised by their prefix"""
        required = {"id", "t", "A", "C", "Y"}
        if not required.issubset(frame.columns):
            raise DatasetValidationError(f"long format needs columns {sorted(required)}")
        v_names = [m.name for m in v_meta] if v_meta else [c for c in frame.columns if str(c).startswith("V")]
        l_names = [m.name for m in l_meta] if l_meta else [c for c in frame.columns if str(c).startswith("L")]
        if not l_names:
            raise DatasetValidationError("long format needs at least one L column")
        ids, subjects = np.unique(frame["id"].to_numpy(), return_inverse=True)
        times = frame["t"].to_numpy(dtype=int)
        if np.any(times < 0):
            raise DatasetValidationError("time indices must be non-negative")
        n, horizon = ids.size, int(times.max())
        if pd.DataFrame({"s": subjects, "t": times}).duplicated().any():
            raise DatasetValidationError("duplicate (id, t) records")

        L = np.full((n, horizon + 1, len(l_names)), np.nan)
        A = np.full((n, horizon + 1), np.nan)
        C = np.ones((n, horizon + 1))
        Y = np.full((n, horizon + 1), np.nan)
        L[subjects, times, :] = frame[l_names].to_numpy(dtype=float)
        A[subjects, times] = frame["A"].to_numpy(dtype=float)
        C[subjects, times] = frame["C"].to_numpy(dtype=float)
        Y[subjects, times] = frame["Y"].to_numpy(dtype=float)
        V = np.zeros((n, len(v_names)))
        if v_names:
            V[subjects] = frame[v_names].to_numpy(dtype=float)
        return cls(
            V, L, A, C, Y,
            v_meta=v_meta or [ColumnMeta(name=name) for name in v_names],
            l_meta=l_meta or [ColumnMeta(name=name) for name in l_names],
        )

    def __repr__(self) -> str:
        return f"LongitudinalDataset(n={self.n_rows}, T={self.horizon}, q={self.q})"
