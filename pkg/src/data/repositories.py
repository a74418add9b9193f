import hashlib
import io
import json
import os
from typing import Any, Dict, List, Optional

import pandas as pd

from ..core.config import Settings
from ..core.dataset import IncompleteDataset, IntervalEstimate, LongitudinalDataset
from ..core.exceptions import DatasetValidationError
from ..core.models import ColumnMeta
from .storage import StorageHandler

MISSING_TOKEN = "NA"
META_SUFFIX = ".meta.json"


class BaseRepository:
    def __init__(self):
        self.store = StorageHandler()


def dataset_from_csv_text(text: str, column_meta: Optional[List[ColumnMeta]] = None) -> IncompleteDataset:
    """Parse comma-separated text with an exact 'NA' missing token"""
    try:
        frame = pd.read_csv(io.StringIO(text), na_values=[MISSING_TOKEN], keep_default_na=False)
    except (ValueError, pd.errors.ParserError) as exc:
        raise DatasetValidationError(f"unreadable dataset: {exc}") from None
    non_numeric = [name for name in frame.columns if not pd.api.types.is_numeric_dtype(frame[name])]
    if non_numeric:
        raise DatasetValidationError(f"non-numeric columns: {non_numeric}")
    return IncompleteDataset.from_frame(frame, column_meta)


def dataset_to_csv_text(dataset: IncompleteDataset) -> str:
    return dataset.to_frame().to_csv(index=False, na_rep=MISSING_TOKEN, float_format="%.17g")


def longitudinal_from_csv_text(text: str, meta: Optional[Dict[str, Any]] = None) -> LongitudinalDataset:
    """Parse the long layout: one row per (id, t) record"""
    try:
        frame = pd.read_csv(io.StringIO(text), na_values=[MISSING_TOKEN], keep_default_na=False)
    except (ValueError, pd.errors.ParserError) as exc:
        raise DatasetValidationError(f"unreadable dataset: {exc}") from None
    v_meta = l_meta = None
    if meta:
        v_meta = [ColumnMeta.model_validate(item) for item in meta.get("v_meta", [])]
        l_meta = [ColumnMeta.model_validate(item) for item in meta.get("l_meta", [])]
    return LongitudinalDataset.from_long_frame(frame, v_meta or None, l_meta or None)


def longitudinal_to_csv_text(data: LongitudinalDataset) -> str:
    return data.to_long_frame().to_csv(index=False, na_rep=MISSING_TOKEN, float_format="%.17g")


class DatasetRepository(BaseRepository):
    """Datasets on disk as CSV plus an optional column-metadata sidecar"""

    def load(self, path: str) -> IncompleteDataset:
        text = self.store.read_text(path)
        if text is None:
            raise DatasetValidationError(f"dataset file not found: {path}")
        return dataset_from_csv_text(text, self.load_meta(path))

    def load_meta(self, path: str) -> Optional[List[ColumnMeta]]:
        payload = self.store.read_json(path + META_SUFFIX)
        if payload is None:
            return None
        return [ColumnMeta.model_validate(item) for item in payload]

    def save(self, dataset: IncompleteDataset, path: str, with_meta: bool = True) -> str:
        self.store.write_text(path, dataset_to_csv_text(dataset))
        if with_meta:
            self.store.write_json(path + META_SUFFIX, [meta.model_dump(mode="json") for meta in dataset.column_meta])
        return path

    def load_longitudinal(self, path: str) -> LongitudinalDataset:
        text = self.store.read_text(path)
        if text is None:
            raise DatasetValidationError(f"dataset file not found: {path}")
        return longitudinal_from_csv_text(text, self.store.read_json(path + META_SUFFIX))

    def save_longitudinal(self, data: LongitudinalDataset, path: str) -> str:
        self.store.write_text(path, longitudinal_to_csv_text(data))
        self.store.write_json(path + META_SUFFIX, {
            "layout": "long",
            "v_meta": [meta.model_dump(mode="json") for meta in data.v_meta],
            "l_meta": [meta.model_dump(mode="json") for meta in data.l_meta],
        })
        return path

    def is_longitudinal(self, path: str) -> bool:
        meta = self.store.read_json(path + META_SUFFIX)
        return isinstance(meta, dict) and meta.get("layout") == "long"


class ReportRepository(BaseRepository):
    """Per-cell simulation reports and the study-level CSV tables"""

    CSV_FIELDS = ["method", "coord", "coverage", "completed", "median_width", "dropped", "runtime_s"]

    def __init__(self, results_dir: Optional[str] = None):
        super().__init__()
        self.results_dir = results_dir or self.store.root()

    def cell_path(self, setting: str, method: str, config_hash: str) -> str:
        return os.path.join(self.results_dir, setting, f"{method}-{config_hash}.json")

    def save_cell(self, report: Dict[str, Any]) -> str:
        path = self.cell_path(report["config"]["setting"], report["method"], report["config_hash"])
        return self.store.write_json(path, report)

    def get_cell(self, setting: str, method: str, config_hash: str) -> Optional[Dict[str, Any]]:
        return self.store.read_json(self.cell_path(setting, method, config_hash))

    def save_table(self, rows: List[Dict[str, Any]], name: str, fields: Optional[List[str]] = None) -> str:
        frame = pd.DataFrame(rows, columns=fields or self.CSV_FIELDS)
        return self.store.write_text(os.path.join(self.results_dir, name), frame.to_csv(index=False, lineterminator="\n"))

    def save_replicates(self, interval: IntervalEstimate, coordinates: List[str], path: str) -> str:
        """Raw bootstrap replicate estimates of one interval as CSV"""
        frame = interval.replicate_frame(coordinates)
        return self.store.write_text(path, frame.to_csv(index=False, na_rep=MISSING_TOKEN, float_format="%.17g"))


class OracleRepository(BaseRepository):
    """Cached oracle values (simulated truths, calibrated constants) keyed by string"""

    def __init__(self, oracle_dir: Optional[str] = None):
        super().__init__()
        self.oracle_dir = oracle_dir or Settings().oracle_dir

    def _path(self, key: str) -> str:
        digest = hashlib.sha256(key.encode("utf-8")).hexdigest()[:20]
        return os.path.join(self.oracle_dir, f"{digest}.json")

    def get(self, key: str) -> Optional[float]:
        payload = self.store.read_json(self._path(key))
        if payload is None or payload.get("key") != key:
            return None
        return payload["value"]

    def put(self, key: str, value: float) -> str:
        return self.store.write_json(self._path(key), {"key": key, "value": value})

    def all(self) -> List[Dict[str, Any]]:
        if not os.path.isdir(self.oracle_dir):
            return []
        entries = []
        for name in sorted(os.listdir(self.oracle_dir)):
            if name.endswith(".json"):
                with open(os.path.join(self.oracle_dir, name), encoding="utf-8") as handle:
                    entries.append(json.load(handle))
        return entries
