import os

import numpy as np
import pandas as pd
import pytest

from src.core.dataset import IntervalEstimate
from src.core.exceptions import DatasetValidationError
from src.core.models import ColumnKind, MethodTag
from src.data.repositories import (
    DatasetRepository,
    OracleRepository,
    ReportRepository,
    dataset_from_csv_text,
    dataset_to_csv_text,
)
from src.data.storage import StorageHandler
from src.simulation.generators import gen_setting2
from src.simulation.longitudinal import SemParameters, gen_setting4
from src.stochastics.streams import RngStream


def test_csv_uses_na_token():
    data = dataset_from_csv_text("y,X1\n1.5,NA\n2.0,3.0\n")
    assert data.mask.tolist() == [[False, True], [False, False]]
    text = dataset_to_csv_text(data)
    assert text.splitlines()[1] == "1.5,NA"


def test_csv_rejects_text_columns():
    with pytest.raises(DatasetValidationError, match="non-numeric"):
        dataset_from_csv_text("y,group\n1.0,a\n2.0,b\n")


def test_dataset_round_trip_keeps_metadata(tmp_path):
    data = gen_setting2(60, RngStream(1, ("data",)), "high", a=0.4)
    path = str(tmp_path / "setting2.csv")
    repo = DatasetRepository()
    repo.save(data, path)
    loaded = repo.load(path)
    assert not repo.is_longitudinal(path)
    assert loaded.names == data.names
    assert loaded.column_meta[loaded.column_index("X4")].kind == ColumnKind.BINARY
    np.testing.assert_array_equal(loaded.mask, data.mask)
    np.testing.assert_array_equal(loaded.values[~loaded.mask], data.values[~data.mask])


def test_missing_dataset_file(tmp_path):
    with pytest.raises(DatasetValidationError, match="not found"):
        DatasetRepository().load(str(tmp_path / "absent.csv"))


def test_longitudinal_round_trip(tmp_path):
    data = gen_setting4(60, RngStream(2, ("data",)), horizon=2, params=SemParameters())
    path = str(tmp_path / "setting4.csv")
    repo = DatasetRepository()
    repo.save_longitudinal(data, path)
    assert repo.is_longitudinal(path)
    loaded = repo.load_longitudinal(path)
    np.testing.assert_array_equal(loaded.present, data.present)
    np.testing.assert_array_equal(loaded.L_mask, data.L_mask)
    assert [meta.name for meta in loaded.l_meta] == [meta.name for meta in data.l_meta]


def test_oracle_store(tmp_path):
    oracle = OracleRepository(str(tmp_path / "oracles"))
    assert oracle.get("setting4-truth/x") is None
    oracle.put("setting4-truth/x", -1.25)
    assert oracle.get("setting4-truth/x") == -1.25
    assert oracle.all() == [{"key": "setting4-truth/x", "value": -1.25}]


def test_oracle_defaults_to_settings_dir(isolated_results):
    assert OracleRepository().oracle_dir == str(isolated_results / "oracles")


def test_report_tables(tmp_path):
    repo = ReportRepository(str(tmp_path))
    rows = [{"method": "boot-mi", "coord": "X1", "coverage": 0.95, "completed": 200, "median_width": 0.3,
             "dropped": 0, "runtime_s": 1.2, "extra": "ignored"}]
    path = repo.save_table(rows, "1/study.csv")
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    assert lines[0] == "method,coord,coverage,completed,median_width,dropped,runtime_s"
    assert lines[1] == "boot-mi,X1,0.95,200,0.3,0,1.2"


def test_report_replicates_csv(tmp_path):
    replicates = np.arange(12.0).reshape(2, 3, 2)
    replicates[1, 2] = np.nan
    interval = IntervalEstimate([0.0, 0.0], [1.0, 1.0], MethodTag.MI_BOOT_PS, 0.025, 2, 3, replicates=replicates)
    path = ReportRepository(str(tmp_path)).save_replicates(interval, ["a", "b"], str(tmp_path / "reps.csv"))
    frame = pd.read_csv(path, na_values=["NA"])
    assert list(frame.columns) == ["imputation", "bootstrap", "a", "b"]
    assert frame.shape == (6, 4)
    assert frame.loc[1, "b"] == 3.0
    assert frame.iloc[5][["a", "b"]].isna().all()


def test_report_cells(tmp_path):
    repo = ReportRepository(str(tmp_path))
    report = {"config": {"setting": "3"}, "method": "mi-boot", "config_hash": "abc", "R": 4}
    path = repo.save_cell(report)
    assert path == os.path.join(str(tmp_path), "3", "mi-boot-abc.json")
    assert repo.get_cell("3", "mi-boot", "abc")["R"] == 4
    assert repo.get_cell("3", "boot-mi", "abc") is None


def test_storage_root_follows_settings(isolated_results):
    assert StorageHandler().root() == os.path.abspath(str(isolated_results))
