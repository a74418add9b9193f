import math

import numpy as np
import pytest

from src.core.dataset import (
    EstimateVector,
    IncompleteDataset,
    IntervalEstimate,
    LongitudinalDataset,
    missing_fraction,
    validate_dataset,
)
from src.core.exceptions import DatasetValidationError
from src.core.models import ColumnMeta, MethodTag


def test_complete_matrix_passes_validation():
    data = IncompleteDataset(np.arange(6.0).reshape(3, 2), np.zeros((3, 2), dtype=bool))
    validate_dataset(data)
    assert data.is_complete
    assert data.names == ["x0", "x1"]


def test_fully_missing_column_is_rejected():
    mask = np.array([[False, True], [False, True], [False, True]])
    with pytest.raises(DatasetValidationError, match="fully-missing column"):
        IncompleteDataset(np.arange(6.0).reshape(3, 2), mask)


def test_mask_shape_mismatch_is_rejected():
    with pytest.raises(DatasetValidationError, match="dimension mismatch"):
        IncompleteDataset(np.zeros((3, 3)), np.zeros((3, 2), dtype=bool))


def test_duplicate_names_are_rejected():
    meta = [ColumnMeta(name="a"), ColumnMeta(name="a")]
    with pytest.raises(DatasetValidationError, match="duplicate"):
        IncompleteDataset(np.zeros((2, 2)), None, meta)


def test_non_finite_observed_value_is_rejected():
    values = np.array([[1.0, np.inf], [2.0, 3.0]])
    with pytest.raises(DatasetValidationError, match="non-finite"):
        IncompleteDataset(values, np.zeros((2, 2), dtype=bool))


@pytest.mark.parametrize("masked, expected", [(0, 0.0), (4, 0.4)])
def test_missing_fraction(masked, expected):
    mask = np.zeros((10, 2), dtype=bool)
    mask[:masked, 1] = True
    data = IncompleteDataset(np.ones((10, 2)), mask)
    assert missing_fraction(data, 1) == expected
    assert data.missing_fraction(0) == 0.0


def test_missing_fraction_rejects_bad_index():
    data = IncompleteDataset(np.ones((3, 2)))
    with pytest.raises(DatasetValidationError):
        missing_fraction(data, 2)


def test_arrays_are_read_only():
    data = IncompleteDataset(np.ones((3, 2)))
    with pytest.raises(ValueError):
        data.values[0, 0] = 5.0


def test_take_carries_masks_with_rows(linear_data):
    rows = np.flatnonzero(linear_data.mask[:, 1])[:3]
    sample = linear_data.take(np.repeat(rows, 2))
    assert sample.n_rows == 6
    assert sample.mask[:, 1].all()
    assert not sample.mask[:, 0].any()


def test_with_completed_keeps_observed_cells(linear_data):
    filled = np.where(linear_data.mask, 0.0, linear_data.values)
    completed = linear_data.with_completed(filled)
    assert completed.is_complete

    altered = filled.copy()
    altered[~linear_data.mask[:, 0], 0] += 1.0
    with pytest.raises(DatasetValidationError, match="observed cell"):
        linear_data.with_completed(altered)


def test_estimate_vector_checks_covariance():
    with pytest.raises(DatasetValidationError, match="symmetric"):
        EstimateVector([1.0, 2.0], [[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(DatasetValidationError, match="negative variance"):
        EstimateVector([1.0], [[-1.0]])
    assert EstimateVector([1.0, 2.0]).k == 2


def test_interval_estimate_record():
    interval = IntervalEstimate(
        [0.0, 1.0], [1.0, 3.0], MethodTag.MI_BOOT, 0.025, 10, 200, df=[math.inf, 12.5]
    )
    record = interval.to_record()
    assert record["df"] == ["unbounded", 12.5]
    assert record["method"] == "mi-boot"
    np.testing.assert_allclose(interval.width, [1.0, 2.0])
    assert interval.covers([0.5, 3.5]).tolist() == [True, False]


def test_interval_estimate_rejects_inverted_bounds():
    with pytest.raises(DatasetValidationError):
        IntervalEstimate([2.0], [1.0], MethodTag.BOOT_MI, 0.025, 1, 40)


def _small_longitudinal():
    L = np.array([[10.0, 11.0, 12.0], [20.0, 21.0, 22.0]])
    A = np.array([[0.0, 1.0, 1.0], [0.0, 0.0, 0.0]])
    C = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    Y = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    L_mask = np.zeros((2, 3, 1), dtype=bool)
    L_mask[1, 2, 0] = True
    return LongitudinalDataset(None, L, A, C, Y, L_mask=L_mask)


def test_censoring_ends_follow_up():
    data = _small_longitudinal()
    assert data.present.tolist() == [[True, True, False], [True, True, True]]
    assert data.y_available[0].tolist() == [True, False, False]
    assert math.isnan(data.Y[0, 1])
    assert not data.is_complete

    records = list(data.records(0))
    assert [r["t"] for r in records] == [0, 1]
    assert records[1]["C"] == 1 and records[1]["Y"] is None


def test_wide_layout_masks_absent_records():
    data = _small_longitudinal()
    wide = data.to_wide()
    assert wide.names == ["L1_0", "A_0", "Y_0", "L1_1", "A_1", "Y_1", "L1_2", "A_2", "Y_2"]
    assert wide.mask[0, wide.column_index("A_2")]
    assert wide.mask[1, wide.column_index("L1_2")]
    assert not wide.mask[1, wide.column_index("A_2")]


def test_with_wide_fills_only_masked_cells():
    data = _small_longitudinal()
    wide = data.to_wide()
    filled = np.where(wide.mask, -7.0, wide.values)
    completed = data.with_wide(IncompleteDataset(filled, np.zeros_like(wide.mask), wide.column_meta, validate=False))
    assert completed.L[1, 2, 0] == -7.0
    assert completed.L[0, 0, 0] == 10.0
    assert completed.is_complete


def test_long_frame_round_trip_keeps_follow_up():
    data = _small_longitudinal()
    frame = data.to_long_frame()
    assert len(frame) == 5
    back = LongitudinalDataset.from_long_frame(frame)
    np.testing.assert_array_equal(back.present, data.present)
    np.testing.assert_array_equal(back.Y, data.Y)
    np.testing.assert_array_equal(back.L_mask, data.L_mask)


def test_long_frame_rejects_duplicate_records():
    frame = _small_longitudinal().to_long_frame()
    doubled = frame.iloc[[0, 0, 1]]
    with pytest.raises(DatasetValidationError, match="duplicate"):
        LongitudinalDataset.from_long_frame(doubled)


def test_longitudinal_requires_binary_treatment():
    A = np.array([[0.0, 2.0]])
    with pytest.raises(DatasetValidationError, match="binary"):
        LongitudinalDataset(None, [[1.0, 1.0]], A, [[0.0, 0.0]], [[0.0, 0.0]])
