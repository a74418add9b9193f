import numpy as np
import pytest

from src.core.config import Settings
from src.core.dataset import IncompleteDataset
from src.core.models import ColumnMeta
from src.data.storage import StorageHandler
from src.stochastics.streams import RngStream

LINEAR_META = [ColumnMeta(name="y"), ColumnMeta(name="X1"), ColumnMeta(name="X2")]


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow Monte Carlo tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def isolated_results(tmp_path, monkeypatch):
    """Point every repository at a throwaway results tree"""
    monkeypatch.setenv("MIBOOT_RESULTS_DIR", str(tmp_path / "results"))
    monkeypatch.setenv("MIBOOT_ORACLE_DIR", str(tmp_path / "results" / "oracles"))
    Settings.reload()
    StorageHandler.reset()
    yield tmp_path / "results"
    Settings.reload()
    StorageHandler.reset()


@pytest.fixture
def stream():
    return RngStream(12345, ("test",))


def _linear_values(n: int = 200) -> np.ndarray:
    gen = np.random.default_rng(7)
    x1 = gen.normal(size=n)
    x2 = gen.normal(size=n)
    y = 1.0 + 2.0 * x1 - x2 + gen.normal(scale=0.5, size=n)
    return np.column_stack([y, x1, x2])


@pytest.fixture
def complete_linear():
    """n=200 draws of y = 1 + 2 X1 - X2 + N(0, 0.25)"""
    return IncompleteDataset(_linear_values(), None, LINEAR_META)


@pytest.fixture
def linear_data():
    """complete_linear with about 20% of X1 masked"""
    values = _linear_values()
    mask = np.zeros_like(values, dtype=bool)
    mask[:, 1] = np.random.default_rng(8).random(values.shape[0]) < 0.2
    return IncompleteDataset(values, mask, LINEAR_META)
