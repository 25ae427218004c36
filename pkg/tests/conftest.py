import pytest

from config.settings import settings
from tests.helpers import make_regression


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale benchmark runs (deselect with -m 'not slow')")


@pytest.fixture(autouse=True)
def isolated_log_dir(tmp_path, monkeypatch):
    """Keep file handlers created during tests out of the working tree."""
    monkeypatch.setattr(settings, 'LOG_DIR', str(tmp_path / 'logs'))


@pytest.fixture
def regression_split():
    data = make_regression(100, 4, seed=1)
    return data.subset(range(80), name="train"), data.subset(range(80, 100), name="test")
