import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from glove.config import get_settings


@pytest.fixture(autouse=True)
def configure_env(tmp_path, monkeypatch):
    monkeypatch.setenv("GLOVE_RUN_ROOT", str(tmp_path / "runs"))
    monkeypatch.setenv("GLOVE_LOG_LEVEL", "WARNING")
    try:
        get_settings.cache_clear()
    except AttributeError:
        pass
    yield
    try:
        get_settings.cache_clear()
    except AttributeError:
        pass


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
