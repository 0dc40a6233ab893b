import os
import tempfile

import numpy as np
import pytest

# modules create their loggers at import time
os.environ.setdefault("URNCUT_LOG_PATH", os.path.join(tempfile.gettempdir(), "urncut-tests.log"))


@pytest.fixture
def clean_home(tmp_path, monkeypatch):
    """Ensure a clean home directory and config for each test."""
    fake_home = tmp_path / "home"
    fake_home.mkdir()

    # Patch module-level constants in urncut.config since they are computed at import time
    fake_urncut_dir = fake_home / ".urncut"
    monkeypatch.setattr("urncut.config.URNCUT_DIR", str(fake_urncut_dir))
    monkeypatch.setattr("urncut.config.CONFIG_PATH", str(fake_urncut_dir / "config.json"))

    monkeypatch.setenv("HOME", str(fake_home))
    monkeypatch.chdir(tmp_path)
    for var in ("URNCUT_OUT_DIR", "URNCUT_JOBS", "URNCUT_LOG_LEVEL"):
        monkeypatch.delenv(var, raising=False)
    return fake_home


@pytest.fixture
def source():
    return np.random.default_rng(20240611)
