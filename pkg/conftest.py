"""Shared fixtures: every test gets its own cache directory and single-worker settings."""
import pytest

from src.services import settings as settings_module
from src.services.settings import reset_settings
from src.services.term_cache import reset_term_cache


@pytest.fixture(autouse=True)
def isolated_workbench(tmp_path, monkeypatch):
    monkeypatch.setenv("GREENWALKS_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setenv("GREENWALKS_WORKERS", "1")
    monkeypatch.setattr(settings_module, "SETTINGS_FILE", tmp_path / "greenwalks.json")
    reset_settings()
    reset_term_cache()
    yield
    reset_settings()
    reset_term_cache()
