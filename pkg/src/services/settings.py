"""Workbench configuration: JSON settings file with environment overrides."""
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

_LOGGER = logging.getLogger(__name__)

SETTINGS_FILE = Path(os.environ.get("GREENWALKS_SETTINGS", "greenwalks.json"))
CACHE_DIR = Path(os.environ.get("GREENWALKS_CACHE_DIR", "cache"))
MAX_WORKERS = int(os.environ.get("GREENWALKS_WORKERS", "4"))


@dataclass
class WorkbenchSettings:
    cache_dir: Path = field(default_factory=lambda: CACHE_DIR)
    workers: int = MAX_WORKERS
    walk_dp_budget: int = 2_000_000
    prime_bits: int = 62
    oversample: int = 25
    prime_count: int = 2
    mc_batch_size: int = 65536
    analysis_dps: int = 60

    def to_dict(self) -> dict:
        data = asdict(self)
        data["cache_dir"] = str(self.cache_dir)
        return data


def _apply_environment(settings: WorkbenchSettings) -> WorkbenchSettings:
    if "GREENWALKS_CACHE_DIR" in os.environ:
        settings.cache_dir = Path(os.environ["GREENWALKS_CACHE_DIR"])
    if "GREENWALKS_WORKERS" in os.environ:
        settings.workers = max(1, int(os.environ["GREENWALKS_WORKERS"]))
    return settings


def load_settings(path: Optional[Path] = None) -> WorkbenchSettings:
    """Load settings from disk, then apply environment overrides."""
    path = path or SETTINGS_FILE
    settings = WorkbenchSettings()
    if not path.exists():
        _LOGGER.debug(f"No settings file at {path}, using defaults")
        return _apply_environment(settings)

    try:
        data = json.loads(path.read_text())
        defaults = asdict(settings)
        for key in defaults:
            if key in data:
                setattr(settings, key, data[key])
        settings.cache_dir = Path(settings.cache_dir)
    except Exception as e:
        _LOGGER.error(f"Failed to load settings from {path}: {e}")
        settings = WorkbenchSettings()
    return _apply_environment(settings)


_settings: Optional[WorkbenchSettings] = None


def get_settings() -> WorkbenchSettings:
    """Get the process-wide settings instance."""
    global _settings
    if _settings is None:
        _settings = load_settings()
    return _settings


def reset_settings() -> None:
    global _settings
    _settings = None
