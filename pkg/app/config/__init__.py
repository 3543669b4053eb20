"""Configuration package."""

from app.config.settings import settings, get_settings, is_config_valid
from app.config.run_config import ConfigError, load_run_config

__all__ = ["settings", "get_settings", "is_config_valid", "ConfigError", "load_run_config"]
