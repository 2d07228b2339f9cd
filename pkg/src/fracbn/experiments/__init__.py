"""Configuration, caching, reports and the ``fracbn`` command-line interface."""

from .config import RunConfig, config_from_dict, load_config
from .report import dumps, strip_timing, validate_report

__all__ = ["RunConfig", "config_from_dict", "load_config", "dumps", "strip_timing", "validate_report"]
