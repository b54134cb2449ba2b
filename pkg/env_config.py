# -*- coding: utf-8 -*-

"""
State-Aliasing Lab - Environment Configuration

Process-level settings loaded from environment variables (prefix SAL_) or a .env
file using pydantic-settings. Experiment hyperparameters live in config.py.
"""

import logging
from functools import lru_cache
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class LabSettings(BaseSettings):
    """
    Process settings loaded from environment variables.

    Environment variables can be set in a .env file or directly in the environment.
    """

    model_config = SettingsConfigDict(
        env_prefix="SAL_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    deterministic: bool = Field(
        default=True,
        description="Determinism mode: deterministic torch kernels and a fixed thread count",
    )
    log_level: str = Field(
        default="INFO",
        description="Root logging level",
    )
    num_threads: int = Field(
        default=1,
        ge=1,
        le=256,
        description="torch intra-op thread count",
    )
    artifact_root: str = Field(
        default="artifacts",
        description="Default parent directory for run outputs",
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Normalize and check the logging level name."""
        v = v.strip().upper()
        if v not in _LOG_LEVELS:
            raise ValueError(f"log level must be one of {', '.join(_LOG_LEVELS)}")
        return v


@lru_cache()
def get_settings() -> LabSettings:
    """
    Get cached process settings.

    Returns:
        LabSettings instance loaded from environment
    """
    return LabSettings()


def reload_settings() -> LabSettings:
    """
    Reload settings (clears cache).

    Returns:
        Fresh LabSettings instance
    """
    get_settings.cache_clear()
    return get_settings()


def load_env_file(env_path: Optional[str] = None) -> bool:
    """Load environment variables from a .env file and refresh cached settings"""
    from dotenv import load_dotenv

    loaded = load_dotenv(env_path) if env_path else load_dotenv()
    if loaded:
        reload_settings()
    return bool(loaded)


def apply_runtime_settings(settings: LabSettings) -> None:
    """Apply thread count and determinism mode to torch"""
    import torch

    torch.set_num_threads(settings.num_threads)
    torch.use_deterministic_algorithms(settings.deterministic)
    logger.debug(
        f"torch runtime: threads={settings.num_threads} deterministic={settings.deterministic}"
    )
