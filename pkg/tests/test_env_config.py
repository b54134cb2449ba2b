"""
Tests for env_config.py - Environment configuration loading.
"""

import os
from unittest.mock import patch

import pytest


class TestSettings:
    """Test LabSettings class."""

    @pytest.mark.unit
    def test_default_settings(self):
        """Test default settings values."""
        from env_config import LabSettings

        with patch.dict(os.environ, {}, clear=True):
            settings = LabSettings(_env_file=None)

        assert settings.deterministic is True
        assert settings.log_level == "INFO"
        assert settings.num_threads == 1
        assert settings.artifact_root == "artifacts"

    @pytest.mark.unit
    def test_settings_from_env_vars(self):
        """Test settings loaded from environment variables."""
        from env_config import LabSettings

        env_vars = {
            "SAL_DETERMINISTIC": "false",
            "SAL_LOG_LEVEL": "debug",
            "SAL_NUM_THREADS": "4",
            "SAL_ARTIFACT_ROOT": "/tmp/runs",
        }
        with patch.dict(os.environ, env_vars, clear=True):
            settings = LabSettings(_env_file=None)

        assert settings.deterministic is False
        assert settings.log_level == "DEBUG"
        assert settings.num_threads == 4
        assert settings.artifact_root == "/tmp/runs"

    @pytest.mark.unit
    def test_invalid_log_level(self):
        """Test unknown log levels are rejected."""
        from pydantic import ValidationError

        from env_config import LabSettings

        with patch.dict(os.environ, {"SAL_LOG_LEVEL": "chatty"}, clear=True):
            with pytest.raises(ValidationError):
                LabSettings(_env_file=None)


class TestSettingsCache:
    """Test cached settings access."""

    @pytest.mark.unit
    def test_get_settings_cached(self):
        """Test get_settings returns the cached instance."""
        from env_config import get_settings, reload_settings

        reload_settings()
        assert get_settings() is get_settings()

    @pytest.mark.unit
    def test_reload_picks_up_env(self):
        """Test reload_settings re-reads the environment."""
        from env_config import get_settings, reload_settings

        with patch.dict(os.environ, {"SAL_NUM_THREADS": "3"}):
            assert reload_settings().num_threads == 3
        reload_settings()
        assert get_settings() is not None


class TestEnvFile:
    """Test .env loading."""

    @pytest.mark.unit
    def test_load_env_file(self, tmp_path):
        """Test variables from a .env file reach the settings."""
        from env_config import get_settings, load_env_file, reload_settings

        env_file = tmp_path / ".env"
        env_file.write_text("SAL_ARTIFACT_ROOT=from-dotenv\n")
        with patch.dict(os.environ, {}, clear=False):
            os.environ.pop("SAL_ARTIFACT_ROOT", None)
            assert load_env_file(str(env_file)) is True
            assert get_settings().artifact_root == "from-dotenv"
        reload_settings()

    @pytest.mark.unit
    def test_missing_env_file(self, tmp_path):
        """Test a missing .env file is reported as not loaded."""
        from env_config import load_env_file

        assert load_env_file(str(tmp_path / "missing.env")) is False


class TestRuntime:
    """Test torch runtime settings."""

    @pytest.mark.unit
    def test_apply_runtime_settings(self):
        """Test thread count and determinism reach torch."""
        import torch

        from env_config import LabSettings, apply_runtime_settings

        before = torch.are_deterministic_algorithms_enabled()
        try:
            apply_runtime_settings(LabSettings(_env_file=None, num_threads=2, deterministic=True))
            assert torch.get_num_threads() == 2
            assert torch.are_deterministic_algorithms_enabled()
        finally:
            torch.use_deterministic_algorithms(before)
            torch.set_num_threads(1)
