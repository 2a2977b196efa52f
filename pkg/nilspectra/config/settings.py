"""Runtime settings using pydantic-settings.

Experiment state never lives here; it is read from the experiment file.
"""

from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Tool-level settings loaded from NILSPECTRA_* variables or .env."""

    model_config = SettingsConfigDict(
        env_prefix="NILSPECTRA_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # Logging
    log_level: str = Field(default="INFO", description="Logging level")
    log_file: str = Field(default="./logs/nilspectra.log", description="Log file path")
    log_to_file: bool = Field(default=True, description="Also write logs to log_file")

    # Output
    output_root: str = Field(default="./runs", description="Root for run directories")

    # Workers
    default_threads: int = Field(default=1, ge=1, description="Worker cap when --threads is absent")

    @property
    def output_root_path(self) -> Path:
        """Get output root as a Path."""
        return Path(self.output_root)

    @property
    def log_path(self) -> Path:
        """Get log file as a Path."""
        return Path(self.log_file)


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
