"""
Configuration settings for icenav
"""

import os

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level settings, read from ICENAV_* environment variables and .env"""

    # Application
    app_name: str = "icenav"
    app_version: str = "1.0.0"
    debug: bool = False

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Execution
    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)

    # Output
    results_dir: str = "results"
    optimizer_trace: bool = False
    planner_debug: bool = False

    # Experiment defaults
    profile: str = "desk"
    seed: int = 0

    model_config = SettingsConfigDict(
        env_prefix="ICENAV_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


# Global settings instance
settings = Settings()

