"""Configuration settings for the toolkit."""
import logging
import os
from pathlib import Path
from functools import lru_cache
from typing import Literal
from pydantic import Field
from pydantic_settings import BaseSettings

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Process-wide settings (environment overrides per-run defaults)."""

    # Application
    app_name: str = "nlkpp"
    app_version: str = "1.0.0"
    base_dir: Path = Path(__file__).resolve().parent.parent.parent  # Project root directory

    # Logging
    log_level: str = "INFO"
    log_format: Literal["plain", "json"] = "plain"

    # Concurrency: one worker keeps every run reproducible out of the box
    max_workers: int = Field(default=1, ge=1, alias="MAX_WORKERS")

    # Kernels
    spectral_threshold: int = 256  # cells below this use the direct convolution path
    min_raw_mass: float = 0.99
    mass_tolerance: float = 1e-12

    # Time stepping
    picard_tol: float = 1e-10
    picard_max_iter: int = 60
    max_dt: float = 0.05
    schedule_alpha: float = 0.5
    max_halvings: int = 12

    # Experiments
    output_dir: Path = Path("runs")
    default_seed: int = 0

    class Config:
        env_file = ".env.local" if os.path.exists(".env.local") else ".env"
        case_sensitive = False
        populate_by_name = True  # Allow both field name and alias
        extra = "ignore"


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


# Global settings instance
settings = get_settings()


def validate_settings(current_settings: Settings) -> None:
    """Fail fast on settings that would make every run meaningless."""
    problems = []
    if not 0.0 < current_settings.schedule_alpha < 1.0:
        problems.append("schedule_alpha must lie in (0, 1)")
    if current_settings.picard_tol <= 0 or current_settings.max_dt <= 0:
        problems.append("picard_tol and max_dt must be positive")
    if not 0.0 < current_settings.min_raw_mass <= 1.0:
        problems.append("min_raw_mass must lie in (0, 1]")

    if problems:
        raise RuntimeError(f"Invalid settings: {'; '.join(problems)}")

    logger.debug(
        f"Settings validated: workers={current_settings.max_workers}, "
        f"max_dt={current_settings.max_dt}, picard_tol={current_settings.picard_tol}"
    )
