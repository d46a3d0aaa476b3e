#!/usr/bin/env python3
"""
Configuration Management

Process-level settings for the secure consensus toolkit. Scenario parameters
live in JSON documents (see models/schemas.py); this module only holds the
knobs that come from the environment.

Author: ThinkCraft
"""

import os
from typing import Optional
from dotenv import load_dotenv

load_dotenv()


class Settings:
    """Application settings."""

    # Application Settings
    APP_NAME: str = "Secure Consensus Lab"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = os.getenv("DEBUG", "False").lower() == "true"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()

    # Simulation Settings
    WORKERS: int = int(os.getenv("ETC_WORKERS", "4"))
    OUTPUT_DIR: str = os.getenv("ETC_OUTPUT_DIR", "results")

    @classmethod
    def seed_override(cls) -> Optional[int]:
        """
        Seed forced through ETC_SEED, read at call time.

        Raises:
            ValueError: If ETC_SEED is set but not an integer
        """
        raw = os.getenv("ETC_SEED")
        if raw is None or raw.strip() == "":
            return None
        try:
            return int(raw)
        except ValueError:
            raise ValueError(f"ETC_SEED must be an integer, got {raw!r}")

    @classmethod
    def worker_count(cls) -> int:
        """Thread count for fan-out, never below 1."""
        return max(1, cls.WORKERS)


settings = Settings()
