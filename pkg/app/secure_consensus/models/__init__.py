"""Validated document models (scenario configs, gains files)."""
