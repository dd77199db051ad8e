"""Environment settings and layered configuration loading."""

from __future__ import annotations

from pathlib import Path
from typing import Any, TypeVar

from dotenv import dotenv_values
from pydantic import BaseModel
from pydantic_settings import BaseSettings, SettingsConfigDict

from .utils.errors import MissingResourceError

ModelT = TypeVar("ModelT", bound=BaseModel)


class Settings(BaseSettings):
    """Process-wide settings; only the output root is read from the environment."""

    model_config = SettingsConfigDict(env_prefix="MOBISEARCH_", extra="ignore")

    output_root: Path = Path(".")


_settings_override: dict[str, Any] = {}


def get_settings() -> Settings:
    """Return settings with CLI overrides."""
    return Settings(**_settings_override)


def resolve_output(path: Path) -> Path:
    """Resolve a relative output path against the configured output root."""
    if path.is_absolute():
        return path
    return get_settings().output_root / path


def read_config_file(path: Path | None) -> dict[str, str]:
    """Read a flat KEY=VALUE file; keys are lower-cased to match field names."""
    if path is None:
        return {}
    if not path.is_file():
        raise MissingResourceError(f"Config file not found: {path}", path=str(path))
    values = dotenv_values(path)
    return {key.lower(): value for key, value in values.items() if value is not None}


def load_config(
    model: type[ModelT],
    path: Path | None = None,
    overrides: dict[str, Any] | None = None,
) -> ModelT:
    """Build ``model`` from defaults, then the config file, then flag overrides."""
    merged: dict[str, Any] = dict(read_config_file(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    return model.model_validate(merged)
