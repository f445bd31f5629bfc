"""
Environment-backed settings
Values come from GRAMDOC_* variables, optionally loaded from a .env file
"""
import os
from typing import Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from src.exceptions import ConfigurationError


ENV_PREFIX = "GRAMDOC_"


class Settings(BaseModel):
    """Defaults for index builds, debugging and test corpus sizes"""

    ms_len: int = Field(default=1, ge=1, le=16, description="Maximum metasymbol length")
    epsilon: float = Field(default=0.5, gt=0.0, le=1.0, description="Upward-tracking sample exponent")
    tau: Optional[int] = Field(default=None, ge=1, description="Prefix-sum sampling step (None = ceil(log2 p))")
    list_layout: Literal["leaves", "root"] = Field(default="leaves", description="Where inverted lists are attached")
    debug_checks: bool = Field(default=True, description="Check E arrays at build and V after queries")
    log_level: str = Field(default="WARNING", description="Logging level for the CLI")
    oracle_collections: int = Field(default=500, ge=1, description="Random collections used by oracle tests")


def load_settings(env_file: Optional[str] = None) -> Settings:
    """Build Settings from the environment (and a .env file when present)"""
    load_dotenv(env_file, override=False)

    raw = {}
    for name in Settings.model_fields:
        value = os.getenv(ENV_PREFIX + name.upper())
        if value is None or value == "":
            continue
        if name == "debug_checks":
            raw[name] = value.strip().lower() in ("1", "true", "yes", "on")
        else:
            raw[name] = value

    try:
        return Settings(**raw)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid {ENV_PREFIX}* settings: {e}") from e
