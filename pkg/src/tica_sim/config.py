import os
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv
from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from . import __version__
from .exceptions import ConfigError

# Load environment variables from .env file
load_dotenv()

class Settings(BaseSettings):
    """
    Process-level settings loaded from environment variables
    """
    # General settings
    APP_NAME: str = "TICA Simulator"
    APP_DESCRIPTION: str = "Trace-driven simulator of a three-level DRAM / RO-SSD / WO-SSD I/O cache"
    APP_VERSION: str = __version__
    DEBUG: bool = os.getenv("DEBUG", "False").lower() == "true"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # Default experiment config file, only consulted when no --config is given
    CONFIG_PATH: Optional[str] = os.getenv("TICA_SIM_CONFIG")

    # Service settings
    HOST: str = os.getenv("HOST", "127.0.0.1")
    PORT: int = int(os.getenv("PORT", "8000"))

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

# Create settings instance
settings = Settings()

# Configure logging
logging_level = getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
logging.basicConfig(
    level=logging_level,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)

logger = logging.getLogger(__name__)


def set_log_level(level: str) -> None:
    """Change the root log level at runtime (used by the --log-level flag)."""
    logging.getLogger().setLevel(getattr(logging, level.upper(), logging.INFO))


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a TOML or JSON experiment config into a plain dict.

    The format is chosen by extension; anything that is not ``.json`` is parsed as TOML.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e

    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw.decode("utf-8"))
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse config file {path}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a table/object at top level")
    logger.debug(f"Loaded config file {path} with keys {sorted(data)}")
    return data


def load_experiment_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None):
    """
    Build a validated ExperimentConfig from a config file plus flag overrides.

    ``overrides`` is a nested dict whose leaves replace the file values.
    With no path, ``TICA_SIM_CONFIG`` is used; with neither, defaults apply.
    """
    from .models import ExperimentConfig

    path = path or settings.CONFIG_PATH
    data: Dict[str, Any] = read_config_file(path) if path else {}
    if overrides:
        data = merge_config(data, overrides)

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment config: {e}") from e


def merge_config(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge ``overrides`` into a copy of ``base``."""
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = value
    return merged
