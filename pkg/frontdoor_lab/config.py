"""Environment-driven defaults.

Values are read from the process environment (after loading `.env`) each time an
accessor is called, so tests and the CLI can override them.
"""

import logging
import os

from dotenv import load_dotenv

from frontdoor_lab.errors import ConfigError

load_dotenv()

SEED_ENV_VAR = "FRONTDOOR_LAB_SEED"
LOG_LEVEL_ENV_VAR = "FRONTDOOR_LAB_LOG_LEVEL"
WORKERS_ENV_VAR = "FRONTDOOR_LAB_WORKERS"

FALLBACK_SEED = 20240601
FALLBACK_LOG_LEVEL = "WARNING"
MAX_SEED = 2**64


def _read_int(var_name: str, fallback: int) -> int:
    raw = os.getenv(var_name)
    if raw is None or not raw.strip():
        return fallback
    try:
        return int(raw.strip())
    except ValueError:
        raise ConfigError(f"{var_name} must be an integer, got '{raw}'")


def default_seed() -> int:
    """Seed used when a command is not given --seed."""
    seed = _read_int(SEED_ENV_VAR, FALLBACK_SEED)
    if not 0 <= seed < MAX_SEED:
        raise ConfigError(f"{SEED_ENV_VAR} must be in [0, 2^64), got {seed}")
    return seed


def default_workers() -> int:
    workers = _read_int(WORKERS_ENV_VAR, 1)
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV_VAR} must be at least 1, got {workers}")
    return workers


def log_level() -> int:
    name = os.getenv(LOG_LEVEL_ENV_VAR, FALLBACK_LOG_LEVEL).strip().upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        raise ConfigError(f"{LOG_LEVEL_ENV_VAR} is not a logging level: '{name}'")
    return level
