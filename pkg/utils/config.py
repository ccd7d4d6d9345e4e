import logging
import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

_settings_cache = {"settings": None}


class Settings(BaseModel):
    log_level: str = "INFO"
    threads: int = Field(default=1, ge=1)
    host: str = "0.0.0.0"
    port: int = 8080
    cache_size: int = Field(default=32, ge=1)


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        logging.getLogger(__name__).warning(f"Ignoring non-integer {name}={raw!r}, using {default}")
        return default


def get_settings(refresh: bool = False) -> Settings:
    """
    Environment-driven settings, read once and cached.

    Keys: LOG_LEVEL, GABORFLOW_THREADS, HOST, PORT, GABORFLOW_CACHE_SIZE.
    """
    if _settings_cache["settings"] is not None and not refresh:
        return _settings_cache["settings"]

    settings = Settings(
        log_level=os.getenv("LOG_LEVEL", "INFO").upper(),
        threads=max(1, _int_env("GABORFLOW_THREADS", os.cpu_count() or 1)),
        host=os.getenv("HOST", "0.0.0.0"),
        port=_int_env("PORT", 8080),
        cache_size=max(1, _int_env("GABORFLOW_CACHE_SIZE", 32)),
    )
    _settings_cache["settings"] = settings
    return settings


def configure_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(level=(level or get_settings().log_level).upper(), format=LOG_FORMAT)
    if level:
        logging.getLogger().setLevel(level.upper())
