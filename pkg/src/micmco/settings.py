"""
Process Settings
Environment-driven knobs that do not change what is computed, loaded from .env
"""

import os
from dataclasses import dataclass

from dotenv import load_dotenv

load_dotenv()


def _env_bool(name: str, default: bool) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    return raw.strip().lower() in {"1", "true", "yes", "on"}


@dataclass(frozen=True)
class Settings:
    """Runtime settings read from MICMCO_* environment variables"""
    log_level: str = "INFO"
    out_dir: str = "runs"
    max_rows: int = 1024          # rows (examples × samples) per forward chunk
    wall_clock: bool = False      # write real wall_time_s into metrics CSVs
    jobs: int = 1
    host: str = "127.0.0.1"
    port: int = 8000

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            log_level=os.getenv("MICMCO_LOG_LEVEL", cls.log_level).upper(),
            out_dir=os.getenv("MICMCO_OUT_DIR", cls.out_dir),
            max_rows=max(1, int(os.getenv("MICMCO_MAX_ROWS", cls.max_rows))),
            wall_clock=_env_bool("MICMCO_WALL_CLOCK", cls.wall_clock),
            jobs=max(1, int(os.getenv("MICMCO_JOBS", cls.jobs))),
            host=os.getenv("MICMCO_HOST", cls.host),
            port=int(os.getenv("MICMCO_PORT", cls.port)),
        )


settings = Settings.from_env()
