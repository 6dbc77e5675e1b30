import logging
import os
from dataclasses import dataclass
from typing import Optional

logger = logging.getLogger(__name__)

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class RuntimeSettings:
    """Data class to store process-level settings that are not experiment parameters"""
    workers: int
    output_dir: str
    log_level: str


class SettingsManager:
    """Manages runtime settings: config `runtime:` block first, then environment"""

    def __init__(self, runtime: Optional[dict] = None):
        self.runtime_settings = self._load_settings(runtime or {})

    def _load_settings(self, runtime: dict) -> RuntimeSettings:
        """Load settings from the config block or environment variables"""
        try:
            workers = int(runtime["workers"])
        except (KeyError, TypeError, ValueError):
            # Fallback to environment variables
            try:
                workers = int(os.getenv("MECSIM_WORKERS", "1"))
            except ValueError:
                logger.warning("MECSIM_WORKERS is not an integer, using 1")
                workers = 1

        output_dir = runtime.get("output_dir") or os.getenv("MECSIM_OUTPUT_DIR", "results")
        log_level = str(runtime.get("log_level") or os.getenv("MECSIM_LOG_LEVEL", "INFO")).upper()

        return RuntimeSettings(workers=workers, output_dir=str(output_dir), log_level=log_level)

    def get_workers(self) -> int:
        return max(1, self.runtime_settings.workers)

    def get_output_dir(self) -> str:
        return self.runtime_settings.output_dir

    def get_log_level(self) -> int:
        """Numeric logging level, INFO when the configured name is unknown"""
        return getattr(logging, self.runtime_settings.log_level, logging.INFO)

    def ensure_output_dir(self) -> str:
        os.makedirs(self.runtime_settings.output_dir, exist_ok=True)
        return self.runtime_settings.output_dir

    def validate_settings(self) -> dict[str, bool]:
        """Validate that every runtime setting is usable"""
        return {
            "workers": self.runtime_settings.workers >= 1,
            "output_dir": bool(self.runtime_settings.output_dir),
            "log_level": self.runtime_settings.log_level in _LOG_LEVELS,
        }

    def get_settings_status(self) -> str:
        """Get human-readable settings status"""
        validation = self.validate_settings()
        if all(validation.values()):
            s = self.runtime_settings
            return f"✅ Runtime settings OK (workers={s.workers}, output={s.output_dir}, log={s.log_level})"
        invalid = [key for key, valid in validation.items() if not valid]
        return f"❌ Invalid runtime settings: {', '.join(invalid)}"
