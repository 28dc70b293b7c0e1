# Copyright (c) 2025 DeReverb contributors
# Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
# Part of the DeReverb project. All rights reserved where applicable.

#  NOTE: Runtime knobs live in the environment (or a `.env` file);
#  experiment definitions live in a TOML file passed with --config.

import hashlib
import os
import sys
from pathlib import Path
from typing import Optional, Union

import psutil
import ujson
from dotenv import load_dotenv
from pydantic import ValidationError

from DeReverb.logger import LOGGER, configure
from ._dataclass import ExperimentConfig
from ._errors import UsageError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

load_dotenv()


class RuntimeConfig:
    """
    Process-level settings read from environment variables.
    """

    def __init__(self):
        self.LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()
        self.LOG_FILE: str = os.getenv("LOG_FILE", "dereverb.log")

        self.WORKERS: int = self._get_env_int("WORKERS", self._default_workers())
        self.FEATURE_CACHE_SIZE: int = self._get_env_int("FEATURE_CACHE_SIZE", 256)
        self.OUTPUT_DIR: Path = Path(os.getenv("OUTPUT_DIR", "runs"))
        self.FLOAT32_INFERENCE: bool = self._get_env_bool("FLOAT32_INFERENCE", False)

        self._validate_config()

    @staticmethod
    def _default_workers() -> int:
        return max(1, psutil.cpu_count(logical=False) or 1)

    @staticmethod
    def _get_env_int(name: str, default: Optional[int] = None) -> Optional[int]:
        """
        Retrieve an environment variable and convert it to an integer.

        Args:
            name (str): Environment variable name.
            default (Optional[int]): Fallback value if the variable is unset or unparsable.

        Returns:
            Optional[int]: Parsed integer or the default value.
        """
        value = os.getenv(name)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            LOGGER.warning("Invalid value for %s: %s (default: %s)", name, value, default)
            return default

    @staticmethod
    def _get_env_bool(name: str, default: bool = False) -> bool:
        return os.getenv(name, str(default)).lower() in ("true", "1", "yes")

    def _validate_config(self) -> None:
        if self.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            LOGGER.warning("Invalid LOG_LEVEL %s, using INFO", self.LOG_LEVEL)
            self.LOG_LEVEL = "INFO"
        configure(self.LOG_LEVEL, self.LOG_FILE)
        if self.WORKERS < 1:
            LOGGER.warning("WORKERS=%s is not positive, using 1", self.WORKERS)
            self.WORKERS = 1
        if self.FEATURE_CACHE_SIZE < 1:
            LOGGER.warning("FEATURE_CACHE_SIZE=%s is not positive, using 1", self.FEATURE_CACHE_SIZE)
            self.FEATURE_CACHE_SIZE = 1


def load_experiment_config(path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """Parse and validate a TOML experiment file; no path means the built-in defaults."""
    if path is None:
        return ExperimentConfig(output_dir=config.OUTPUT_DIR / "full")
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"malformed config {path}: {exc}") from exc

    base = path.parent
    corpus = raw.get("corpus", {})
    for key in ("train_dir", "test_dir"):
        if key in corpus and not Path(corpus[key]).is_absolute():
            corpus[key] = str(base / corpus[key])
    if "output_dir" in raw and not Path(raw["output_dir"]).is_absolute():
        raw["output_dir"] = str(base / raw["output_dir"])
    raw.setdefault("output_dir", str(config.OUTPUT_DIR / path.stem))

    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise UsageError(f"invalid config {path}:\n{exc}") from exc


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON dump; paths are excluded so relocating a run keeps its hash."""
    payload = cfg.model_dump(mode="json", exclude={"corpus", "output_dir"})
    return hashlib.sha256(ujson.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


config: RuntimeConfig = RuntimeConfig()
