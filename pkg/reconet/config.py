# reconet/config.py
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, Optional

from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from reconet.schemas.loss import LossWeights
from reconet.schemas.training import TrainConfig
from reconet.utils.errors import ConfigError


class Settings(BaseSettings):
    # Runtime settings
    THREADS: int = 0
    LOG_LEVEL: str = "INFO"

    # Tensor engine settings
    DEBUG_FINITE: bool = False

    # Output settings
    OUTPUT_DIR: str = "runs"

    model_config = SettingsConfigDict(env_prefix="RECONET_", env_file=".env", extra="ignore")


@lru_cache()
def get_settings():
    return Settings()


WEIGHT_KEYS = set(LossWeights.model_fields)


def parse_key_values(lines: Iterable[str], source: str = "<config>") -> Dict[str, str]:
    """Parse UTF-8 key=value lines; blank lines and '#' comments are skipped."""
    values: Dict[str, str] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(
                message="Malformed config line",
                details=f"{source}:{number}: expected key=value, got '{line}'",
                example="learning_rate=0.001"
            )
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def build_train_config(values: Dict[str, str]) -> TrainConfig:
    """Validate flat key=value pairs into a TrainConfig; loss weights are nested."""
    fields = dict(values)
    weights = {key: fields.pop(key) for key in list(fields) if key in WEIGHT_KEYS}
    unknown = sorted(key for key in fields if key not in TrainConfig.model_fields or key == "weights")
    if unknown:
        raise ConfigError(
            message="Unknown config keys",
            details=f"Unknown keys: {', '.join(unknown)}",
            example="Valid keys: " + ", ".join(sorted(set(TrainConfig.model_fields) - {"weights"} | WEIGHT_KEYS))
        )
    try:
        return TrainConfig(weights=LossWeights(**weights), **fields)
    except ValidationError as e:
        raise ConfigError(message="Invalid training config", details=str(e)) from e


def load_train_config(path: Optional[Path], overrides: Iterable[str] = ()) -> TrainConfig:
    values: Dict[str, str] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(
                message="Config file not found",
                details=f"No config file at: {path}",
                example="train --config configs/desk.cfg"
            )
        values.update(parse_key_values(path.read_text(encoding="utf-8").splitlines(), str(path)))
    values.update(parse_key_values(overrides, "--set"))
    return build_train_config(values)


def dump_key_values(values: Dict[str, object]) -> str:
    return "".join(f"{key}={value}\n" for key, value in values.items())
