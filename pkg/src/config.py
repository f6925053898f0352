"""
Настройки из окружения (.env).
Значения по умолчанию совпадают с теми, что описаны в QUICK_SETUP.md.
"""
import os
from dataclasses import dataclass
from fractions import Fraction

from dotenv import load_dotenv

from errors import ConfigError

DEFAULT_SEED = 42
DEFAULT_DEGREE_CAP = 8
DEFAULT_SUBSET_SAMPLES = 512
DEFAULT_ABB_THRESHOLD = "0.05"
DEFAULT_WORKERS = 1
DEFAULT_LOG_LEVEL = "WARNING"


@dataclass(frozen=True)
class AuditSettings:
    """Параметры аудита IR/IC"""
    degree_cap: int = DEFAULT_DEGREE_CAP
    subset_samples: int = DEFAULT_SUBSET_SAMPLES
    seed: int = DEFAULT_SEED
    workers: int = DEFAULT_WORKERS
    grid_extras: tuple = ()


@dataclass(frozen=True)
class RunSettings:
    seed: int = DEFAULT_SEED
    workers: int = DEFAULT_WORKERS
    abb_threshold: Fraction = Fraction(DEFAULT_ABB_THRESHOLD)
    log_level: str = DEFAULT_LOG_LEVEL
    audit: AuditSettings = AuditSettings()


def _int_env(name: str, default: int, minimum: int | None = None) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{name} должен быть целым числом, получено {raw!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} должен быть >= {minimum}, получено {value}")
    return value


def load_settings() -> RunSettings:
    """Читает .env и собирает настройки; CLI может переопределить их флагами"""
    load_dotenv()

    seed = _int_env("NRM_SEED", DEFAULT_SEED)
    workers = _int_env("NRM_WORKERS", DEFAULT_WORKERS, minimum=1)
    degree_cap = _int_env("NRM_DEGREE_CAP", DEFAULT_DEGREE_CAP, minimum=0)
    samples = _int_env("NRM_SUBSET_SAMPLES", DEFAULT_SUBSET_SAMPLES, minimum=1)

    raw_threshold = os.getenv("NRM_ABB_THRESHOLD", DEFAULT_ABB_THRESHOLD)
    try:
        threshold = Fraction(raw_threshold.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"NRM_ABB_THRESHOLD не число: {raw_threshold!r}")
    if threshold < 0:
        raise ConfigError("NRM_ABB_THRESHOLD не может быть отрицательным")

    log_level = os.getenv("NRM_LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()

    return RunSettings(
        seed=seed,
        workers=workers,
        abb_threshold=threshold,
        log_level=log_level,
        audit=AuditSettings(
            degree_cap=degree_cap,
            subset_samples=samples,
            seed=seed,
            workers=workers,
        ),
    )
