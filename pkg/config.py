"""Configuration module for the token auditor.

Two layers:
    Config      process environment (after load_dotenv), read once at import
    ToolConfig  per-run settings; built from Config defaults, then a flat
                `key = value` file, then command-line overrides
"""

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from dotenv import load_dotenv

load_dotenv()

TOOL_VERSION = "1.0.0"

WEIGHT_KEYS = (
    "SelfDestruction",
    "Deprecation",
    "ChangeOfAddress",
    "Minting",
    "Burning",
    "UnguardedCapability",
)


class ConfigError(ValueError):
    """Invalid configuration file or value."""


class Config:
    """Auditor configuration loaded from environment variables."""

    # Logging
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()
    LOG_FILE: str = os.getenv("LOG_FILE", "")

    # Verified-source provider
    PROVIDER_URL: str = os.getenv("PROVIDER_URL", "")
    API_KEY_ENV: str = os.getenv("API_KEY_ENV", "TOKEN_AUDITOR_API_KEY")

    # Corpus scan
    JOBS: int = int(os.getenv("JOBS", "1"))

    @classmethod
    def validate(cls) -> None:
        """Validate environment-provided values.

        Raises:
            ConfigError: If any value is out of range.
        """
        invalid = []
        if cls.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            invalid.append("LOG_LEVEL")
        if cls.JOBS < 1:
            invalid.append("JOBS")
        if not cls.API_KEY_ENV:
            invalid.append("API_KEY_ENV")

        if invalid:
            raise ConfigError(f"Invalid environment variables: {', '.join(invalid)}")


# ========== Flat key = value files ==========

def parse_key_value_file(path: str) -> List[Tuple[str, str, int]]:
    """Read `key = value` lines, skipping blanks and `#` comments.

    Returns:
        (key, value, line number) triples in file order.

    Raises:
        ConfigError: If the file is missing or a line has no '='.
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigError(f"Config file not found: {path}")

    entries = []
    for number, raw in enumerate(file_path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{number}: missing key")
        entries.append((key, value, number))
    return entries


def _positive_int(key: str, value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise ConfigError(f"'{key}' must be a positive integer, got {value!r}") from None
    if number <= 0:
        raise ConfigError(f"'{key}' must be a positive integer, got {value!r}")
    return number


def _positive_float(key: str, value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise ConfigError(f"'{key}' must be a positive number, got {value!r}") from None
    if number <= 0:
        raise ConfigError(f"'{key}' must be a positive number, got {value!r}")
    return number


def _weight(key: str, value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise ConfigError(f"Weight '{key}' must be an integer 0-100, got {value!r}") from None
    if not 0 <= number <= 100:
        raise ConfigError(f"Weight '{key}' must be an integer 0-100, got {value!r}")
    return number


def _names(value: str) -> Tuple[str, ...]:
    return tuple(part.strip().lower() for part in value.split(",") if part.strip())


def load_weights(path: str) -> Dict[str, int]:
    """Read a weights file: pattern name = integer 0-100.

    Raises:
        ConfigError: On an unknown pattern name or an out-of-range value.
    """
    weights: Dict[str, int] = {}
    for key, value, number in parse_key_value_file(path):
        if key not in WEIGHT_KEYS:
            raise ConfigError(f"{path}:{number}: unknown weight key '{key}'")
        weights[key] = _weight(key, value)
    return weights


# ========== Tool configuration ==========

@dataclass(frozen=True)
class ToolConfig:
    """Settings for one CLI run; every numeric value is positive."""

    weights: Dict[str, int] = field(default_factory=dict)

    # Provider
    provider_url: str = ""
    provider_query: str = "module=contract&action=getsourcecode&address={address}&apikey={api_key}"
    source_field: str = "result.0.SourceCode"
    name_field: str = "result.0.ContractName"
    api_key_env: str = "TOKEN_AUDITOR_API_KEY"
    min_request_interval: float = 0.2
    max_retries: int = 3
    retry_backoff_factor: float = 0.5
    request_timeout: float = 10.0

    # Simulator
    delay: int = 604800
    window: int = 2592000
    cap: Optional[int] = None
    cap_percent: int = 1

    # Scan
    jobs: int = 1
    target_contract: Optional[str] = None
    supply_markers: Tuple[str, ...] = ("supply",)
    balance_markers: Tuple[str, ...] = ("balance",)

    @classmethod
    def from_env(cls) -> "ToolConfig":
        return cls(provider_url=Config.PROVIDER_URL, api_key_env=Config.API_KEY_ENV, jobs=max(1, Config.JOBS))

    def with_file(self, path: str) -> "ToolConfig":
        """Apply a `--config` file on top of this configuration.

        Raises:
            ConfigError: Naming the offending key (and line) on any bad entry.
        """
        changes: Dict[str, object] = {}
        weights = dict(self.weights)
        for key, value, number in parse_key_value_file(path):
            if key in WEIGHT_KEYS:
                weights[key] = _weight(key, value)
            elif key in _STRING_KEYS:
                changes[key] = value
            elif key in _INT_KEYS:
                changes[key] = _positive_int(key, value)
            elif key in _FLOAT_KEYS:
                changes[key] = _positive_float(key, value)
            elif key in _LIST_KEYS:
                changes[key] = _names(value)
            else:
                raise ConfigError(f"{path}:{number}: unknown config key '{key}'")
        if "cap_percent" in changes and changes["cap_percent"] > 100:
            raise ConfigError(f"'cap_percent' must be at most 100, got {changes['cap_percent']}")
        changes["weights"] = weights
        return dataclasses.replace(self, **changes)

    def with_overrides(self, **overrides) -> "ToolConfig":
        """Apply command-line values; None means "not given".

        Raises:
            ConfigError: If a numeric override is not positive.
        """
        changes = {key: value for key, value in overrides.items() if value is not None}
        for key, value in changes.items():
            if key in _INT_KEYS + _FLOAT_KEYS and value <= 0:
                raise ConfigError(f"'{key}' must be positive, got {value}")
        if "weights" in changes:
            changes["weights"] = {**self.weights, **changes["weights"]}
        return dataclasses.replace(self, **changes)


_STRING_KEYS = ("provider_url", "provider_query", "source_field", "name_field",
                "api_key_env", "target_contract")
_INT_KEYS = ("max_retries", "delay", "window", "cap", "cap_percent", "jobs")
_FLOAT_KEYS = ("min_request_interval", "retry_backoff_factor", "request_timeout")
_LIST_KEYS = ("supply_markers", "balance_markers")
