"""Settings loaded from config.yaml with environment overrides."""
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from .errors import ConfigError
from .utils import setup_logging


logger = setup_logging(__name__)

CONFIG_PATH_ENV = "TWINBEAM_CONFIG_PATH"
ETA_ENV = "TWINBEAM_ETA"
DEFAULT_CONFIG_FILE = "config.yaml"

Range = Tuple[float, float, int]


@dataclass(frozen=True)
class Settings:
    """Numerical defaults shared by the library entry points and the CLI."""

    eta: float = 0.85
    tb: float = 1.0
    max_stages: int = 10_000_000
    oracle_threshold: float = 1e-4
    oracle_stages: Tuple[int, ...] = (1000, 2000, 4000, 8000, 16000, 32000, 64000, 100000)
    inversion_tolerance: float = 1e-10
    inversion_max_iterations: int = 200
    unseeded_ratio: float = 1e-6
    float_digits: int = 9
    sweep_ta_range: Range = (0.05, 1.0, 96)
    sweep_gain_range: Range = (1.0, 6.0, 51)
    compare_gain: float = 3.0
    compare_t_range: Range = (0.3, 1.0, 100)
    log_level: str = "INFO"
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        _check_transmission("eta", self.eta)
        _check_transmission("tb", self.tb)
        if self.max_stages < 1:
            raise ConfigError(f"max_stages must be >= 1, got {self.max_stages}")
        if not self.oracle_threshold > 0.0:
            raise ConfigError(f"oracle.threshold must be > 0, got {self.oracle_threshold}")
        stages = list(self.oracle_stages)
        if not stages or any(n < 1 for n in stages) or any(b <= a for a, b in zip(stages, stages[1:])):
            raise ConfigError(f"oracle.stages must be ascending positive integers, got {stages}")
        if not self.inversion_tolerance > 0.0 or self.inversion_max_iterations < 1:
            raise ConfigError("inversion tolerance must be > 0 and max_iterations >= 1")
        if not 0.0 <= self.unseeded_ratio < 1.0:
            raise ConfigError(f"inversion.unseeded_ratio must lie in [0, 1), got {self.unseeded_ratio}")
        if not 1 <= self.float_digits <= 17:
            raise ConfigError(f"output.float_digits must lie in [1, 17], got {self.float_digits}")
        _check_range("sweep.ta_range", self.sweep_ta_range, 0.0, 1.0, open_low=True)
        _check_range("sweep.gain_range", self.sweep_gain_range, 1.0, math.inf)
        _check_range("compare.t_range", self.compare_t_range, 0.0, 1.0, open_low=True)
        if not self.compare_gain >= 1.0:
            raise ConfigError(f"compare.gain must be >= 1, got {self.compare_gain}")

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return asdict(self)


def _check_transmission(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and 0.0 < value <= 1.0):
        raise ConfigError(f"{name} must lie in (0, 1], got {value!r}")


def _check_range(name: str, rng: Range, low: float, high: float, open_low: bool = False) -> None:
    lo, hi, count = rng
    below = lo <= low if open_low else lo < low
    if below or hi > high or hi < lo or count < 2:
        raise ConfigError(f"{name} must be (min, max, count>=2) within the domain, got {list(rng)}")


def _as_range(name: str, raw: Any) -> Range:
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise ConfigError(f"{name} must be a [min, max, count] list, got {raw!r}")
    try:
        return float(raw[0]), float(raw[1]), int(raw[2])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name}: {e}") from e


def _flatten(data: Dict[str, Any]) -> Dict[str, Any]:
    """Map the nested YAML layout onto Settings field names."""
    medium = data.get("medium") or {}
    detection = data.get("detection") or {}
    oracle = data.get("oracle") or {}
    inversion = data.get("inversion") or {}
    output = data.get("output") or {}
    sweep = data.get("sweep") or {}
    compare = data.get("compare") or {}
    logging_cfg = data.get("logging") or {}

    values: Dict[str, Any] = {}
    pairs = [
        ("eta", detection.get("eta")),
        ("tb", medium.get("tb")),
        ("max_stages", oracle.get("max_stages")),
        ("oracle_threshold", oracle.get("threshold")),
        ("inversion_tolerance", inversion.get("tolerance")),
        ("inversion_max_iterations", inversion.get("max_iterations")),
        ("unseeded_ratio", inversion.get("unseeded_ratio")),
        ("float_digits", output.get("float_digits")),
        ("compare_gain", compare.get("gain")),
        ("log_level", logging_cfg.get("level")),
    ]
    try:
        for key, raw in pairs:
            if raw is None:
                continue
            default = getattr(Settings, key)
            values[key] = type(default)(raw)
        if oracle.get("stages") is not None:
            values["oracle_stages"] = tuple(int(n) for n in oracle["stages"])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid configuration value: {e}") from e
    if sweep.get("ta_range") is not None:
        values["sweep_ta_range"] = _as_range("sweep.ta_range", sweep["ta_range"])
    if sweep.get("gain_range") is not None:
        values["sweep_gain_range"] = _as_range("sweep.gain_range", sweep["gain_range"])
    if compare.get("t_range") is not None:
        values["compare_t_range"] = _as_range("compare.t_range", compare["t_range"])
    return values


def load_settings(path: Optional[str] = None) -> Settings:
    """Load settings from YAML, then apply environment overrides.

    Args:
        path: Explicit config file; must exist when given. Otherwise
            TWINBEAM_CONFIG_PATH, then ./config.yaml, then built-in defaults.

    Returns:
        Validated Settings

    Raises:
        ConfigError: missing explicit file, unreadable YAML or invalid values
    """
    explicit = path or os.getenv(CONFIG_PATH_ENV)
    cfg_path = Path(explicit or DEFAULT_CONFIG_FILE)

    values: Dict[str, Any] = {}
    source = None
    if cfg_path.exists():
        try:
            with cfg_path.open("r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"could not read {cfg_path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{cfg_path} must hold a mapping at the top level")
        values = _flatten(data)
        source = str(cfg_path)
        logger.debug(f"Loaded configuration from {cfg_path}")
    elif explicit:
        raise ConfigError(f"Could not find config file at {cfg_path.resolve()}")

    env_eta = os.getenv(ETA_ENV)
    if env_eta:
        try:
            values["eta"] = float(env_eta)
        except ValueError as e:
            raise ConfigError(f"{ETA_ENV} must be a number, got {env_eta!r}") from e

    return Settings(source=source, **values)


def with_overrides(settings: Settings, **overrides: Any) -> Settings:
    """Settings with every non-None override applied (command-line flags)."""
    return replace(settings, **{k: v for k, v in overrides.items() if v is not None})
