import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from app.daily.schemas import FitConfig
from app.utils.env_helper import env_bool, env_float, env_int, env_none_or_str
from app.utils.exceptions import ArgumentError

logger = logging.getLogger(__name__)


class Settings(BaseModel):
    """Every tunable of the pipeline. Commands read these, never the environment."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    fit: FitConfig = FitConfig()
    kickoff_offset_hours: float = -1.0
    pulse_window_hours: float = Field(default=6.0, gt=0.0)
    tz_offset_hours: float = 1.0
    candidate_count: int = Field(default=5, ge=1, le=5)
    candidate_spread: float = Field(default=0.25, gt=0.0, lt=1.0)
    # None: refit as soon as min_refit_samples residuals are in
    refit_onset_sigmas: Optional[float] = Field(default=1.5, ge=0.0)
    min_refit_samples: int = Field(default=3, ge=3)
    free_center: bool = False
    seed: int = 0
    pulse_sigma_init: float = Field(default=1.5, gt=0.0)

    @property
    def fit_config(self) -> FitConfig:
        """`fit` with the run seed applied."""
        return self.fit.model_copy(update={"seed": self.seed})


# env var -> (dotted settings key, reader)
ENV_OVERRIDES: Dict[str, Tuple[str, Callable[[str], Any]]] = {
    "NNTP_SEED": ("seed", env_int),
    "NNTP_TZ_OFFSET_HOURS": ("tz_offset_hours", env_float),
    "NNTP_KICKOFF_OFFSET_HOURS": ("kickoff_offset_hours", env_float),
    "NNTP_PULSE_WINDOW_HOURS": ("pulse_window_hours", env_float),
    "NNTP_FREE_CENTER": ("free_center", env_bool),
    "NNTP_FIT_METHOD": ("fit.method", env_none_or_str),
    "NNTP_FIT_MAX_ITERATIONS": ("fit.max_iterations", env_int),
    "NNTP_FIT_RESTARTS": ("fit.restarts", env_int),
}


def _set_dotted(data: Dict[str, Any], key: str, value: Any) -> None:
    head, _, rest = key.partition(".")
    if rest:
        section = data.setdefault(head, {})
        if not isinstance(section, dict):
            raise ArgumentError(f"config key {head!r} must be a mapping", stage="config")
        _set_dotted(section, rest, value)
    else:
        data[head] = value


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as handle:
            loaded = yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        raise ArgumentError(f"cannot parse config {path}: {exc}", stage="config") from exc
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ArgumentError(f"config {path} must hold a mapping at top level", stage="config")
    return loaded


def load_settings(config_path: Optional[Path] = None, **overrides: Any) -> Settings:
    """
    Resolve settings from defaults, then the YAML file, then `NNTP_*`
    environment variables, then explicit `overrides` (None values skipped).

    **Errors**
    - ArgumentError (stage `config`): unreadable file, unknown key or invalid value
    """
    data: Dict[str, Any] = {}
    if config_path is not None:
        try:
            data = _read_yaml(Path(config_path))
        except OSError as exc:
            raise ArgumentError(f"cannot read config {config_path}: {exc.strerror}", stage="config") from exc

    sources = []
    for name, (key, reader) in ENV_OVERRIDES.items():
        try:
            value = reader(name)
        except ValueError as exc:
            raise ArgumentError(f"{name} is not valid: {exc}", stage="config") from exc
        if value is not None:
            _set_dotted(data, key, value)
            sources.append(name)

    for key, value in overrides.items():
        if value is not None:
            _set_dotted(data, key, value)

    try:
        settings = Settings.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ArgumentError(f"invalid setting {location}: {first['msg']}", stage="config") from exc

    logger.debug(f"settings_loaded config={config_path} env={sources} seed={settings.seed}")
    return settings
