"""Configuration management using Pydantic Settings.

Priority: CLI args > env vars > config file > defaults.

A config file is one flat JSON object. Keys naming :class:`LabSettings`
fields (seed, workers, out_dir, ...) configure the run; every other key
describes the experiment.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from bprelab.errors import ConfigError

U64_LIMIT = 2**64

ExperimentKind = Literal[
    "validate",
    "lyapunov",
    "calibrate",
    "survival",
    "tau-tail",
    "rayleigh-walk",
    "rayleigh-logpop",
    "scaled-population",
    "kesten-stigum",
    "series-check",
    "local-limit",
]

EXPERIMENT_KINDS: tuple[str, ...] = ExperimentKind.__args__  # type: ignore[attr-defined]

SeedSource = Literal["default", "config", "env", "cli"]


def _parse_comma_int_list(v: Any) -> Any:
    """Parse comma-separated string into list of ints."""
    if isinstance(v, str):
        return [int(item.strip()) for item in v.split(",") if item.strip()]
    return v


def _parse_comma_float_list(v: Any) -> Any:
    if isinstance(v, str):
        return [float(item.strip()) for item in v.split(",") if item.strip()]
    return v


class Thresholds(BaseModel):
    """Verdict thresholds; every verdict in a report names the one it used."""

    ks_walk: float = 0.05
    ks_logpop: float = 0.07
    ks_two_sample: float = 0.05
    flatness: float = 1.15
    fit_residual: float = 0.1
    series_residual: float = 0.3
    local_limit_factor: float = 3.0
    ks_coincidence: float = 0.95
    level_tolerance: float = 0.2
    weight_sigmas: float = 3.0


class LabSettings(BaseSettings):
    """Run settings shared by every experiment."""

    # === Seeding and fan-out ===
    seed: int = 0
    workers: int = 1
    block_size: int = 4096

    # === Output ===
    out_dir: str = "out"

    # === Verdicts ===
    min_accepted: int = 100
    thresholds: Thresholds = Thresholds()
    force: bool = False

    # === Logging ===
    log_level: str = "info"

    model_config = SettingsConfigDict(
        env_prefix="BPRELAB_",
        case_sensitive=False,
        extra="ignore",
    )

    @model_validator(mode="after")
    def validate_settings(self) -> "LabSettings":
        errors: list[str] = []
        if not 0 <= self.seed < U64_LIMIT:
            errors.append(f"seed must be a 64-bit unsigned value, got: {self.seed}")
        if self.workers < 1:
            errors.append(f"workers must be >= 1, got: {self.workers}")
        if self.block_size < 1:
            errors.append(f"block_size must be >= 1, got: {self.block_size}")
        if self.min_accepted < 1:
            errors.append(f"min_accepted must be >= 1, got: {self.min_accepted}")
        if self.log_level.lower() not in ("debug", "info", "warning", "error", "critical"):
            errors.append(f"unknown log_level: {self.log_level}")
        if errors:
            raise ValueError("\n  - ".join(errors))
        return self


class ExperimentConfig(BaseModel):
    """One experiment: what to run on which ensemble, with which budgets."""

    kind: ExperimentKind
    ensemble: str

    # === Starting points ===
    z: list[int] | None = None
    z_alt: list[int] | None = None
    x0: list[float] | None = None
    a: float = 0.0
    j: int = 0

    # === Horizons and budgets ===
    horizons: list[int] = [16, 64, 256]
    N: int = 10_000
    N_env: int = 10_000
    N_train: int = 4096
    N_sigma: int = 4096
    sigma_horizon: int = 256
    burn_in: int = 64

    # === Hypotheses ===
    delta: float = 0.5
    epsilon: float = 0.0625
    K: float = 16.0

    # === Experiment-specific ===
    target_tol: float = 0.01
    b_list: list[int] = [0, 1, 2]
    a_grid: list[float] = [0.0, 1.0, 2.0, 4.0, 8.0]
    series_n_max: int = 256
    env_seed: int | None = None
    w_threshold: float = 0.01

    settings: LabSettings = Field(default_factory=LabSettings)
    seed_source: SeedSource = "default"

    model_config = {"extra": "forbid"}

    @field_validator("horizons", "z", "z_alt", "b_list", mode="before")
    @classmethod
    def parse_comma_int_list(cls, v: Any) -> Any:
        return _parse_comma_int_list(v)

    @field_validator("x0", "a_grid", mode="before")
    @classmethod
    def parse_comma_float_list(cls, v: Any) -> Any:
        return _parse_comma_float_list(v)

    @model_validator(mode="after")
    def validate_experiment(self) -> "ExperimentConfig":
        errors: list[str] = []

        for name in ("N", "N_env", "N_train", "N_sigma", "sigma_horizon"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be >= 1, got: {getattr(self, name)}")
        if self.burn_in < 0:
            errors.append(f"burn_in must be >= 0, got: {self.burn_in}")

        hs = self.horizons
        if not hs:
            errors.append("horizons must not be empty")
        elif hs[0] < 0 or any(b <= a for a, b in zip(hs, hs[1:])):
            errors.append(f"horizons must be non-negative and strictly increasing, got: {hs}")

        for name in ("z", "z_alt"):
            z = getattr(self, name)
            if z is None:
                continue
            if any(c < 0 for c in z):
                errors.append(f"{name} must be non-negative, got: {z}")
            elif sum(z) == 0:
                errors.append(f"{name} must be nonzero")
        if self.x0 is not None and (any(v < 0 for v in self.x0) or sum(self.x0) <= 0):
            errors.append(f"x0 must be non-negative with a positive sum, got: {self.x0}")

        if not 0.0 < self.delta <= 1.0:
            errors.append(f"delta must lie in (0, 1], got: {self.delta}")
        if not 0.0 < self.epsilon < 1.0:
            errors.append(f"epsilon must lie in (0, 1), got: {self.epsilon}")
        if self.K <= 0:
            errors.append(f"K must be positive, got: {self.K}")
        if self.target_tol <= 0:
            errors.append(f"target_tol must be positive, got: {self.target_tol}")
        if self.env_seed is not None and not 0 <= self.env_seed < U64_LIMIT:
            errors.append(f"env_seed must be a 64-bit unsigned value, got: {self.env_seed}")

        if errors:
            raise ValueError("\n  - ".join(errors))
        return self

    @property
    def seed(self) -> int:
        return self.settings.seed

    def echo(self) -> dict[str, Any]:
        """The configuration as written into reports.

        Worker count, output directory and log level do not change results
        and are left out, so reports compare byte for byte across them.
        """
        return self.model_dump(mode="json", exclude={"settings": {"workers", "out_dir", "log_level"}})


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "config"
        lines.append(f"{where}: {err['msg']}")
    return "Configuration validation failed:\n  - " + "\n  - ".join(lines)


def load_config(
    cli_overrides: dict[str, Any] | None = None,
) -> ExperimentConfig:
    """Load configuration with priority: CLI > env > config file > defaults.

    The config file is named by ``_config_path`` in ``cli_overrides`` or by
    ``BPRELAB_CONFIG``. Where the seed came from is kept in ``seed_source``.
    """
    cli = dict(cli_overrides or {})

    # Determine config file path
    config_path = cli.pop("_config_path", None) or os.environ.get("BPRELAB_CONFIG")

    file_values: dict[str, Any] = {}
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {config_path}", path=str(config_path))
        try:
            with open(path, encoding="utf-8") as f:
                file_values = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config file is not valid JSON: {exc}", path=str(config_path)) from exc
        if not isinstance(file_values, dict):
            raise ConfigError("Config file must hold a JSON object", path=str(config_path))

    setting_keys = set(LabSettings.model_fields)
    cli_settings = {k: v for k, v in cli.items() if k in setting_keys}
    cli_experiment = {k: v for k, v in cli.items() if k not in setting_keys}
    file_settings = {k: v for k, v in file_values.items() if k in setting_keys}
    file_experiment = {k: v for k, v in file_values.items() if k not in setting_keys}

    try:
        # Init kwargs beat env vars in pydantic-settings, so CLI goes in as
        # kwargs and file values only fill what neither of them set.
        settings = LabSettings(**cli_settings)
        fill = {k: v for k, v in file_settings.items() if k not in settings.model_fields_set}
        if fill:
            settings = LabSettings(**{**fill, **cli_settings})

        if "seed" in cli_settings:
            seed_source: SeedSource = "cli"
        elif "seed" in settings.model_fields_set and "seed" not in fill:
            seed_source = "env"
        elif "seed" in file_settings:
            seed_source = "config"
        else:
            seed_source = "default"

        merged = {**file_experiment, **cli_experiment}
        config = ExperimentConfig(**merged, settings=settings, seed_source=seed_source)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from exc

    if config_path and not Path(config.ensemble).is_absolute() and not Path(config.ensemble).exists():
        beside = Path(config_path).parent / config.ensemble
        if beside.exists():
            config = config.model_copy(update={"ensemble": str(beside)})
    return config
