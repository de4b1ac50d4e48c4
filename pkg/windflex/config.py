import hashlib
import logging
from pathlib import Path
from typing import Literal

import orjson
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from windflex.errors import ConfigError

load_dotenv()

log = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Process-level knobs read from the environment (and .env)."""

    model_config = SettingsConfigDict(env_prefix="WINDFLEX_", extra="ignore")

    solver: str | None = None
    threads: int | None = None
    database_url: str = "sqlite:///./windflex_runs.db"
    out_dir: str = "./runs"
    log_level: str = "INFO"


settings = Settings()

# Five-level presets per reserve method. Level 1 is the least conservative.
LEVEL_PRESETS: dict[str, tuple[float, ...]] = {
    "extent": (0.05, 0.10, 0.15, 0.20, 0.25),
    "probability": (0.20, 0.40, 0.60, 0.80, 0.999),
    "risk": (0.10, 0.20, 0.30, 0.40, 0.50),
}

# Approximates a 5 MW offshore reference machine; not ground truth for any test.
DEFAULT_CP_CURVE: tuple[tuple[float, float], ...] = (
    (3.0, 0.25), (4.0, 0.38), (5.0, 0.44), (6.0, 0.47), (7.0, 0.48), (8.0, 0.48),
    (9.0, 0.475), (10.0, 0.46), (10.6, 0.445), (12.0, 0.32), (14.0, 0.20),
    (16.0, 0.13), (18.0, 0.09), (20.0, 0.07), (22.0, 0.05), (25.0, 0.035),
)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class SyntheticData(_Section):
    days: int = Field(60, ge=2)
    forecast_days: int = Field(1, ge=1)
    seed: int = 7


class FarmData(_Section):
    history: Path | None = None
    forecast: Path | None = None
    actual: Path | None = None


class DataConfig(_Section):
    history: Path | None = None
    forecast: Path | None = None
    actual: Path | None = None
    grid_case: Path
    synthetic: SyntheticData | None = None
    timestamp_column: str = "timestamp"
    schema_: dict[str, str] = Field(default_factory=dict, alias="schema")
    farms: dict[str, FarmData] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _needs_weather(self):
        if self.synthetic is None and (self.history is None or self.forecast is None):
            raise ValueError("either data.synthetic or data.history + data.forecast is required")
        return self


class TurbineConfig(_Section):
    rotor_diameter: float = 140.0
    hub_height: float = 100.0
    rated_power: float = 5.0
    cut_in: float = 3.0
    rated_speed: float = 10.6
    cut_out: float = 25.0
    cp_curve: list[tuple[float, float]] = Field(default_factory=lambda: list(DEFAULT_CP_CURVE))
    wake_loss: float = 0.15
    plateau_mode: Literal["unity", "derated"] = "unity"

    def to_spec(self):
        from windflex.turbine import TurbineSpec

        return TurbineSpec(
            rotor_diameter=self.rotor_diameter,
            hub_height=self.hub_height,
            rated_power=self.rated_power,
            cut_in=self.cut_in,
            rated_speed=self.rated_speed,
            cut_out=self.cut_out,
            cp_speeds=tuple(s for s, _ in self.cp_curve),
            cp_values=tuple(c for _, c in self.cp_curve),
            wake_loss=self.wake_loss,
            plateau_mode=self.plateau_mode,
        )


class StressorConfig(_Section):
    n_scenarios: int = Field(1000, ge=1)
    edges: list[float] | None = None
    placeholders: dict[Literal["I", "III", "IV"], float] = Field(
        default_factory=lambda: {"I": 1.0, "III": 20.0, "IV": 30.0}
    )
    families: list[Literal["normal", "laplace", "logistic", "shifted-gamma", "student-t"]] = Field(
        default_factory=lambda: ["normal", "laplace", "logistic", "shifted-gamma", "student-t"]
    )
    min_samples: int = Field(30, ge=1)
    hist_bins: int = Field(50, ge=2)
    merge_empty_intervals: bool = True
    keep_forecast_in_region: bool = False
    key_stressor: str = "windspeed_100m"
    benchmark_bins: int = Field(10, ge=1)
    parallel: bool = False


class PcaConfig(_Section):
    window_days: int = Field(0, ge=0)


class ReserveConfig(_Section):
    method: Literal["extent", "probability", "risk"] = "risk"
    level: int = Field(3, ge=1, le=5)
    value: float | None = Field(None, ge=0)
    rho_unit: Literal["fraction", "mw"] = "fraction"
    sweep: bool = False

    def level_value(self, method: str | None = None, level: int | None = None) -> float:
        method = method or self.method
        if self.value is not None and method == self.method and level is None:
            return self.value
        return LEVEL_PRESETS[method][(level or self.level) - 1]


class Penalties(_Section):
    load_shedding: float = Field(10000.0, ge=0)
    wind_spillage: float = Field(100.0, ge=0)
    redispatch_in: float = Field(2.0, ge=0)
    redispatch_out: float = Field(5.0, ge=0)
    relax: float = Field(500.0, ge=0)

    @model_validator(mode="after")
    def _tier_order(self):
        if not 0 < self.redispatch_in < self.redispatch_out:
            raise ValueError("redispatch_in must be positive and below redispatch_out")
        return self


class SolverConfig(_Section):
    name: str = "appsi_highs"
    mip_gap: float = Field(0.001, ge=0)
    time_limit: float | None = Field(300.0, gt=0)
    threads: int = Field(1, ge=1)
    contingency_mode: Literal["literal", "exclude_self"] = "literal"
    ramp_mode: Literal["literal", "same_period"] = "literal"
    load_reserve_extent: float | None = Field(None, ge=0)
    reserve_tiebreak: float = Field(1e-3, ge=0)


class RunConfig(_Section):
    name: str = "windflex"
    seed: int = 42
    policy: Literal["none", "system", "zonal", "nodal"] = "system"
    data: DataConfig
    turbine: TurbineConfig = Field(default_factory=TurbineConfig)
    stressor: StressorConfig = Field(default_factory=StressorConfig)
    pca: PcaConfig = Field(default_factory=PcaConfig)
    reserve: ReserveConfig = Field(default_factory=ReserveConfig)
    penalties: Penalties = Field(default_factory=Penalties)
    solver: SolverConfig = Field(default_factory=SolverConfig)

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @field_validator("name")
    @classmethod
    def _safe_name(cls, v: str) -> str:
        if not v or any(ch in v for ch in "/\\ "):
            raise ValueError("name must be a non-empty token without spaces or slashes")
        return v

    @property
    def base_dir(self) -> Path:
        return self._base_dir

    def resolve(self, path: Path | str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else (self._base_dir / p).resolve()

    def config_hash(self) -> str:
        doc = self.model_dump(mode="json", by_alias=True)
        return hashlib.sha256(orjson.dumps(doc, option=orjson.OPT_SORT_KEYS)).hexdigest()

    def run_id(self) -> str:
        return f"{self.name}-{self.config_hash()[:10]}-s{self.seed}"

    def with_overrides(self, **updates) -> "RunConfig":
        """Copy with top-level or dotted-section updates, e.g. ``{"reserve.level": 2}``."""
        doc = self.model_dump(mode="python", by_alias=True)
        for key, value in updates.items():
            node = doc
            *parents, leaf = key.split(".")
            for part in parents:
                node = node[part]
            node[leaf] = value
        out = RunConfig.model_validate(doc)
        out._base_dir = self._base_dir
        return out


def _format_validation(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def parse_run_config(doc: dict, base_dir: Path | str | None = None) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(doc)
    except ValidationError as e:
        raise ConfigError(f"invalid run config: {_format_validation(e)}") from e
    cfg._base_dir = Path(base_dir).resolve() if base_dir else Path.cwd()

    if settings.solver:
        cfg.solver.name = settings.solver
    if settings.threads:
        cfg.solver.threads = settings.threads

    missing = []
    data = cfg.data
    paths = [data.grid_case]
    if data.synthetic is None:
        paths += [data.history, data.forecast, data.actual]
    for farm in data.farms.values():
        paths += [farm.history, farm.forecast, farm.actual]
    for p in paths:
        if p is not None and not cfg.resolve(p).exists():
            missing.append(str(p))
    if missing:
        raise ConfigError(f"referenced files not found: {', '.join(missing)}")
    return cfg


def load_run_config(path: Path | str) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = orjson.loads(path.read_bytes())
    except orjson.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    cfg = parse_run_config(doc, base_dir=path.parent)
    log.info("[config] loaded %s (hash=%s)", path, cfg.config_hash()[:10])
    return cfg
