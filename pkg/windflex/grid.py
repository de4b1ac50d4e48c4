"""Grid case document: buses, lines, generators, wind farms and loads."""

import logging
from pathlib import Path

import orjson
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from windflex.errors import ConfigError

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


class _Doc(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class Bus(_Doc):
    id: str
    zone: str = "Z1"


class Line(_Doc):
    id: str
    from_bus: str = Field(alias="from")
    to_bus: str = Field(alias="to")
    susceptance: float = Field(gt=0)
    limit: float = Field(gt=0)


class InitialStatus(_Doc):
    on: bool = False
    # periods already spent in the current state; None means no residual up/down obligation
    hours: int | None = Field(None, ge=0)
    output: float = Field(0.0, ge=0)


class Generator(_Doc):
    id: str
    bus: str
    pmin: float = Field(ge=0)
    pmax: float = Field(gt=0)
    ramp_60: float = Field(ge=0)
    ramp_10: float = Field(ge=0)
    min_up: int = Field(1, ge=1)
    min_down: int = Field(1, ge=1)
    no_load: float = Field(0.0, ge=0)
    startup: float = Field(0.0, ge=0)
    shutdown: float = Field(0.0, ge=0)
    cost_segments: list[tuple[float, float]] = Field(min_length=1)
    initial: InitialStatus = Field(default_factory=InitialStatus)

    @model_validator(mode="after")
    def _check(self):
        if self.pmin > self.pmax:
            raise ValueError(f"generator {self.id}: pmin exceeds pmax")
        slopes = [s for s, _ in self.cost_segments]
        if any(b <= a for a, b in zip(slopes, slopes[1:])):
            raise ValueError(f"generator {self.id}: cost segments must have increasing marginal cost")
        if self.initial.on and not (self.pmin <= self.initial.output <= self.pmax):
            raise ValueError(f"generator {self.id}: initial output outside [pmin, pmax]")
        if not self.initial.on and self.initial.output:
            raise ValueError(f"generator {self.id}: an offline unit cannot have initial output")
        return self


class WindFarm(_Doc):
    id: str
    bus: str
    capacity: float = Field(gt=0)
    forecast: list[float] | None = None
    realized: list[float] | None = None


class Load(_Doc):
    id: str
    bus: str
    forecast: list[float]
    realized: list[float] | None = None

    @field_validator("forecast", "realized")
    @classmethod
    def _non_negative(cls, v):
        if v is not None and any(x < 0 for x in v):
            raise ValueError("load values must be non-negative")
        return v


class GridCase(_Doc):
    version: int = FORMAT_VERSION
    name: str = "case"
    periods: int = Field(ge=1)
    reference_bus: str
    contingency_fraction: float = Field(0.0, ge=0)
    load_reserve_extent: float = Field(ge=0)
    largest_unit_contingency: bool = True
    buses: list[Bus] = Field(min_length=1)
    lines: list[Line] = Field(default_factory=list)
    generators: list[Generator] = Field(min_length=1)
    wind_farms: list[WindFarm] = Field(default_factory=list)
    loads: list[Load] = Field(default_factory=list)

    @model_validator(mode="after")
    def _consistency(self):
        if self.version != FORMAT_VERSION:
            raise ValueError(f"unsupported grid case version {self.version}")
        bus_ids = [b.id for b in self.buses]
        if len(set(bus_ids)) != len(bus_ids):
            raise ValueError("duplicate bus ids")
        known = set(bus_ids)
        if self.reference_bus not in known:
            raise ValueError(f"reference bus {self.reference_bus!r} does not exist")
        for line in self.lines:
            if line.from_bus not in known or line.to_bus not in known:
                raise ValueError(f"line {line.id}: endpoint not among buses")
            if line.from_bus == line.to_bus:
                raise ValueError(f"line {line.id}: endpoints coincide")
        for group in (self.generators, self.wind_farms, self.loads):
            ids = [x.id for x in group]
            if len(set(ids)) != len(ids):
                raise ValueError(f"duplicate ids: {ids}")
            for item in group:
                if item.bus not in known:
                    raise ValueError(f"{item.id}: bus {item.bus!r} does not exist")
        for item in [*self.wind_farms, *self.loads]:
            for series in (item.forecast, item.realized):
                if series is not None and len(series) != self.periods:
                    raise ValueError(f"{item.id}: series length {len(series)} != periods {self.periods}")
        return self

    @property
    def bus_ids(self) -> list[str]:
        return [b.id for b in self.buses]

    def zones(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for b in self.buses:
            out.setdefault(b.zone, []).append(b.id)
        return out

    def zone_of(self, bus: str) -> str:
        return next(b.zone for b in self.buses if b.id == bus)

    def farm(self, farm_id: str) -> WindFarm:
        for f in self.wind_farms:
            if f.id == farm_id:
                return f
        raise ConfigError(f"wind farm {farm_id!r} not in grid case")

    def with_wind(self, series: dict[str, tuple[list[float], list[float] | None]]) -> "GridCase":
        """Copy with DA forecast and RT realization replaced per farm id."""
        farms = []
        for f in self.wind_farms:
            if f.id in series:
                fc, rt = series[f.id]
                f = f.model_copy(update={"forecast": list(fc), "realized": list(rt) if rt is not None else None})
            farms.append(f)
        return self.model_copy(update={"wind_farms": farms})

    def to_document(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


def parse_grid_case(doc: dict) -> GridCase:
    try:
        return GridCase.model_validate(doc)
    except ValidationError as e:
        msgs = "; ".join(f"{'.'.join(str(x) for x in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid grid case: {msgs}") from e


def load_grid_case(path: Path | str) -> GridCase:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"grid case not found: {path}")
    case = parse_grid_case(orjson.loads(path.read_bytes()))
    log.info("[ingest] grid case %s: %d buses, %d lines, %d generators, %d farms",
             case.name, len(case.buses), len(case.lines), len(case.generators), len(case.wind_farms))
    return case
