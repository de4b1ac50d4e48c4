"""Extent-, probability- and risk-based flexibility reserve requirements."""

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np
import pandas as pd

from windflex.errors import DataValidationError
from windflex.stress_scenarios import ScenarioSet

log = logging.getLogger(__name__)

METHODS = ("extent", "probability", "risk")


@dataclass(frozen=True)
class ReserveSchedule:
    entity: str
    up: np.ndarray
    down: np.ndarray
    method: str
    level: float
    timestamps: pd.DatetimeIndex | None = None

    def __post_init__(self):
        if self.up.shape != self.down.shape:
            raise DataValidationError("upward and downward series differ in length")
        if np.any(self.up < 0) or np.any(self.down < 0):
            raise DataValidationError(f"{self.entity}: reserve requirements must be non-negative")

    @property
    def periods(self) -> int:
        return self.up.size

    def to_frame(self) -> pd.DataFrame:
        stamps = self.timestamps.astype(str) if self.timestamps is not None else np.arange(self.periods)
        return pd.DataFrame({
            "entity": self.entity,
            "timestamp": stamps,
            "R_up": self.up,
            "R_down": self.down,
            "method": self.method,
            "level": self.level,
        })


@dataclass(frozen=True)
class RiskLevel:
    rho: float
    unit: str = "mw"

    def __post_init__(self):
        if self.rho < 0:
            raise DataValidationError("risk level must be non-negative")
        if self.unit not in ("mw", "fraction"):
            raise DataValidationError(f"unknown risk unit {self.unit!r}")

    def mw(self, rated: float | None) -> float:
        if self.unit == "mw":
            return self.rho
        if rated is None:
            raise DataValidationError("a fractional risk level needs the rated power")
        return self.rho * rated


def extent_reserve(forecast, rated: float, epsilon: float, entity: str = "farm", timestamps=None) -> ReserveSchedule:
    f = np.asarray(forecast, dtype=float)
    if epsilon < 0:
        raise DataValidationError("epsilon must be non-negative")
    if np.any(f < -1e-9) or np.any(f > rated + 1e-9):
        raise DataValidationError("forecast must lie in [0, rated]")
    f = np.clip(f, 0.0, rated)
    up = epsilon * f
    down = np.minimum(rated - f, epsilon * f)
    return ReserveSchedule(entity, up, down, "extent", epsilon, timestamps)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5 + 1e-9))


def probability_indices(n: int, ci: float) -> tuple[int, int]:
    """1-based positions in the ascending sort bounding the central ci share."""
    lower = max(1, _round_half_up(0.5 * n * (1 - ci)))
    upper = min(n, _round_half_up(0.5 * n * (1 + ci)))
    return lower, upper


def _inputs(scenarios: ScenarioSet, forecast) -> tuple[np.ndarray, np.ndarray]:
    if scenarios.kind != "power":
        raise DataValidationError("reserve sizing needs a power scenario set")
    if scenarios.n < 2:
        raise DataValidationError("reserve sizing needs at least 2 scenarios")
    f = scenarios.forecast_mw() if forecast is None else np.asarray(forecast, dtype=float)
    if f.shape != (scenarios.periods,):
        raise DataValidationError("forecast length does not match the scenario periods")
    return np.sort(scenarios.mw(), axis=0), f


def probability_reserve(scenarios: ScenarioSet, forecast=None, ci: float = 0.8,
                        entity: str | None = None) -> ReserveSchedule:
    if not 0 <= ci <= 1:
        raise DataValidationError("ci must lie in [0, 1]")
    s, f = _inputs(scenarios, forecast)
    lower, upper = probability_indices(scenarios.n, ci)
    up = np.maximum(0.0, f - s[lower - 1])
    down = np.maximum(0.0, s[upper - 1] - f)
    return ReserveSchedule(entity or scenarios.entity or "farm", up, down, "probability", ci, scenarios.timestamps)


def _risk_column(s: np.ndarray, f: float, rho: float) -> tuple[float, float]:
    """Risk-capped reserve for one period from ascending scenarios s (0-based)."""
    n = s.size
    i = np.arange(1, n + 1)
    risk_up = (s - s[0]) * (i - 1) / n
    # downward side uses S_{N-i}; undefined at i = N
    below = np.full(n, np.nan)
    below[:-1] = s[n - 1 - i[:-1]]
    risk_down = (s[-1] - below) * ((n - i) - 1) / n

    over_up = risk_up > rho
    over_down = ~(risk_down <= rho)
    both = np.flatnonzero(over_up & over_down)
    stop = int(both[0]) if both.size else n

    ok_up = np.flatnonzero(~over_up[:stop])
    ok_down = np.flatnonzero(~over_down[:stop])
    up = f - s[ok_up[-1]] if ok_up.size else f - s[0]
    down = below[ok_down[-1]] - f if ok_down.size else s[-1] - f
    return max(0.0, up), max(0.0, down)


def risk_reserve(scenarios: ScenarioSet, forecast=None, rho: RiskLevel | float = 0.0,
                 entity: str | None = None) -> ReserveSchedule:
    """Largest scenario step whose expected shortfall stays within rho, per side and period."""
    level = rho if isinstance(rho, RiskLevel) else RiskLevel(float(rho))
    cap = level.mw(scenarios.capacity)
    s, f = _inputs(scenarios, forecast)
    pairs = [_risk_column(s[:, t], f[t], cap) for t in range(scenarios.periods)]
    up = np.array([p[0] for p in pairs])
    down = np.array([p[1] for p in pairs])
    return ReserveSchedule(entity or scenarios.entity or "farm", up, down, "risk", level.rho, scenarios.timestamps)


def size_reserve(method: str, scenarios: ScenarioSet, level: float, *, rated: float | None = None,
                 rho_unit: str = "fraction", entity: str | None = None) -> ReserveSchedule:
    """Dispatch to one of the three sizing methods by name."""
    entity = entity or scenarios.entity or "farm"
    if method == "extent":
        rated = rated if rated is not None else scenarios.capacity
        return extent_reserve(scenarios.forecast_mw(), rated, level, entity, scenarios.timestamps)
    if method == "probability":
        return probability_reserve(scenarios, ci=level, entity=entity)
    if method == "risk":
        return risk_reserve(scenarios, rho=RiskLevel(level, rho_unit), entity=entity)
    raise DataValidationError(f"unknown reserve method {method!r}")


def aggregate_reserve(schedules: Iterable[ReserveSchedule], mapping: Mapping[str, str]) -> dict[str, ReserveSchedule]:
    """Sum farm schedules into the entities named by ``mapping`` (farm -> node, zone or 'system')."""
    grouped: dict[str, list[ReserveSchedule]] = {}
    for sched in schedules:
        if sched.entity not in mapping:
            raise DataValidationError(f"farm {sched.entity!r} is not mapped to an entity")
        grouped.setdefault(mapping[sched.entity], []).append(sched)
    out = {}
    for entity, members in grouped.items():
        first = members[0]
        if any(m.periods != first.periods for m in members):
            raise DataValidationError(f"{entity}: member schedules differ in length")
        up = np.sum([m.up for m in members], axis=0)
        down = np.sum([m.down for m in members], axis=0)
        out[entity] = ReserveSchedule(entity, up, down, first.method, first.level, first.timestamps)
    return out


def reserve_frame(schedules: Iterable[ReserveSchedule]) -> pd.DataFrame:
    frames = [s.to_frame() for s in schedules]
    if not frames:
        return pd.DataFrame(columns=["entity", "timestamp", "R_up", "R_down", "method", "level"])
    return pd.concat(frames, ignore_index=True)


def read_reserve_frame(frame: pd.DataFrame) -> dict[str, ReserveSchedule]:
    out = {}
    for entity, rows in frame.groupby("entity", sort=False):
        out[str(entity)] = ReserveSchedule(
            str(entity), rows["R_up"].to_numpy(float), rows["R_down"].to_numpy(float),
            str(rows["method"].iloc[0]), float(rows["level"].iloc[0]),
        )
    return out
