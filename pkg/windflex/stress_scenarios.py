"""Stressed weather and wind-power scenario sets, envelopes and the weather-ignorant benchmark."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from windflex.errors import DataValidationError
from windflex.stress_coupling import CouplingCoefficients
from windflex.stress_transition import (
    FAMILIES,
    FittedDistribution,
    TransitionModel,
    fit_best_distribution,
    scenario_uniforms,
    stress_column,
)
from windflex.turbine import TurbineSpec, hub_speed_power, normalized_power
from windflex.weather import FeatureTable, is_direction, is_speed

log = logging.getLogger(__name__)

MIN_PRESSURE = 1.0


@dataclass(frozen=True)
class ScenarioSet:
    """N equally likely trajectories over T periods.

    ``values`` is (N, T) for speed and power sets and (N, T, p) for weather sets.
    Power sets are normalized to [0, 1]; ``capacity`` converts them to MW.
    """

    values: np.ndarray
    forecast: np.ndarray
    seed: int
    kind: str
    features: tuple[str, ...] = ()
    timestamps: pd.DatetimeIndex | None = None
    capacity: float | None = None
    entity: str = ""
    reference: np.ndarray | None = None

    def __post_init__(self):
        if self.values.ndim < 2 or self.values.shape[0] < 1:
            raise DataValidationError("a scenario set needs at least one scenario")
        if self.values.shape[1:] != self.forecast.shape:
            raise DataValidationError(
                f"scenario shape {self.values.shape[1:]} does not match forecast {self.forecast.shape}"
            )
        if self.timestamps is not None and len(self.timestamps) != self.values.shape[1]:
            raise DataValidationError("timestamps do not match the number of periods")
        if self.kind == "power":
            for arr in (self.values, self.forecast):
                if np.any(arr < -1e-12) or np.any(arr > 1 + 1e-12):
                    raise DataValidationError("normalized power scenarios must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def periods(self) -> int:
        return self.values.shape[1]

    @property
    def probability(self) -> float:
        return 1.0 / self.n

    def mw(self) -> np.ndarray:
        return self.values * (self.capacity or 1.0)

    def forecast_mw(self) -> np.ndarray:
        return self.forecast * (self.capacity or 1.0)

    def to_frame(self) -> pd.DataFrame:
        """Long table: scenario id, period, timestamp and one value column per feature."""
        n, t = self.values.shape[:2]
        idx = {
            "scenario": np.repeat(np.arange(n), t),
            "period": np.tile(np.arange(t), n),
        }
        if self.timestamps is not None:
            idx["timestamp"] = np.tile(self.timestamps.astype(str), n)
        frame = pd.DataFrame(idx)
        if self.values.ndim == 3:
            for j, fid in enumerate(self.features):
                frame[fid] = self.values[:, :, j].ravel()
        else:
            frame["value"] = self.values.ravel()
        return frame


def stress_speed_scenarios(forecast_speeds, n: int, model: TransitionModel, seed: int, *,
                           key: Sequence[int] = (), threads: int = 1, keep_forecast_in_region: bool = False,
                           timestamps=None) -> ScenarioSet:
    """N x T key-stressor trajectories; period t of scenario i uses stream (seed, *key, i)."""
    forecast = np.asarray(forecast_speeds, dtype=float)
    u = scenario_uniforms(seed, n, forecast.size, key, threads)
    values = np.column_stack([
        stress_column(v, u[:, t, :], model, keep_forecast_in_region) for t, v in enumerate(forecast)
    ])
    return ScenarioSet(values, forecast, seed, "speed", timestamps=timestamps)


def decode_direction(sine, reference_deg):
    """Degrees on the monotone branch of the sine that contains the reference direction."""
    s = np.clip(np.asarray(sine, dtype=float), -1.0, 1.0)
    ref = np.asarray(reference_deg, dtype=float)
    base = np.rad2deg(np.arcsin(s))
    deg = np.where(np.cos(np.deg2rad(ref)) >= 0, base, 180.0 - base)
    return np.mod(deg, 360.0)


def stress_weather_scenarios(forecast_day: FeatureTable, coeffs: CouplingCoefficients,
                             stressed_speeds: ScenarioSet) -> ScenarioSet:
    """Shift every coupled feature by slope x (stressed - forecast key speed), then clamp."""
    enc = forecast_day.encoded(coeffs.features).to_numpy(dtype=float)
    key = coeffs.features.index(coeffs.key_stressor)
    T = forecast_day.h
    if stressed_speeds.periods != T:
        raise DataValidationError(f"stressed speeds cover {stressed_speeds.periods} periods, forecast has {T}")
    if not np.allclose(stressed_speeds.forecast, enc[:, key], rtol=0, atol=1e-9):
        raise DataValidationError("stressed speeds were not generated from this forecast's key stressor")
    if stressed_speeds.timestamps is not None and not stressed_speeds.timestamps.equals(forecast_day.timestamps):
        raise DataValidationError("stressed speeds and forecast timestamps are not aligned")

    delta = stressed_speeds.values - enc[:, key][None, :]
    values = enc[None, :, :] + delta[:, :, None] * coeffs.slopes[None, None, :]
    values[:, :, key] = stressed_speeds.values
    for j, fid in enumerate(coeffs.features):
        col = values[:, :, j]
        if is_speed(fid):
            np.maximum(col, 0.0, out=col)
        elif is_direction(fid):
            np.clip(col, -1.0, 1.0, out=col)
        elif fid.startswith("relativehumidity"):
            np.clip(col, 0.0, 100.0, out=col)
        elif fid.startswith("pressure"):
            np.maximum(col, MIN_PRESSURE, out=col)
    raw = forecast_day.data[list(coeffs.features)].to_numpy(dtype=float)
    return ScenarioSet(values, enc, stressed_speeds.seed, "weather", coeffs.features, forecast_day.timestamps,
                       reference=raw)


def _records(values: np.ndarray, features: Sequence[str], reference: np.ndarray) -> dict:
    """Flatten (..., p) encoded weather into turbine inputs, decoding directions."""
    flat = values.reshape(-1, len(features))
    ref = np.broadcast_to(reference, values.shape).reshape(-1, len(features))
    rec = {}
    for j, fid in enumerate(features):
        rec[fid] = decode_direction(flat[:, j], ref[:, j]) if is_direction(fid) else flat[:, j]
    return rec


def scenarios_to_power(weather: ScenarioSet, spec: TurbineSpec, farm_capacity: float) -> ScenarioSet:
    """Elementwise farm power for weather scenarios, normalized to farm capacity.

    Directions decode on the branch of the raw forecast direction when the set
    carries one, otherwise on the principal branch.
    """
    if weather.kind != "weather":
        raise DataValidationError("scenarios_to_power needs a weather scenario set")
    ref = weather.reference if weather.reference is not None else np.zeros_like(weather.forecast)
    n, t, _ = weather.values.shape
    power = np.asarray(normalized_power(_records(weather.values, weather.features, ref), spec)).reshape(n, t)
    base = np.asarray(normalized_power(_records(weather.forecast, weather.features, ref), spec)).reshape(t)
    return ScenarioSet(power, base, weather.seed, "power", timestamps=weather.timestamps,
                       capacity=farm_capacity)


def table_power(table: FeatureTable, spec: TurbineSpec) -> np.ndarray:
    """Normalized power per row of a raw weather table."""
    rec = {fid: table.column(fid) for fid in table.features}
    return np.atleast_1d(normalized_power(rec, spec))


def confidence_envelope(power: ScenarioSet, ci: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-period (lower, upper) after dropping the floor((1 - ci) N) largest |errors|."""
    if not 0 < ci <= 1:
        raise DataValidationError("ci must lie in (0, 1]")
    values = power.mw()
    err = np.abs(values - power.forecast_mw()[None, :])
    keep = power.n - int(np.floor((1 - ci) * power.n + 1e-9))
    keep = max(keep, 1)
    order = np.argsort(err, axis=0, kind="stable")[:keep]
    kept = np.take_along_axis(values, order, axis=0)
    return kept.min(axis=0), kept.max(axis=0)


def envelope_coverage(lower, upper, realized) -> float:
    realized = np.asarray(realized, dtype=float)
    inside = (realized >= np.asarray(lower) - 1e-12) & (realized <= np.asarray(upper) + 1e-12)
    return float(inside.mean())


@dataclass(frozen=True)
class BenchmarkModel:
    """Forecast-power bins over [0, capacity] with the error law of each bin (MW)."""

    capacity: float
    edges: tuple[float, ...]
    dists: tuple[FittedDistribution | None, ...]

    def bin_of(self, forecast_mw: float) -> int:
        if not 0 <= forecast_mw <= self.capacity + 1e-9:
            raise DataValidationError(f"forecast power {forecast_mw:g} MW outside [0, {self.capacity:g}]")
        return int(min(np.searchsorted(self.edges, forecast_mw, side="right") - 1, len(self.dists) - 1))

    def to_document(self) -> dict:
        return {
            "format": "windflex.benchmark",
            "version": 1,
            "capacity": self.capacity,
            "edges": list(self.edges),
            "dists": [d.to_dict() if d else None for d in self.dists],
        }

    @classmethod
    def from_document(cls, doc: dict) -> "BenchmarkModel":
        if doc.get("format") != "windflex.benchmark":
            raise DataValidationError("not a benchmark model document")
        return cls(doc["capacity"], tuple(doc["edges"]),
                   tuple(FittedDistribution.from_dict(d) if d else None for d in doc["dists"]))


def fit_benchmark_model(power_history, n_bins: int, capacity: float, families: Sequence[str] = tuple(FAMILIES),
                        min_samples: int = 30, bins: int = 50) -> BenchmarkModel:
    """Equal-width forecast-power bins, each with the fitted law of actual - forecast."""
    if n_bins < 1:
        raise DataValidationError("n_bins must be at least 1")
    hist = np.asarray(power_history, dtype=float)
    if hist.ndim != 2 or hist.shape[1] != 2:
        raise DataValidationError("power history must be (n, 2) pairs of (forecast, actual) MW")
    edges = np.linspace(0.0, capacity, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, hist[:, 0], side="right") - 1, 0, n_bins - 1)
    err = hist[:, 1] - hist[:, 0]
    dists = []
    for k in range(n_bins):
        sample = err[idx == k]
        dists.append(fit_best_distribution(sample, families, min_samples, bins) if sample.size else None)
    return BenchmarkModel(float(capacity), tuple(float(e) for e in edges), tuple(dists))


def benchmark_power_scenarios(power_history, n_bins: int, forecast_power, n: int, seed: int, *,
                              capacity: float, model: BenchmarkModel | None = None,
                              families: Sequence[str] = tuple(FAMILIES), min_samples: int = 30,
                              key: Sequence[int] = (), threads: int = 1, timestamps=None) -> ScenarioSet:
    """Weather-ignorant scenarios: forecast power plus errors drawn from the forecast's power bin."""
    if model is None:
        model = fit_benchmark_model(power_history, n_bins, capacity, families, min_samples)
    forecast = np.asarray(forecast_power, dtype=float)
    u = scenario_uniforms(seed, n, forecast.size, key, threads)
    values = np.empty((n, forecast.size))
    for t, f in enumerate(forecast):
        k = model.bin_of(f)
        dist = model.dists[k]
        if dist is None:
            raise DataValidationError(f"benchmark bin {k} has no history")
        values[:, t] = np.clip(f + dist.ppf(u[:, t, 1]), 0.0, capacity)
    return ScenarioSet(values / capacity, np.clip(forecast / capacity, 0.0, 1.0), seed, "power",
                       timestamps=timestamps, capacity=capacity)


def benchmark_history(forecast_speeds, actual: FeatureTable, spec: TurbineSpec, capacity: float) -> np.ndarray:
    """Historical (forecast MW, actual MW) pairs: forecast from hub speed alone, actual from full weather."""
    forecast_mw = np.asarray(hub_speed_power(np.asarray(forecast_speeds, dtype=float), spec)) * capacity
    actual_mw = table_power(actual, spec) * capacity
    return np.column_stack([forecast_mw, actual_mw])
