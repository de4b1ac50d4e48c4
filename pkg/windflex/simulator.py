"""Synthetic hourly weather with regime-dependent hub-height forecast errors.

A three-state Markov chain (calm, breezy, stormy) drives an AR(1) hub-height speed,
the vertical shear exponent and the forecast error spread, so forecast errors
genuinely depend on the weather.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from windflex.weather import (
    FORECAST_HUB_SPEED,
    HISTORY_FEATURES,
    HUMIDITY,
    PRESSURE,
    TEMPERATURE,
    WEATHER_FEATURES,
    WIND_LEVELS,
    direction_id,
    speed_id,
)

log = logging.getLogger(__name__)

HUB = 100
REGIME_MEAN = np.array([5.0, 9.0, 14.0])
REGIME_SHEAR = np.array([0.22, 0.15, 0.10])
REGIME_ERROR = np.array([0.5, 1.2, 2.4])
REGIME_CHAIN = np.array([
    [0.93, 0.06, 0.01],
    [0.05, 0.90, 0.05],
    [0.02, 0.10, 0.88],
])
AR_COEF = 0.85
VEER_DEG_PER_M = 0.08


@dataclass(frozen=True)
class SyntheticWeather:
    history: pd.DataFrame
    forecast: pd.DataFrame
    actual: pd.DataFrame
    regimes: np.ndarray


def _regimes(rng: np.random.Generator, h: int) -> np.ndarray:
    out = np.empty(h, dtype=np.int64)
    out[0] = rng.integers(3)
    draws = rng.random(h)
    cum = REGIME_CHAIN.cumsum(axis=1)
    for t in range(1, h):
        out[t] = min(int(np.searchsorted(cum[out[t - 1]], draws[t], side="right")), 2)
    return out


def _weather(rng: np.random.Generator, regimes: np.ndarray, hours: np.ndarray) -> tuple[pd.DataFrame, np.ndarray]:
    h = regimes.size
    diurnal = np.sin(2 * np.pi * (hours - 9) / 24)
    hub = np.empty(h)
    level = REGIME_MEAN[regimes[0]]
    for t in range(h):
        mean = REGIME_MEAN[regimes[t]] + 0.8 * diurnal[t]
        level = mean + AR_COEF * (level - mean) + rng.normal(0, 0.9)
        hub[t] = max(level, 0.2)

    shear = REGIME_SHEAR[regimes] + rng.normal(0, 0.02, h)
    direction = np.mod(220 + np.cumsum(rng.normal(0, 6, h)), 360)
    temperature = 12 + 6 * diurnal - 0.3 * (hub - 8) + rng.normal(0, 0.8, h)
    pressure = 100_500 - 150 * (hub - 8) + np.cumsum(rng.normal(0, 15, h))
    humidity = np.clip(70 - 2 * (temperature - 12) + rng.normal(0, 4, h), 5, 100)

    cols = {PRESSURE: pressure, HUMIDITY: humidity, TEMPERATURE: temperature}
    for z in WIND_LEVELS:
        cols[direction_id(z)] = np.mod(direction + VEER_DEG_PER_M * (z - HUB), 360)
    for z in WIND_LEVELS:
        cols[speed_id(z)] = hub * (z / HUB) ** shear
    return pd.DataFrame(cols)[list(WEATHER_FEATURES)], hub


def simulate_weather(days: int, forecast_days: int = 1, seed: int = 7, start: str = "2012-01-01") -> SyntheticWeather:
    """``days`` of history with hub forecasts, then ``forecast_days`` of forecast and realized weather."""
    rng = np.random.default_rng(seed)
    h = 24 * (days + forecast_days)
    stamps = pd.date_range(start, periods=h, freq="h")
    regimes = _regimes(rng, h)
    actual, hub = _weather(rng, regimes, stamps.hour.to_numpy())

    error = rng.normal(0, REGIME_ERROR[regimes])
    hub_forecast = np.maximum(hub + error, 0.0)
    ratio = np.where(hub > 0, hub_forecast / hub, 1.0)

    forecast = actual.copy()
    for z in WIND_LEVELS:
        forecast[speed_id(z)] = actual[speed_id(z)] * ratio
    forecast[TEMPERATURE] += rng.normal(0, 0.5, h)
    forecast[PRESSURE] += rng.normal(0, 30, h)
    forecast[HUMIDITY] = np.clip(forecast[HUMIDITY] + rng.normal(0, 2, h), 0, 100)

    split = 24 * days
    ts = stamps.strftime("%Y-%m-%dT%H:%M:%S")
    history = actual.iloc[:split].copy()
    history[FORECAST_HUB_SPEED] = hub_forecast[:split]
    history.insert(0, "timestamp", ts[:split])
    fc = forecast.iloc[split:].reset_index(drop=True)
    fc.insert(0, "timestamp", ts[split:])
    act = actual.iloc[split:].reset_index(drop=True)
    act.insert(0, "timestamp", ts[split:])
    log.info("[simulate] %d history hours, %d forecast hours, regime shares %s", split, h - split,
             np.bincount(regimes, minlength=3).tolist())
    return SyntheticWeather(history[["timestamp", *HISTORY_FEATURES]], fc, act, regimes)


def write_synthetic_inputs(out_dir: Path | str, days: int = 60, forecast_days: int = 1,
                           seed: int = 7) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim = simulate_weather(days, forecast_days, seed)
    paths = {}
    for name in ("history", "forecast", "actual"):
        p = out / f"{name}.csv"
        getattr(sim, name).to_csv(p, index=False, float_format="%.10g", lineterminator="\n")
        paths[name] = p
    return paths
