"""Turbine physics: hub air density, rotor-equivalent wind speed and the wake-adjusted power curve."""

from collections.abc import Mapping
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from windflex.errors import DataValidationError
from windflex.weather import (
    HUMIDITY,
    PRESSURE,
    TEMPERATURE,
    WIND_LEVELS,
    direction_id,
    speed_id,
)

R_DRY = 287.058
R_VAPOR = 461.495
BETZ_LIMIT = 0.593
STANDARD_DENSITY = 1.225
DENSITY_RANGE = (0.5, 2.0)


class Region(IntEnum):
    I = 0
    II = 1
    III = 2
    IV = 3


@dataclass(frozen=True)
class TurbineSpec:
    rotor_diameter: float
    hub_height: float
    rated_power: float
    cut_in: float
    rated_speed: float
    cut_out: float
    cp_speeds: tuple[float, ...]
    cp_values: tuple[float, ...]
    wake_loss: float = 0.15
    plateau_mode: str = "unity"

    def __post_init__(self):
        if not (0 < self.cut_in < self.rated_speed < self.cut_out):
            raise DataValidationError("turbine speeds must satisfy 0 < cut_in < rated_speed < cut_out")
        if self.rotor_diameter <= 0 or self.hub_height <= 0 or self.rated_power <= 0:
            raise DataValidationError("rotor diameter, hub height and rated power must be positive")
        if len(self.cp_speeds) != len(self.cp_values) or len(self.cp_speeds) < 2:
            raise DataValidationError("cp curve needs at least two (speed, cp) points")
        if np.any(np.diff(self.cp_speeds) <= 0):
            raise DataValidationError("cp curve speeds must be strictly increasing")
        cp = np.asarray(self.cp_values)
        if np.any(cp < 0) or np.any(cp > BETZ_LIMIT):
            raise DataValidationError(f"cp values must lie in [0, {BETZ_LIMIT}]")
        if not 0 <= self.wake_loss < 1:
            raise DataValidationError("wake loss must lie in [0, 1)")
        if self.plateau_mode not in ("unity", "derated"):
            raise DataValidationError(f"unknown plateau_mode {self.plateau_mode!r}")

    @property
    def radius(self) -> float:
        return self.rotor_diameter / 2

    @property
    def rotor_area(self) -> float:
        return np.pi * self.radius**2

    @property
    def rated_watts(self) -> float:
        return self.rated_power * 1e6

    @property
    def plateau(self) -> float:
        return 1.0 if self.plateau_mode == "unity" else 1.0 - self.wake_loss


@dataclass(frozen=True)
class WindProfile:
    heights: np.ndarray
    speeds: np.ndarray
    directions: np.ndarray
    hub_direction: float | None = None

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=float)
        if np.any(np.diff(h) <= 0):
            raise DataValidationError("profile heights must be strictly increasing")
        if np.any(np.asarray(self.speeds) < 0):
            raise DataValidationError("profile speeds must be non-negative")


def air_density(pressure, temperature, relative_humidity):
    """Moist-air density (kg/m3) from pressure (Pa), temperature (C) and relative humidity (%)."""
    p = np.asarray(pressure, dtype=float)
    t = np.asarray(temperature, dtype=float)
    rh = np.asarray(relative_humidity, dtype=float)
    if np.any(p <= 0):
        raise DataValidationError("pressure must be positive")
    if np.any((rh < 0) | (rh > 100)):
        raise DataValidationError("relative humidity must lie in [0, 100]")
    if np.any(t <= -100):
        raise DataValidationError("temperature must exceed -100 C")
    # Magnus saturation vapour pressure over water, Pa
    e_s = 610.94 * np.exp(17.625 * t / (t + 243.04))
    p_v = rh / 100.0 * e_s
    t_k = t + 273.15
    rho = (p - p_v) / (R_DRY * t_k) + p_v / (R_VAPOR * t_k)
    if np.any((rho < DENSITY_RANGE[0]) | (rho > DENSITY_RANGE[1])):
        raise DataValidationError(f"implausible air density {np.min(rho):.3f}..{np.max(rho):.3f} kg/m3")
    return float(rho) if rho.ndim == 0 else rho


def _area_below(y: np.ndarray, radius: float) -> np.ndarray:
    y = np.clip(y, -radius, radius)
    return radius**2 * (np.pi / 2 + np.arcsin(y / radius)) + y * np.sqrt(radius**2 - y**2)


def rotor_slices(heights, hub_height: float, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Circular-segment area of the rotor disk assigned to each measurement level.

    Slices are cut at midpoints between consecutive levels; the outer slices extend
    half a spacing beyond the outermost levels. Returns (level indices, areas).
    """
    h = np.asarray(heights, dtype=float)
    if h.size == 1:
        bounds = np.array([-np.inf, np.inf])
    else:
        mids = (h[:-1] + h[1:]) / 2
        bounds = np.concatenate(([h[0] - (h[1] - h[0]) / 2], mids, [h[-1] + (h[-1] - h[-2]) / 2]))
    if bounds[0] > hub_height - radius + 1e-9 or bounds[-1] < hub_height + radius - 1e-9:
        raise DataValidationError(
            f"rotor disk [{hub_height - radius:g}, {hub_height + radius:g}] m not covered by levels "
            f"{h[0]:g}..{h[-1]:g} m"
        )
    areas = np.diff(_area_below(bounds - hub_height, radius))
    used = np.flatnonzero(areas > 0)
    return used, areas[used]


def _hub_direction(heights: np.ndarray, directions: np.ndarray, hub_height: float) -> np.ndarray:
    """Circular interpolation of direction (deg) at hub height, row-wise on (n, levels)."""
    rad = np.deg2rad(directions)
    if heights.size == 1:
        return directions[:, 0]
    j = int(np.clip(np.searchsorted(heights, hub_height), 1, heights.size - 1))
    w = float(np.clip((hub_height - heights[j - 1]) / (heights[j] - heights[j - 1]), 0.0, 1.0))
    s = (1 - w) * np.sin(rad[:, j - 1]) + w * np.sin(rad[:, j])
    c = (1 - w) * np.cos(rad[:, j - 1]) + w * np.cos(rad[:, j])
    return np.rad2deg(np.arctan2(s, c))


def rews_array(heights, speeds, directions, spec: TurbineSpec, hub_direction=None) -> np.ndarray:
    """Vectorized rotor-equivalent wind speed. speeds/directions are (n, levels)."""
    heights = np.asarray(heights, dtype=float)
    speeds = np.atleast_2d(np.asarray(speeds, dtype=float))
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    idx, areas = rotor_slices(heights, spec.hub_height, spec.radius)
    weights = areas / spec.rotor_area
    if hub_direction is None:
        hub_direction = _hub_direction(heights, directions, spec.hub_height)
    hub = np.asarray(hub_direction, dtype=float).reshape(-1, 1)
    proj = speeds[:, idx] * np.cos(np.deg2rad(directions[:, idx] - hub))
    proj = np.maximum(proj, 0.0)
    return np.cbrt((weights * proj**3).sum(axis=1))


def rotor_equivalent_wind_speed(profile: WindProfile, spec: TurbineSpec) -> float:
    return float(rews_array(profile.heights, profile.speeds, profile.directions, spec,
                            profile.hub_direction)[0])


def classify_regions(speeds, spec: TurbineSpec) -> np.ndarray:
    """Half-open region index per speed: [0, cut_in), [cut_in, rated), [rated, cut_out), [cut_out, inf)."""
    return np.digitize(np.asarray(speeds, dtype=float), [spec.cut_in, spec.rated_speed, spec.cut_out])


def classify_region(speed: float, spec: TurbineSpec) -> Region:
    if speed < 0:
        raise DataValidationError("speed must be non-negative")
    return Region(int(classify_regions(speed, spec)))


def modified_power_curve(v_equ, rho_hub, spec: TurbineSpec):
    """Normalized farm output after wake loss, in [0, 1]."""
    scalar = np.ndim(v_equ) == 0
    v = np.atleast_1d(np.asarray(v_equ, dtype=float))
    rho = np.broadcast_to(np.asarray(rho_hub, dtype=float), v.shape)
    if np.any(v < 0):
        raise DataValidationError("wind speed must be non-negative")
    region = classify_regions(v, spec)
    out = np.zeros(v.shape)
    out[region == Region.III] = spec.plateau

    in_ii = region == Region.II
    if np.any(in_ii):
        vii = v[in_ii]
        lo, hi = spec.cp_speeds[0], spec.cp_speeds[-1]
        if np.any((vii < lo) | (vii > hi)):
            raise DataValidationError(f"speed outside the cp curve domain [{lo:g}, {hi:g}] m/s")
        cp = np.interp(vii, spec.cp_speeds, spec.cp_values)
        watts = (1 - spec.wake_loss) * 0.5 * rho[in_ii] * spec.rotor_area * vii**3 * cp
        out[in_ii] = np.minimum(spec.plateau, watts / spec.rated_watts)
    return float(out[0]) if scalar else out


def profile_levels(record: Mapping) -> list[int]:
    return [h for h in WIND_LEVELS if speed_id(h) in record and direction_id(h) in record]


def normalized_power(record: Mapping, spec: TurbineSpec):
    """Normalized output for a record (scalars or equal-length arrays) of weather features."""
    missing = [f for f in (PRESSURE, TEMPERATURE, HUMIDITY) if f not in record]
    levels = profile_levels(record)
    if missing or not levels:
        raise DataValidationError(f"record lacks turbine inputs: {missing or 'wind profile'}")
    rho = air_density(record[PRESSURE], record[TEMPERATURE], record[HUMIDITY])
    speeds = np.column_stack([np.atleast_1d(np.asarray(record[speed_id(h)], dtype=float)) for h in levels])
    dirs = np.column_stack([np.atleast_1d(np.asarray(record[direction_id(h)], dtype=float)) for h in levels])
    v_equ = rews_array(np.array(levels, dtype=float), speeds, dirs, spec)
    p = modified_power_curve(v_equ, np.atleast_1d(rho), spec)
    return float(p[0]) if np.ndim(record[PRESSURE]) == 0 else p


def farm_power(record: Mapping, spec: TurbineSpec, farm_capacity: float):
    """Farm output in MW."""
    return normalized_power(record, spec) * farm_capacity


def hub_speed_power(speeds, spec: TurbineSpec, rho: float = STANDARD_DENSITY):
    """Power curve on hub-height speed alone, the weather-ignorant reading."""
    return modified_power_curve(speeds, rho, spec)
