from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from windflex.config import TurbineConfig
from windflex.grid import GridCase, load_grid_case, parse_grid_case
from windflex.stress_scenarios import ScenarioSet
from windflex.weather import HUMIDITY, PRESSURE, TEMPERATURE, WIND_LEVELS, direction_id, speed_id

DATA_DIR = Path(__file__).resolve().parent.parent / "windflex" / "data"


def _highs_available() -> bool:
    try:
        from pyomo.contrib.appsi.solvers import Highs

        return bool(Highs().available())
    except Exception:
        return False


HIGHS = _highs_available()
requires_solver = pytest.mark.skipif(not HIGHS, reason="HiGHS (highspy) is not installed")


@pytest.fixture
def spec():
    return TurbineConfig().to_spec()


@pytest.fixture
def toy_case():
    return load_grid_case(DATA_DIR / "toy_case.json")


@pytest.fixture
def toy_config_path():
    return DATA_DIR / "toy_config.json"


@pytest.fixture(autouse=True)
def _no_registry():
    from windflex import db

    db.configure("")
    yield
    db.configure("")


@pytest.fixture
def tmp_db(tmp_path):
    from windflex import db

    url = f"sqlite:///{tmp_path / 'runs.db'}"
    db.configure(url)
    yield url
    db.configure("")


def power_set(values, forecast, capacity=100.0, entity="W1") -> ScenarioSet:
    """Power scenario set from MW values."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    f = np.atleast_1d(np.asarray(forecast, dtype=float))
    return ScenarioSet(v / capacity, f / capacity, 0, "power", capacity=capacity, entity=entity)


def weather_frame(h=24, seed=0, hub=8.0, start="2012-06-01") -> pd.DataFrame:
    """A plausible uniform-direction weather table with h hourly rows."""
    rng = np.random.default_rng(seed)
    hub_speed = np.clip(hub + rng.normal(0, 1.5, h), 0.5, None)
    cols = {
        PRESSURE: 100_000 + rng.normal(0, 200, h),
        HUMIDITY: np.clip(60 + rng.normal(0, 10, h), 0, 100),
        TEMPERATURE: 15 + rng.normal(0, 3, h),
    }
    base_dir = np.mod(200 + rng.normal(0, 20, h), 360)
    for z in WIND_LEVELS:
        cols[direction_id(z)] = base_dir
    for z in WIND_LEVELS:
        cols[speed_id(z)] = hub_speed * (z / 100) ** 0.14
    frame = pd.DataFrame(cols)
    frame.insert(0, "timestamp", pd.date_range(start, periods=h, freq="h").strftime("%Y-%m-%dT%H:%M:%S"))
    return frame


def one_bus_case(load, *, wind=None, realized_wind=None, realized_load=None, pmin=10.0, pmax=200.0,
                 slope=20.0, no_load=0.0, ramp_60=200.0, ramp_10=50.0, initial_output=None) -> GridCase:
    """Single bus, single generator, optional single wind farm; no contingency or load reserve."""
    periods = len(load)
    wind = list(wind) if wind is not None else None
    if initial_output is None:
        initial_output = load[0] - (wind[0] if wind else 0.0)
    doc = {
        "name": "onebus",
        "periods": periods,
        "reference_bus": "b1",
        "load_reserve_extent": 0.0,
        "largest_unit_contingency": False,
        "buses": [{"id": "b1"}],
        "generators": [{
            "id": "G1", "bus": "b1", "pmin": pmin, "pmax": pmax, "ramp_60": ramp_60, "ramp_10": ramp_10,
            "no_load": no_load, "cost_segments": [[slope, 0.0]],
            "initial": {"on": True, "output": initial_output},
        }],
        "loads": [{"id": "D1", "bus": "b1", "forecast": list(load),
                   "realized": list(realized_load) if realized_load is not None else None}],
    }
    if wind is not None:
        doc["wind_farms"] = [{"id": "W1", "bus": "b1", "capacity": 200.0, "forecast": wind,
                              "realized": list(realized_wind) if realized_wind is not None else None}]
    return parse_grid_case(doc)
