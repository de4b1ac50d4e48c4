import numpy as np
import pandas as pd
import pytest

from windflex.errors import DataValidationError
from windflex.stress_coupling import CouplingCoefficients, pca_feature_coupling
from windflex.stress_scenarios import ScenarioSet, stress_weather_scenarios
from windflex.weather import FeatureTable, standardize

KEY = "windspeed_100m"


def _table(columns: dict) -> FeatureTable:
    return FeatureTable.from_frame(pd.DataFrame(columns), resolution=3600.0)


def test_rank_one_data_recovers_loading_ratios():
    rng = np.random.default_rng(0)
    s = rng.normal(0, 1, 2000)
    a = {"pressure_100m": -40.0, "temperature_100m": 2.0, "windspeed_80m": 0.9, KEY: 1.5}
    cols = {fid: 1000.0 * (fid == "pressure_100m") + 10 + a_j * s + rng.normal(0, 1e-6, s.size)
            for fid, a_j in a.items()}
    coeffs = pca_feature_coupling(standardize(_table(cols)), KEY)
    assert coeffs.k == 1
    assert coeffs.slope(KEY) == 1.0
    for fid, a_j in a.items():
        assert coeffs.slope(fid) == pytest.approx(a_j / a[KEY], abs=1e-3)


def test_anti_correlated_features_get_opposite_signs():
    rng = np.random.default_rng(1)
    s = rng.normal(8, 2, 500)
    cols = {KEY: s, "temperature_100m": 30 - s + rng.normal(0, 0.01, 500)}
    coeffs = pca_feature_coupling(standardize(_table(cols)), KEY)
    assert coeffs.slope("temperature_100m") < 0
    assert coeffs.slope(KEY) == 1.0


def test_unknown_key_stressor():
    cols = {KEY: np.arange(10.0), "temperature_100m": np.arange(10.0) ** 2}
    with pytest.raises(DataValidationError):
        pca_feature_coupling(standardize(_table(cols)), "windspeed_60m")


def test_document_round_trip():
    coeffs = CouplingCoefficients(("pressure_100m", KEY), np.array([-15.9445, 1.0]), KEY, 1, (1.9, 0.1))
    back = CouplingCoefficients.from_document(coeffs.to_document())
    assert back.as_dict() == coeffs.as_dict()
    assert back.k == 1


def _forecast(pressure=100_000.0, humidity=60.0, speed=8.0):
    return _table({"pressure_100m": [pressure], "relativehumidity_2m": [humidity], KEY: [speed]})


def _coeffs():
    return CouplingCoefficients(("pressure_100m", "relativehumidity_2m", KEY),
                                np.array([-15.9445, 0.7817, 1.0]), KEY, 2)


def _stressed(speeds, forecast=8.0):
    values = np.asarray(speeds, dtype=float).reshape(-1, 1)
    return ScenarioSet(values, np.array([forecast]), 0, "speed")


def test_zero_error_reproduces_forecast():
    day = _forecast()
    weather = stress_weather_scenarios(day, _coeffs(), _stressed([8.0]))
    assert np.array_equal(weather.values[0, 0], day.data.iloc[0].to_numpy())


def test_one_metre_per_second_shift():
    weather = stress_weather_scenarios(_forecast(), _coeffs(), _stressed([9.0]))
    p, rh, v = weather.values[0, 0]
    assert p - 100_000.0 == pytest.approx(-15.9445)
    assert rh - 60.0 == pytest.approx(0.7817)
    assert v == 9.0


def test_humidity_clamped_at_saturation():
    weather = stress_weather_scenarios(_forecast(humidity=99.9), _coeffs(), _stressed([9.0]))
    assert weather.values[0, 0, 1] == 100.0


def test_stressed_speeds_must_match_forecast():
    with pytest.raises(DataValidationError, match="key stressor"):
        stress_weather_scenarios(_forecast(), _coeffs(), _stressed([9.0], forecast=7.5))


def test_slopes_follow_feature_units():
    rng = np.random.default_rng(4)
    s = rng.normal(8, 2, 800)
    cols = {KEY: s, "temperature_100m": 15 - 0.3 * s + rng.normal(0, 0.5, 800),
            "pressure_100m": 1e5 + 20 * s + rng.normal(0, 30, 800)}
    base = pca_feature_coupling(standardize(_table(cols)), KEY)
    # kelvin offset leaves the slope alone; hPa divides it by 100
    rescaled = pca_feature_coupling(standardize(_table({**cols, "temperature_100m": cols["temperature_100m"] + 273.15,
                                                        "pressure_100m": cols["pressure_100m"] / 100})), KEY)
    assert rescaled.slope("temperature_100m") == pytest.approx(base.slope("temperature_100m"), rel=1e-6)
    assert rescaled.slope("pressure_100m") == pytest.approx(base.slope("pressure_100m") / 100, rel=1e-6)
    assert rescaled.k == base.k
