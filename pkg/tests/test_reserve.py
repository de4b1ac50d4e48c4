import numpy as np
import pytest

from conftest import power_set
from windflex.errors import DataValidationError
from windflex.reserve import (
    RiskLevel,
    aggregate_reserve,
    extent_reserve,
    probability_indices,
    probability_reserve,
    read_reserve_frame,
    reserve_frame,
    risk_reserve,
    size_reserve,
)


def test_extent_reserve_formula():
    sched = extent_reserve([0.0, 100.0, 1260.0], rated=1260.0, epsilon=0.15)
    assert np.allclose(sched.up, [0.0, 15.0, 189.0])
    assert np.allclose(sched.down, [0.0, 15.0, 0.0])


def test_extent_rejects_forecast_above_rated():
    with pytest.raises(DataValidationError):
        extent_reserve([130.0], rated=120.0, epsilon=0.1)


def test_probability_indices():
    assert probability_indices(1000, 0.8) == (100, 900)
    assert probability_indices(1000, 1.0) == (1, 1000)
    assert probability_indices(5, 0.0) == (3, 3)


def test_full_probability_is_envelope():
    rng = np.random.default_rng(0)
    values = rng.uniform(10, 90, (40, 3))
    ps = power_set(values, [50.0, 50.0, 50.0])
    sched = probability_reserve(ps, ci=1.0)
    assert np.allclose(sched.up, np.maximum(0, 50 - values.min(axis=0)))
    assert np.allclose(sched.down, np.maximum(0, values.max(axis=0) - 50))


def test_zero_probability_uses_median():
    ps = power_set([30.0, 40.0, 50.0, 60.0, 70.0], [45.0])
    sched = probability_reserve(ps, ci=0.0)
    assert sched.up[0] == 0.0
    assert sched.down[0] == pytest.approx(5.0)


def test_risk_trace_on_five_scenarios():
    ps = power_set([0.0, 10.0, 20.0, 30.0, 40.0], [40.0])
    sched = risk_reserve(ps, rho=4.0)
    assert sched.up[0] == pytest.approx(30.0)
    assert sched.down[0] == 0.0


def _risk_oracle(s, f, rho):
    """Direct transcription of the per-side scan with early exit."""
    s = sorted(s)
    n = len(s)
    up = down = None
    for i in range(1, n + 1):
        risk_up = (s[i - 1] - s[0]) * (i - 1) / n
        if i < n:
            risk_down = (s[-1] - s[n - i - 1]) * ((n - i) - 1) / n
        else:
            risk_down = float("inf")
        if risk_up > rho and risk_down > rho:
            break
        if risk_up <= rho:
            up = f - s[i - 1]
        if risk_down <= rho:
            down = s[n - i - 1] - f
    up = f - s[0] if up is None else up
    down = s[-1] - f if down is None else down
    return max(0.0, up), max(0.0, down)


@pytest.mark.parametrize("rho", [0.0, 0.5, 2.0, 6.0, 50.0])
def test_risk_matches_direct_scan(rho):
    rng = np.random.default_rng(int(rho * 10))
    values = rng.uniform(0, 100, (25, 4))
    forecast = np.array([20.0, 45.0, 60.0, 95.0])
    sched = risk_reserve(power_set(values, forecast), rho=rho)
    for t in range(4):
        assert (sched.up[t], sched.down[t]) == pytest.approx(_risk_oracle(values[:, t], forecast[t], rho))


def test_risk_level_fraction_of_rated():
    ps = power_set([0.0, 10.0, 20.0, 30.0, 40.0], [40.0], capacity=100.0)
    assert np.allclose(risk_reserve(ps, rho=RiskLevel(0.04, "fraction")).up, [30.0])
    with pytest.raises(DataValidationError):
        RiskLevel(-1.0)


def test_large_risk_collapses_reserve():
    ps = power_set([0.0, 10.0, 20.0, 30.0, 40.0], [20.0])
    sched = risk_reserve(ps, rho=1_000.0)
    assert sched.up[0] == 0.0
    assert sched.down[0] == 0.0


def test_size_reserve_dispatch():
    ps = power_set([10.0, 20.0, 30.0, 40.0], [25.0], capacity=100.0)
    assert size_reserve("extent", ps, 0.2).up[0] == pytest.approx(5.0)
    assert size_reserve("probability", ps, 1.0).up[0] == pytest.approx(15.0)
    with pytest.raises(DataValidationError):
        size_reserve("oracle", ps, 1.0)


def test_aggregation_sums_members():
    a = extent_reserve([10.0, 20.0], 100.0, 0.1, entity="W1")
    b = extent_reserve([10.0, 20.0], 100.0, 0.1, entity="W2")
    c = extent_reserve([30.0, 40.0], 100.0, 0.1, entity="W3")
    zonal = aggregate_reserve([a, b, c], {"W1": "Z1", "W2": "Z1", "W3": "Z2"})
    assert np.allclose(zonal["Z1"].up, 2 * a.up)
    assert np.allclose(zonal["Z2"].down, c.down)
    system = aggregate_reserve(zonal.values(), {"Z1": "system", "Z2": "system"})
    assert np.allclose(system["system"].up, a.up + b.up + c.up)
    with pytest.raises(DataValidationError, match="W3"):
        aggregate_reserve([c], {"W1": "Z1"})


def test_reserve_frame_round_trip():
    a = extent_reserve([10.0, 20.0], 100.0, 0.1, entity="Z1")
    back = read_reserve_frame(reserve_frame([a]))
    assert np.array_equal(back["Z1"].up, a.up)
    assert back["Z1"].method == "extent"


@pytest.mark.parametrize("method", ["extent", "probability"])
def test_requirement_grows_with_level(method):
    rng = np.random.default_rng(3)
    ps = power_set(rng.uniform(0, 100, (200, 6)), rng.uniform(10, 90, 6))
    levels = {"extent": (0.05, 0.1, 0.2, 0.3), "probability": (0.2, 0.4, 0.8, 0.999)}[method]
    scheds = [size_reserve(method, ps, lv) for lv in levels]
    for a, b in zip(scheds, scheds[1:]):
        assert np.all(a.up <= b.up + 1e-12) and np.all(a.down <= b.down + 1e-12)


def test_risk_requirement_shrinks_as_tolerance_grows():
    rng = np.random.default_rng(3)
    ps = power_set(rng.uniform(0, 100, (200, 6)), rng.uniform(10, 90, 6))
    scheds = [risk_reserve(ps, rho) for rho in (0.0, 1.0, 5.0, 20.0)]
    for a, b in zip(scheds, scheds[1:]):
        assert np.all(b.up <= a.up + 1e-12) and np.all(b.down <= a.down + 1e-12)
    full = probability_reserve(ps, ci=1.0)
    assert np.all(full.up >= scheds[1].up) and np.all(full.down >= scheds[1].down)
