import numpy as np
import pytest

from conftest import one_bus_case, requires_solver
from windflex.config import Penalties
from windflex.errors import DataValidationError
from windflex.evaluation import cost_breakdown, reserve_activation_factors
from windflex.reserve import ReserveSchedule, extent_reserve
from windflex.sched_backend import SolveLimits
from windflex.sched_rt import RtSolution, build_rt_dispatch, extract_redispatch, solve_rt
from windflex.sched_scuc import build_scuc, solve

pytestmark = requires_solver

EXACT = SolveLimits(mip_gap=0.0)
PENALTIES = Penalties(load_shedding=10_000.0, wind_spillage=100.0, redispatch_in=2.0, redispatch_out=5.0)


def _day_ahead(case, up=6.0, down=0.0):
    t = case.periods
    sched = ReserveSchedule("system", np.full(t, up), np.full(t, down), "extent", 0.0)
    return solve(build_scuc(case, {"system": sched}, "system"), EXACT)


def _real_time(case, da):
    return solve_rt(build_rt_dispatch(case, da, PENALTIES))


def test_tier_split_for_wind_shortfall():
    case = one_bus_case([100.0, 100.0], wind=[30.0, 30.0], realized_wind=[20.0, 20.0])
    da = _day_ahead(case)
    assert np.allclose(da.p, 70.0)
    assert np.allclose(da.ru, 6.0, atol=1e-6)
    rt = _real_time(case, da)
    parts = extract_redispatch(da, rt)
    assert np.allclose(rt.p, 80.0)
    assert np.allclose(parts["R"], 10.0)
    assert np.allclose(parts["R_I"], 6.0)
    assert np.allclose(parts["R_II"], 4.0)
    assert np.allclose(rt.m_rd, 6 * 2.0 + 4 * 5.0)
    assert np.allclose(rt.redispatch_in, parts["R_I"], atol=1e-6)
    assert np.allclose(rt.redispatch_out, parts["R_II"], atol=1e-6)
    assert rt.shed.sum() == pytest.approx(0.0, abs=1e-9)


def test_surplus_wind_is_spilled():
    case = one_bus_case([100.0], wind=[30.0], realized_wind=[150.0])
    rt = _real_time(case, _day_ahead(case, up=0.0))
    assert rt.p[0, 0] == pytest.approx(10.0)
    assert rt.spill[0, 0] == pytest.approx(60.0)
    assert rt.m_ws[0] == pytest.approx(6_000.0)


def test_shedding_covers_the_gap():
    case = one_bus_case([100.0], wind=[30.0], realized_wind=[30.0], realized_load=[300.0])
    rt = _real_time(case, _day_ahead(case, up=0.0))
    assert rt.p[0, 0] == pytest.approx(200.0)
    assert rt.shed[0, 0] == pytest.approx(70.0)
    assert rt.m_ls[0] == pytest.approx(700_000.0)


def test_two_megawatts_shed_cost():
    case = one_bus_case([100.0], wind=[30.0], realized_load=[232.0])
    rt = _real_time(case, _day_ahead(case, up=0.0))
    assert rt.m_ls.sum() == pytest.approx(20_000.0)


def test_strong_duality():
    case = one_bus_case([100.0, 120.0, 90.0], wind=[30.0, 35.0, 20.0], realized_wind=[22.0, 45.0, 10.0],
                        realized_load=[104.0, 118.0, 95.0])
    rt = _real_time(case, _day_ahead(case, up=5.0, down=5.0))
    assert rt.dual_objective is not None
    assert rt.dual_objective == pytest.approx(rt.objective, rel=1e-6, abs=1e-6)


def _toy_reserve(case):
    farm = case.farm("W1")
    sched = extent_reserve(farm.forecast, farm.capacity, 0.15)
    return {"system": ReserveSchedule("system", sched.up, sched.down, "extent", 0.15)}


def test_zero_deviation_identity(toy_case):
    forecast = toy_case.farm("W1").forecast
    case = toy_case.with_wind({"W1": (forecast, forecast)})
    da = solve(build_scuc(case, _toy_reserve(case), "system"), EXACT)
    rt = _real_time(case, da)
    assert rt.shed.sum() == pytest.approx(0.0, abs=1e-6)
    assert rt.spill.sum() == pytest.approx(0.0, abs=1e-6)
    assert rt.m_rd.sum() == pytest.approx(0.0, abs=1e-6)
    commitment = da.breakdown["no_load"] + da.breakdown["startup"] + da.breakdown["shutdown"]
    assert commitment > 0
    assert rt.m_pg.sum() == pytest.approx(da.breakdown["generation"] + commitment, rel=1e-6)
    assert rt.objective == pytest.approx(rt.total_cost.sum(), rel=1e-6)
    raf = reserve_activation_factors(da, rt)
    assert raf.up == pytest.approx(0.0, abs=1e-6)
    assert raf.down == pytest.approx(0.0, abs=1e-6)
    assert raf.total == pytest.approx(0.0, abs=1e-6)


@pytest.mark.slow
def test_linear_split_matches_post_hoc_definition(toy_case):
    da = solve(build_scuc(toy_case, _toy_reserve(toy_case), "system"), EXACT)
    forecast = np.array(toy_case.farm("W1").forecast)
    for seed in range(10):
        rng = np.random.default_rng(seed)
        realized = np.clip(forecast + rng.normal(0, 8, forecast.size), 0, 60).tolist()
        case = toy_case.with_wind({"W1": (forecast.tolist(), realized)})
        rt = _real_time(case, da)
        parts = extract_redispatch(da, rt)
        assert np.allclose(rt.redispatch_in, parts["R_I"], atol=1e-6)
        assert np.allclose(rt.redispatch_out, parts["R_II"], atol=1e-6)
        costs = cost_breakdown(rt, da)
        assert costs["rt_total"] == pytest.approx(rt.objective, rel=1e-6)
        assert costs["per_period"]["total"].sum() == pytest.approx(costs["rt_total"])


def test_solution_document_round_trip():
    case = one_bus_case([100.0, 100.0], wind=[30.0, 30.0], realized_wind=[20.0, 40.0])
    rt = _real_time(case, _day_ahead(case))
    back = RtSolution.from_document(rt.to_document())
    assert np.array_equal(back.p, rt.p)
    assert np.array_equal(back.m_rd, rt.m_rd)
    assert back.objective == rt.objective


def test_redispatch_tiers_must_be_ordered():
    case = one_bus_case([100.0], wind=[30.0])
    da = _day_ahead(case, up=0.0)
    bad = Penalties.model_construct(load_shedding=1e4, wind_spillage=100.0, redispatch_in=9.0,
                                    redispatch_out=5.0, relax=500.0)
    with pytest.raises(DataValidationError):
        build_rt_dispatch(case, da, bad)
    with pytest.raises(ValueError):
        Penalties(redispatch_in=9.0, redispatch_out=5.0)


@pytest.mark.parametrize("price_in, price_out", [(5.0, 5.0), (0.0, 5.0)])
def test_redispatch_tiers_must_be_distinct_and_priced(price_in, price_out):
    case = one_bus_case([100.0], wind=[30.0], realized_wind=[20.0])
    da = _day_ahead(case)
    bad = Penalties.model_construct(load_shedding=1e4, wind_spillage=100.0, redispatch_in=price_in,
                                    redispatch_out=price_out, relax=500.0)
    with pytest.raises(DataValidationError):
        build_rt_dispatch(case, da, bad)
    with pytest.raises(ValueError):
        Penalties(redispatch_in=price_in, redispatch_out=price_out)


def test_generation_cost_includes_commitment_cost():
    case = one_bus_case([100.0, 100.0], wind=[30.0, 30.0], realized_wind=[20.0, 20.0], no_load=5.0)
    da = _day_ahead(case)
    rt = _real_time(case, da)
    assert np.allclose(rt.m_pg, 20 * 80.0 + 5.0)
    assert rt.objective == pytest.approx(rt.total_cost.sum(), rel=1e-6)
    assert rt.dual_objective == pytest.approx(rt.objective, rel=1e-6)
