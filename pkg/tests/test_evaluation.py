from datetime import datetime, timezone

import numpy as np
import pytest

from windflex.errors import DataValidationError
from windflex.evaluation import (
    EvaluationReport,
    cost_breakdown,
    evaluate_day,
    reserve_activation_factors,
)
from windflex.sched_rt import RtSolution, extract_redispatch
from windflex.sched_scuc import DaSolution


def _da(p, ru=None, rd=None, objective=1000.0):
    p = np.atleast_2d(np.asarray(p, dtype=float))
    zeros = np.zeros_like(p)
    ru = zeros if ru is None else np.atleast_2d(np.asarray(ru, dtype=float))
    rd = zeros if rd is None else np.atleast_2d(np.asarray(rd, dtype=float))
    return DaSolution(
        generators=tuple(f"G{i + 1}" for i in range(p.shape[0])), buses=("b1",), lines=(), policy="system",
        u=np.ones_like(p), v=zeros, w=zeros, p=p, rs=zeros, ru=ru, rd=rd,
        flow=np.zeros((0, p.shape[1])), angle=np.zeros((1, p.shape[1])),
        slack_up={"system": np.zeros(p.shape[1])}, slack_down={"system": np.zeros(p.shape[1])},
        objective=objective,
        breakdown={"generation": 900.0, "no_load": 50.0, "startup": 40.0, "shutdown": 10.0,
                   "reserve_penalty": 0.0, "reserve_tiebreak": 0.0},
    )


def _rt(p, shed=0.0, m_pg=None, pen_ls=10_000.0):
    p = np.atleast_2d(np.asarray(p, dtype=float))
    t = p.shape[1]
    zeros = np.zeros_like(p)
    shed = np.full((1, t), shed)
    m_pg = np.full(t, 100.0) if m_pg is None else np.asarray(m_pg, dtype=float)
    m_ls = pen_ls * shed.sum(axis=0)
    return RtSolution(
        generators=tuple(f"G{i + 1}" for i in range(p.shape[0])), loads=("D1",), farms=("W1",),
        p=p, shed=shed, spill=np.zeros((1, t)), a_up=zeros, a_down=zeros, b_up=zeros, b_down=zeros,
        flow=np.zeros((0, t)), angle=np.zeros((1, t)),
        m_pg=m_pg, m_ls=m_ls, m_ws=np.zeros(t), m_rd=np.zeros(t),
        objective=float(m_pg.sum() + m_ls.sum()),
    )


def test_equal_dispatch_gives_zero_factors():
    da = _da([[50.0, 60.0]], ru=[[5.0, 5.0]], rd=[[5.0, 5.0]])
    raf = reserve_activation_factors(da, _rt([[50.0, 60.0]]))
    assert (raf.up, raf.down, raf.total) == (0.0, 0.0, 0.0)


def test_deviation_over_reserve_ratio():
    da = _da([[50.0]], ru=[[3.0]])
    raf = reserve_activation_factors(da, _rt([[56.0]]))
    assert raf.up == pytest.approx(2.0)
    assert raf.down is None
    assert raf.up_mean == pytest.approx(2.0)


def test_no_scheduled_reserve_is_undefined():
    raf = reserve_activation_factors(_da([[50.0]]), _rt([[45.0]]))
    assert raf.up is None and raf.down is None
    assert raf.total == 0.0


def test_ratio_of_sums_differs_from_mean_of_ratios():
    da = _da([[50.0, 50.0]], ru=[[1.0, 9.0]])
    raf = reserve_activation_factors(da, _rt([[51.0, 50.0]]))
    assert raf.up == pytest.approx(0.1)
    assert raf.up_mean == pytest.approx(0.5)


def test_misaligned_solutions_rejected():
    with pytest.raises(DataValidationError):
        reserve_activation_factors(_da([[50.0, 50.0]]), _rt([[50.0]]))


def test_signed_redispatch_split():
    da = _da([[50.0, 50.0, 50.0]], ru=[[4.0, 4.0, 4.0]], rd=[[2.0, 2.0, 2.0]])
    parts = extract_redispatch(da, _rt([[50.0, 54.0, 45.0]]))
    assert parts["R"].tolist() == [[0.0, 4.0, -5.0]]
    assert parts["R_I"].tolist() == [[0.0, 4.0, 2.0]]
    assert parts["R_II"].tolist() == [[0.0, 0.0, 3.0]]


def test_shedding_cost():
    costs = cost_breakdown(_rt([[50.0]], shed=2.0), _da([[50.0]]))
    assert costs["rt_load_shedding"] == 20_000.0
    assert costs["rt_total"] == pytest.approx(20_100.0)
    assert costs["scuc_commitment"] == pytest.approx(100.0)


def test_clean_day_has_only_generation_cost():
    costs = cost_breakdown(_rt([[50.0, 50.0]]), _da([[50.0, 50.0]]))
    assert costs["rt_generation"] == 200.0
    assert costs["rt_load_shedding"] == costs["rt_wind_spillage"] == costs["rt_redispatch"] == 0.0
    assert list(costs["per_period"].columns) == ["period", "M_PG", "M_LS", "M_WS", "M_RD", "total"]


def _report(days):
    return EvaluationReport(run_id="r1", config_hash="abc", seed=7, policy="system", method="risk", level=3,
                            level_value=0.2, created_at=datetime(2026, 1, 1, tzinfo=timezone.utc), days=days)


def test_report_totals_pool_days():
    d0 = evaluate_day(0, _da([[50.0]], ru=[[3.0]]), _rt([[56.0]]), date="2012-01-01", coverage_weather=0.9)
    d1 = evaluate_day(1, _da([[50.0]], ru=[[1.0]]), _rt([[50.0]], shed=1.0), coverage_weather=0.7)
    totals = _report([d0, d1]).totals()
    assert totals["raf_up"] == pytest.approx(6.0 / 4.0)
    assert totals["raf_down"] is None
    assert totals["rt_load_shedding"] == pytest.approx(10_000.0)
    assert totals["coverage_weather"] == pytest.approx(0.8)
    assert totals["coverage_benchmark"] is None


def test_report_document_round_trip():
    report = _report([evaluate_day(0, _da([[50.0]], ru=[[3.0]]), _rt([[52.0]]))])
    doc = report.to_document()
    assert doc["format"] == "windflex.evaluation"
    back = EvaluationReport.from_document(doc)
    assert back == report
    assert "created_at" not in report.to_document(with_timestamp=False)
    with pytest.raises(DataValidationError):
        EvaluationReport.from_document({"format": "other"})
