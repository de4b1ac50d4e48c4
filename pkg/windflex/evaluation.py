"""Cost breakdowns and reserve activation factors for a DA/RT solution pair."""

import logging
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from windflex.errors import DataValidationError
from windflex.sched_rt import RtSolution
from windflex.sched_scuc import DaSolution

log = logging.getLogger(__name__)

FORMAT = "windflex.evaluation"
FORMAT_VERSION = 1


def utcnow():
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class ActivationFactors:
    """Deployed over scheduled flexibility reserve; None where nothing was scheduled."""

    up: float | None
    down: float | None
    deployed_up: float
    deployed_down: float
    scheduled_up: float
    scheduled_down: float
    up_mean: float | None = None
    down_mean: float | None = None

    @property
    def total(self) -> float:
        return (self.up or 0.0) + (self.down or 0.0)


def _ratio(num: float, den: float) -> float | None:
    return num / den if den > 0 else None


def reserve_activation_factors(da: DaSolution, rt: RtSolution, tol: float = 1e-9) -> ActivationFactors:
    """Ratio-of-sums over the (g, t) cells with scheduled reserve on the relevant side."""
    if da.p.shape != rt.p.shape:
        raise DataValidationError("day-ahead and real-time solutions are not aligned")
    dev = rt.p - da.p
    up_dev = np.maximum(dev, 0.0)
    dn_dev = np.maximum(-dev, 0.0)
    has_up = da.ru > tol
    has_dn = da.rd > tol
    dep_up, sch_up = float(up_dev[has_up].sum()), float(da.ru[has_up].sum())
    dep_dn, sch_dn = float(dn_dev[has_dn].sum()), float(da.rd[has_dn].sum())
    up_mean = float(np.mean(up_dev[has_up] / da.ru[has_up])) if has_up.any() else None
    dn_mean = float(np.mean(dn_dev[has_dn] / da.rd[has_dn])) if has_dn.any() else None
    return ActivationFactors(_ratio(dep_up, sch_up), _ratio(dep_dn, sch_dn), dep_up, dep_dn, sch_up, sch_dn,
                             up_mean, dn_mean)


def cost_breakdown(rt: RtSolution, da: DaSolution) -> dict:
    """Per-period RT cost terms with totals and the DA commitment cost terms."""
    per_period = rt.cost_frame()
    bd = da.breakdown
    return {
        "per_period": per_period,
        "scuc_generation": bd["generation"],
        "scuc_commitment": bd["no_load"] + bd["startup"] + bd["shutdown"],
        "scuc_objective": da.objective,
        "reserve_penalty": bd["reserve_penalty"],
        "rt_generation": float(rt.m_pg.sum()),
        "rt_load_shedding": float(rt.m_ls.sum()),
        "rt_wind_spillage": float(rt.m_ws.sum()),
        "rt_redispatch": float(rt.m_rd.sum()),
        "rt_total": float(rt.total_cost.sum()),
        "rt_objective": rt.objective,
    }


class DayMetrics(BaseModel):
    day: int
    date: str | None = None
    scuc_generation: float
    scuc_commitment: float
    scuc_objective: float
    reserve_penalty: float
    reserve_shortfall_mw: float = 0.0
    rt_generation: float
    rt_load_shedding: float
    rt_wind_spillage: float
    rt_redispatch: float
    rt_total: float
    rt_objective: float
    raf_up: float | None = None
    raf_down: float | None = None
    raf_total: float = 0.0
    raf_up_mean: float | None = None
    raf_down_mean: float | None = None
    deployed_up: float = 0.0
    deployed_down: float = 0.0
    scheduled_up: float = 0.0
    scheduled_down: float = 0.0
    coverage_weather: float | None = None
    coverage_benchmark: float | None = None


class EvaluationReport(BaseModel):
    run_id: str
    config_hash: str
    seed: int
    policy: str
    method: str | None = None
    level: int | None = None
    level_value: float | None = None
    created_at: datetime = Field(default_factory=utcnow)
    days: list[DayMetrics] = Field(default_factory=list)

    def totals(self) -> dict:
        keys = ("scuc_generation", "scuc_commitment", "scuc_objective", "reserve_penalty", "reserve_shortfall_mw",
                "rt_generation", "rt_load_shedding", "rt_wind_spillage", "rt_redispatch", "rt_total", "rt_objective")
        out = {k: float(sum(getattr(d, k) for d in self.days)) for k in keys}
        dep_up = sum(d.deployed_up for d in self.days)
        dep_dn = sum(d.deployed_down for d in self.days)
        out["raf_up"] = _ratio(dep_up, sum(d.scheduled_up for d in self.days))
        out["raf_down"] = _ratio(dep_dn, sum(d.scheduled_down for d in self.days))
        out["raf_total"] = (out["raf_up"] or 0.0) + (out["raf_down"] or 0.0)
        for key in ("coverage_weather", "coverage_benchmark"):
            vals = [getattr(d, key) for d in self.days if getattr(d, key) is not None]
            out[key] = float(np.mean(vals)) if vals else None
        return out

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([d.model_dump() for d in self.days])

    def to_document(self, with_timestamp: bool = True) -> dict:
        doc = self.model_dump(mode="json")
        if not with_timestamp:
            doc.pop("created_at")
        doc["totals"] = self.totals()
        doc["format"] = FORMAT
        doc["version"] = FORMAT_VERSION
        return doc

    @classmethod
    def from_document(cls, doc: dict) -> "EvaluationReport":
        if doc.get("format") != FORMAT or doc.get("version") != FORMAT_VERSION:
            raise DataValidationError("not a version-1 evaluation report")
        body = {k: v for k, v in doc.items() if k not in ("format", "version", "totals")}
        return cls.model_validate(body)


def evaluate_day(day: int, da: DaSolution, rt: RtSolution, *, date: str | None = None,
                 coverage_weather: float | None = None, coverage_benchmark: float | None = None) -> DayMetrics:
    costs = cost_breakdown(rt, da)
    raf = reserve_activation_factors(da, rt)
    log.info("[evaluate] day %d: rt total %.2f, RAF up=%s down=%s", day, costs["rt_total"], raf.up, raf.down)
    return DayMetrics(
        day=day,
        date=date,
        **{k: v for k, v in costs.items() if k != "per_period"},
        reserve_shortfall_mw=da.reserve_shortfall(),
        raf_up=raf.up,
        raf_down=raf.down,
        raf_total=raf.total,
        raf_up_mean=raf.up_mean,
        raf_down_mean=raf.down_mean,
        deployed_up=raf.deployed_up,
        deployed_down=raf.deployed_down,
        scheduled_up=raf.scheduled_up,
        scheduled_down=raf.scheduled_down,
        coverage_weather=coverage_weather,
        coverage_benchmark=coverage_benchmark,
    )
