"""Real-time economic dispatch against realized wind and load with day-ahead commitments fixed."""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from windflex.config import Penalties
from windflex.errors import DataValidationError, SolverError
from windflex.grid import GridCase
from windflex.sched_backend import OptModel, SolveLimits
from windflex.sched_scuc import DaSolution, Topology

log = logging.getLogger(__name__)


@dataclass
class RtModel:
    opt: OptModel
    topo: Topology
    da: DaSolution
    penalties: Penalties
    vars: dict
    # no-load, start-up and shut-down cost of the fixed commitments per period
    commitment: np.ndarray


def build_rt_dispatch(case: GridCase, da: DaSolution, penalties: Penalties = Penalties(),
                      solver: str = "appsi_highs") -> RtModel:
    """LP over generator output with load shedding, wind spillage and two-tier redispatch.

    Output deviations from the day-ahead schedule are split into a part covered by the
    held flexibility reserve (priced at ``redispatch_in``) and the rest (``redispatch_out``).
    """
    if not 0 < penalties.redispatch_in < penalties.redispatch_out:
        raise DataValidationError("redispatch prices must satisfy 0 < redispatch_in < redispatch_out")
    topo = Topology(case)
    if list(da.generators) != topo.G or da.periods != case.periods:
        raise DataValidationError("day-ahead solution does not match the grid case")
    G, B, T = topo.G, topo.B, topo.T
    gt = [(g, t) for g in G for t in T]
    gi = {g: i for i, g in enumerate(G)}
    u = {(g, t): float(round(da.u[gi[g], t])) for g, t in gt}
    commitment = np.zeros(len(T))
    for i, g in enumerate(G):
        gen = topo.gen[g]
        commitment += gen.no_load * np.rint(da.u[i]) + gen.startup * da.v[i] + gen.shutdown * da.w[i]

    opt = OptModel(f"rt_{case.name}_{da.policy}", solver=solver)
    p = opt.add_var("p", gt)
    cost = opt.add_var("cost", gt)
    d_up, d_dn = opt.add_var("d_up", gt), opt.add_var("d_down", gt)
    a_up, a_dn = opt.add_var("a_up", gt), opt.add_var("a_down", gt)
    b_up, b_dn = opt.add_var("b_up", gt), opt.add_var("b_down", gt)
    shed = opt.add_var("shed", [(ld.id, t) for ld in case.loads for t in T])
    spill = opt.add_var("spill", [(f.id, t) for f in case.wind_farms for t in T])

    for g, t in gt:
        gen = topo.gen[g]
        i = gi[g]
        p[g, t].setlb(gen.pmin * u[g, t])
        p[g, t].setub(gen.pmax * u[g, t])
        a_up[g, t].setub(float(da.ru[i, t]))
        a_dn[g, t].setub(float(da.rd[i, t]))
        for slope, intercept in gen.cost_segments:
            opt.add_constraint("cost_epigraph", cost[g, t] >= slope * p[g, t] + intercept * u[g, t])
        opt.add_constraint("deviation", p[g, t] - float(da.p[i, t]) == d_up[g, t] - d_dn[g, t])
        opt.add_constraint("deviation_up_split", d_up[g, t] == a_up[g, t] + b_up[g, t])
        opt.add_constraint("deviation_down_split", d_dn[g, t] == a_dn[g, t] + b_dn[g, t])

        # base ramps with commitments as constants
        init = gen.initial
        u_prev = u[g, t - 1] if t > 0 else (1.0 if init.on else 0.0)
        p_prev = p[g, t - 1] if t > 0 else init.output
        v = max(0.0, u[g, t] - u_prev)
        w = max(0.0, u_prev - u[g, t])
        opt.add_constraint("ramp_up", p[g, t] - p_prev <= gen.ramp_60 * u_prev + gen.pmin * v)
        opt.add_constraint("ramp_down", p_prev - p[g, t] <= gen.ramp_60 * u[g, t] + gen.pmin * w)

    for ld in case.loads:
        series = ld.realized if ld.realized is not None else ld.forecast
        for t in T:
            shed[ld.id, t].setub(series[t])
    for f in case.wind_farms:
        series = f.realized if f.realized is not None else f.forecast
        if series is None:
            raise DataValidationError(f"wind farm {f.id} has no real-time wind")
        for t in T:
            spill[f.id, t].setub(series[t])

    theta, flow = topo.add_network(opt)
    for b in B:
        for t in T:
            opt.add_constraint(
                "balance",
                sum(p[g, t] for g in topo.gens_at[b])
                + topo.wind(b, t, realized=True) - sum(spill[f.id, t] for f in topo.farms_at[b])
                + sum(shed[ld.id, t] for ld in topo.loads_at[b])
                + topo.net_inflow(flow, b, t)
                == topo.demand(b, t, realized=True),
            )

    opt.set_objective(
        sum(cost[g, t] for g, t in gt)
        + float(commitment.sum())
        + penalties.load_shedding * sum(shed.values())
        + penalties.wind_spillage * sum(spill.values())
        + penalties.redispatch_in * sum(a_up[k] + a_dn[k] for k in gt)
        + penalties.redispatch_out * sum(b_up[k] + b_dn[k] for k in gt)
    )
    return RtModel(opt, topo, da, penalties, {
        "p": p, "cost": cost, "d_up": d_up, "d_down": d_dn, "a_up": a_up, "a_down": a_dn,
        "b_up": b_up, "b_down": b_dn, "shed": shed, "spill": spill, "theta": theta, "flow": flow,
    }, commitment)


@dataclass(frozen=True)
class RtSolution:
    generators: tuple[str, ...]
    loads: tuple[str, ...]
    farms: tuple[str, ...]
    p: np.ndarray
    shed: np.ndarray
    spill: np.ndarray
    a_up: np.ndarray
    a_down: np.ndarray
    b_up: np.ndarray
    b_down: np.ndarray
    flow: np.ndarray
    angle: np.ndarray
    # per-period cost terms: generation, load shedding, wind spillage, redispatch
    m_pg: np.ndarray
    m_ls: np.ndarray
    m_ws: np.ndarray
    m_rd: np.ndarray
    objective: float
    dual_objective: float | None = None
    status: str = "optimal"

    @property
    def redispatch_in(self) -> np.ndarray:
        return self.a_up + self.a_down

    @property
    def redispatch_out(self) -> np.ndarray:
        return self.b_up + self.b_down

    @property
    def total_cost(self) -> np.ndarray:
        return self.m_pg + self.m_ls + self.m_ws + self.m_rd

    def cost_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "period": np.arange(self.m_pg.size),
            "M_PG": self.m_pg,
            "M_LS": self.m_ls,
            "M_WS": self.m_ws,
            "M_RD": self.m_rd,
            "total": self.total_cost,
        })

    def dispatch_frame(self) -> pd.DataFrame:
        rows = []
        for i, g in enumerate(self.generators):
            for t in range(self.p.shape[1]):
                rows.append({"generator": g, "period": t, "p": self.p[i, t],
                             "R_I": self.a_up[i, t] + self.a_down[i, t],
                             "R_II": self.b_up[i, t] + self.b_down[i, t]})
        return pd.DataFrame(rows)

    def to_document(self) -> dict:
        arrays = ("p", "shed", "spill", "a_up", "a_down", "b_up", "b_down", "flow", "angle",
                  "m_pg", "m_ls", "m_ws", "m_rd")
        return {
            "format": "windflex.rt_solution",
            "version": 1,
            "generators": list(self.generators),
            "loads": list(self.loads),
            "farms": list(self.farms),
            **{k: getattr(self, k).tolist() for k in arrays},
            "objective": self.objective,
            "dual_objective": self.dual_objective,
            "status": self.status,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "RtSolution":
        if doc.get("format") != "windflex.rt_solution":
            raise DataValidationError("not a real-time solution document")
        periods = len(doc["m_pg"])
        shapes = {"shed": len(doc["loads"]), "spill": len(doc["farms"])}
        arrays = {}
        for k in ("p", "shed", "spill", "a_up", "a_down", "b_up", "b_down", "flow", "angle"):
            arr = np.asarray(doc[k], dtype=float)
            arrays[k] = arr.reshape(shapes.get(k, len(doc[k])), periods)
        for k in ("m_pg", "m_ls", "m_ws", "m_rd"):
            arrays[k] = np.asarray(doc[k], dtype=float)
        return cls(tuple(doc["generators"]), tuple(doc["loads"]), tuple(doc["farms"]),
                   objective=doc["objective"], dual_objective=doc.get("dual_objective"),
                   status=doc.get("status", "optimal"), **arrays)


def _grid(opt, var, rows, cols) -> np.ndarray:
    return np.array([[opt.value(var[r, c]) for c in cols] for r in rows]).reshape(len(rows), len(cols))


def solve_rt(handle: RtModel, limits: SolveLimits = SolveLimits()) -> RtSolution:
    opt, topo, vs, pen = handle.opt, handle.topo, handle.vars, handle.penalties
    result = opt.solve(limits)
    G, T = topo.G, topo.T
    loads = [ld.id for ld in topo.case.loads]
    farms = [f.id for f in topo.case.wind_farms]
    g = {k: _grid(opt, vs[k], G, T) for k in ("p", "cost", "a_up", "a_down", "b_up", "b_down")}
    shed = _grid(opt, vs["shed"], loads, T)
    spill = _grid(opt, vs["spill"], farms, T)
    dual = None
    try:
        dual = opt.dual_objective()
    except SolverError:
        log.warning("[rt] %s: dual values unavailable, skipping the dual objective", opt.name)
    sol = RtSolution(
        tuple(G), tuple(loads), tuple(farms), g["p"], shed, spill, g["a_up"], g["a_down"], g["b_up"], g["b_down"],
        _grid(opt, vs["flow"], topo.L, T), _grid(opt, vs["theta"], topo.B, T),
        m_pg=g["cost"].sum(axis=0) + handle.commitment,
        m_ls=pen.load_shedding * shed.sum(axis=0),
        m_ws=pen.wind_spillage * spill.sum(axis=0),
        m_rd=pen.redispatch_in * (g["a_up"] + g["a_down"]).sum(axis=0)
        + pen.redispatch_out * (g["b_up"] + g["b_down"]).sum(axis=0),
        objective=result.objective, dual_objective=dual, status=result.status,
    )
    log.info("[rt] objective %.2f: shed %.3f MWh, spill %.3f MWh, redispatch in/out %.3f/%.3f MWh",
             result.objective, shed.sum(), spill.sum(), sol.redispatch_in.sum(), sol.redispatch_out.sum())
    return sol


def extract_redispatch(da: DaSolution, rt: RtSolution) -> dict[str, np.ndarray]:
    """Signed redispatch R = p_rt - p_da split into the magnitude inside held reserve (R_I) and the overflow (R_II)."""
    if da.p.shape != rt.p.shape:
        raise DataValidationError("day-ahead and real-time dispatch shapes differ")
    dev = rt.p - da.p
    up = np.maximum(dev, 0.0)
    down = np.maximum(-dev, 0.0)
    r_in = np.minimum(up, da.ru) + np.minimum(down, da.rd)
    return {"R": dev, "R_I": r_in, "R_II": up + down - r_in}
