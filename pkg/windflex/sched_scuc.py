"""Day-ahead security-constrained unit commitment with optional flexibility reserve requirements.

policy ``none`` is the base SCUC; ``system``, ``zonal`` and ``nodal`` add upward and
downward flexibility reserve held within 10 minutes, with requirements per system,
zone or bus. Nodal requirements must also be deliverable over the network.
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import pyomo.environ as pyo

from windflex.errors import DataValidationError
from windflex.grid import GridCase
from windflex.reserve import ReserveSchedule
from windflex.sched_backend import OptModel, SolveLimits

log = logging.getLogger(__name__)

POLICIES = ("none", "system", "zonal", "nodal")
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ScucOptions:
    contingency_mode: str = "literal"
    ramp_mode: str = "literal"
    relax_price: float = 500.0
    reserve_tiebreak: float = 1e-3
    load_reserve_extent: float | None = None
    solver: str = "appsi_highs"


@dataclass
class Topology:
    """Index sets and incidence lookups shared by the DA and RT models."""

    case: GridCase
    G: list[str] = field(init=False)
    B: list[str] = field(init=False)
    L: list[str] = field(init=False)
    T: list[int] = field(init=False)

    def __post_init__(self):
        c = self.case
        self.G = [g.id for g in c.generators]
        self.B = c.bus_ids
        self.L = [ln.id for ln in c.lines]
        self.T = list(range(c.periods))
        self.gen = {g.id: g for g in c.generators}
        self.line = {ln.id: ln for ln in c.lines}
        self.gens_at = {b: [g.id for g in c.generators if g.bus == b] for b in self.B}
        self.farms_at = {b: [f for f in c.wind_farms if f.bus == b] for b in self.B}
        self.loads_at = {b: [ld for ld in c.loads if ld.bus == b] for b in self.B}
        self.out_lines = {b: [ln.id for ln in c.lines if ln.from_bus == b] for b in self.B}
        self.in_lines = {b: [ln.id for ln in c.lines if ln.to_bus == b] for b in self.B}

    def demand(self, bus: str, t: int, realized: bool = False) -> float:
        total = 0.0
        for ld in self.loads_at[bus]:
            series = ld.realized if realized and ld.realized is not None else ld.forecast
            total += series[t]
        return total

    def wind(self, bus: str, t: int, realized: bool = False) -> float:
        total = 0.0
        for f in self.farms_at[bus]:
            series = f.realized if realized and f.realized is not None else f.forecast
            if series is None:
                raise DataValidationError(f"wind farm {f.id} has no day-ahead forecast")
            total += series[t]
        return total

    def add_network(self, opt: OptModel, prefix: str = ""):
        theta = opt.add_var(f"{prefix}theta", [(b, t) for b in self.B for t in self.T], lb=None)
        flow = opt.add_var(f"{prefix}flow", [(ln, t) for ln in self.L for t in self.T], lb=None)
        for t in self.T:
            theta[self.case.reference_bus, t].fix(0.0)
            for ln in self.L:
                line = self.line[ln]
                flow[ln, t].setlb(-line.limit)
                flow[ln, t].setub(line.limit)
                opt.add_constraint(f"{prefix}flow_definition",
                                   flow[ln, t] == line.susceptance * (theta[line.from_bus, t] - theta[line.to_bus, t]))
        return theta, flow

    def net_inflow(self, flow, b: str, t: int):
        return sum(flow[ln, t] for ln in self.in_lines[b]) - sum(flow[ln, t] for ln in self.out_lines[b])


@dataclass
class ScucModel:
    opt: OptModel
    topo: Topology
    policy: str
    options: ScucOptions
    entities: list[str]
    requirement_up: dict
    requirement_down: dict
    vars: dict


def _entities(case: GridCase, policy: str) -> tuple[list[str], dict[str, list[str]]]:
    """Requirement entities and the buses each covers."""
    if policy == "system":
        return ["system"], {"system": case.bus_ids}
    if policy == "zonal":
        zones = case.zones()
        return list(zones), zones
    if policy == "nodal":
        return case.bus_ids, {b: [b] for b in case.bus_ids}
    return [], {}


def build_scuc(case: GridCase, reserve: Mapping[str, ReserveSchedule] | None = None, policy: str = "none",
               options: ScucOptions = ScucOptions()) -> ScucModel:
    if policy not in POLICIES:
        raise DataValidationError(f"unknown policy {policy!r}")
    if policy != "none" and reserve is None:
        raise DataValidationError(f"policy {policy!r} needs a reserve schedule set")
    topo = Topology(case)
    G, B, T = topo.G, topo.B, topo.T
    entities, members = _entities(case, policy)
    reserve = dict(reserve or {})
    unknown = [e for e in reserve if e not in entities]
    if policy != "none" and unknown:
        raise DataValidationError(f"reserve entities {unknown} not found for policy {policy!r}")
    for e, sched in reserve.items():
        if sched.periods != case.periods:
            raise DataValidationError(f"reserve for {e} has {sched.periods} periods, case has {case.periods}")

    opt = OptModel(f"scuc_{case.name}_{policy}", solver=options.solver)
    gt = [(g, t) for g in G for t in T]
    u = opt.add_var("u", gt, binary=True)
    v = opt.add_var("v", gt, lb=0.0, ub=1.0)
    w = opt.add_var("w", gt, lb=0.0, ub=1.0)
    p = opt.add_var("p", gt)
    cost = opt.add_var("cost", gt)
    rs = opt.add_var("rs", gt)
    flexible = policy != "none"
    ru = opt.add_var("ru", gt) if flexible else None
    rd = opt.add_var("rd", gt) if flexible else None
    for g, t in gt:
        r10 = topo.gen[g].ramp_10
        rs[g, t].setub(r10)
        if flexible:
            ru[g, t].setub(r10)
            rd[g, t].setub(r10)

    def up(g, t):
        return ru[g, t] if flexible else 0.0

    def dn(g, t):
        return rd[g, t] if flexible else 0.0

    for g in G:
        gen = topo.gen[g]
        init = gen.initial
        u_prev0 = 1.0 if init.on else 0.0
        for t in T:
            for slope, intercept in gen.cost_segments:
                opt.add_constraint("cost_epigraph", cost[g, t] >= slope * p[g, t] + intercept * u[g, t])
            u_prev = u[g, t - 1] if t > 0 else u_prev0
            opt.add_constraint("commitment_logic", v[g, t] - w[g, t] == u[g, t] - u_prev)
            opt.add_constraint("min_up", sum(v[g, s] for s in range(max(0, t - gen.min_up + 1), t + 1)) <= u[g, t])
            opt.add_constraint("min_down",
                               sum(w[g, s] for s in range(max(0, t - gen.min_down + 1), t + 1)) <= 1 - u[g, t])
            opt.add_constraint("capacity_low", p[g, t] - dn(g, t) >= gen.pmin * u[g, t])
            opt.add_constraint("capacity_high", p[g, t] + rs[g, t] + up(g, t) <= gen.pmax * u[g, t])

            p_prev = p[g, t - 1] if t > 0 else init.output
            up_prev = up(g, t - 1) if t > 0 else 0.0
            dn_prev = dn(g, t - 1) if t > 0 else 0.0
            if options.ramp_mode == "literal":
                ramp_up = p[g, t] + up(g, t) - p_prev + dn_prev
                ramp_down = p_prev + up_prev - p[g, t] + dn(g, t)
            else:
                ramp_up = p[g, t] + up(g, t) - p_prev
                ramp_down = p_prev - p[g, t] + dn(g, t)
            opt.add_constraint("ramp_up", ramp_up <= gen.ramp_60 * u_prev + gen.pmin * v[g, t])
            opt.add_constraint("ramp_down", ramp_down <= gen.ramp_60 * u[g, t] + gen.pmin * w[g, t])

        if init.hours is not None:
            must = (gen.min_up - init.hours) if init.on else (gen.min_down - init.hours)
            for t in range(min(max(0, must), len(T))):
                opt.add_constraint("initial_status", u[g, t] == u_prev0)

    theta, flow = topo.add_network(opt)
    for b in B:
        for t in T:
            opt.add_constraint(
                "balance",
                sum(p[g, t] for g in topo.gens_at[b]) + topo.wind(b, t) + topo.net_inflow(flow, b, t)
                == topo.demand(b, t),
            )

    for t in T:
        total_rs = sum(rs[g, t] for g in G)
        if case.largest_unit_contingency:
            for g in G:
                if options.contingency_mode == "literal":
                    opt.add_constraint("contingency", total_rs >= p[g, t] + rs[g, t])
                else:
                    opt.add_constraint("contingency", total_rs - rs[g, t] >= p[g, t] + rs[g, t])
        if case.contingency_fraction > 0:
            demand = sum(topo.demand(b, t) for b in B)
            opt.add_constraint("contingency_share", total_rs >= case.contingency_fraction * demand)

    eps = options.load_reserve_extent if options.load_reserve_extent is not None else case.load_reserve_extent
    req_up, req_dn = {}, {}
    slack_up = slack_dn = None
    if flexible:
        et = [(e, t) for e in entities for t in T]
        slack_up = opt.add_var("slack_up", et)
        slack_dn = opt.add_var("slack_down", et)
        for e in entities:
            sched = reserve.get(e)
            for t in T:
                load = sum(topo.demand(b, t) for b in members[e])
                req_up[e, t] = (float(sched.up[t]) if sched else 0.0) + eps * load
                req_dn[e, t] = (float(sched.down[t]) if sched else 0.0) + eps * load

        if policy in ("system", "zonal"):
            for e in entities:
                gens = [g for b in members[e] for g in topo.gens_at[b]]
                for t in T:
                    opt.add_constraint("requirement_up", sum(ru[g, t] for g in gens) + slack_up[e, t] >= req_up[e, t])
                    opt.add_constraint("requirement_down", sum(rd[g, t] for g in gens) + slack_dn[e, t] >= req_dn[e, t])
        else:
            theta_u, flow_u = topo.add_network(opt, prefix="up_")
            theta_d, flow_d = topo.add_network(opt, prefix="down_")
            for ln in topo.L:
                for t in T:
                    flow_u[ln, t].setlb(None)
                    flow_u[ln, t].setub(None)
                    flow_d[ln, t].setlb(None)
                    flow_d[ln, t].setub(None)
                    limit = topo.line[ln].limit
                    opt.add_constraint("superimposed_up", pyo.inequality(-limit, flow[ln, t] + flow_u[ln, t], limit))
                    opt.add_constraint("superimposed_down", pyo.inequality(-limit, flow[ln, t] + flow_d[ln, t], limit))
            for b in B:
                for t in T:
                    opt.add_constraint(
                        "requirement_up",
                        sum(ru[g, t] for g in topo.gens_at[b]) + topo.net_inflow(flow_u, b, t) + slack_up[b, t]
                        >= req_up[b, t],
                    )
                    opt.add_constraint(
                        "requirement_down",
                        sum(rd[g, t] for g in topo.gens_at[b]) - topo.net_inflow(flow_d, b, t) + slack_dn[b, t]
                        >= req_dn[b, t],
                    )

    objective = sum(
        cost[g, t] + topo.gen[g].no_load * u[g, t] + topo.gen[g].startup * v[g, t] + topo.gen[g].shutdown * w[g, t]
        for g, t in gt
    )
    tiebreak = sum(rs[g, t] + up(g, t) + dn(g, t) for g, t in gt)
    objective = objective + options.reserve_tiebreak * tiebreak
    if flexible:
        objective = objective + options.relax_price * sum(slack_up[k] + slack_dn[k] for k in slack_up)
    opt.set_objective(objective)

    log.info("[scuc] built %s policy model: %d generators x %d periods, %d requirement entities",
             policy, len(G), len(T), len(entities))
    return ScucModel(
        opt, topo, policy, options, entities, req_up, req_dn,
        {"u": u, "v": v, "w": w, "p": p, "cost": cost, "rs": rs, "ru": ru, "rd": rd, "theta": theta,
         "flow": flow, "slack_up": slack_up, "slack_down": slack_dn},
    )


def fix_commitment(handle: ScucModel, u) -> None:
    """Fix every commitment binary; ``u`` is a (G, T) array or a {(g, t): 0/1} mapping."""
    var = handle.vars["u"]
    for i, g in enumerate(handle.topo.G):
        for t in handle.topo.T:
            val = u[g, t] if isinstance(u, Mapping) else u[i][t]
            var[g, t].fix(float(round(val)))


def unfix_commitment(handle: ScucModel) -> None:
    for vd in handle.vars["u"].values():
        vd.unfix()


@dataclass(frozen=True)
class DaSolution:
    generators: tuple[str, ...]
    buses: tuple[str, ...]
    lines: tuple[str, ...]
    policy: str
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    p: np.ndarray
    rs: np.ndarray
    ru: np.ndarray
    rd: np.ndarray
    flow: np.ndarray
    angle: np.ndarray
    slack_up: dict[str, np.ndarray]
    slack_down: dict[str, np.ndarray]
    objective: float
    breakdown: dict[str, float]
    status: str = "optimal"
    gap: float | None = None
    seconds: float = 0.0

    @property
    def periods(self) -> int:
        return self.p.shape[1]

    def table(self, name: str) -> pd.DataFrame:
        arr = getattr(self, name)
        index = self.lines if name == "flow" else self.buses if name == "angle" else self.generators
        return pd.DataFrame(arr, index=list(index), columns=range(arr.shape[1]))

    def to_frame(self) -> pd.DataFrame:
        """Long table of per-generator series."""
        rows = []
        for i, g in enumerate(self.generators):
            for t in range(self.periods):
                rows.append({"generator": g, "period": t, "u": int(self.u[i, t]), "v": self.v[i, t],
                             "w": self.w[i, t], "p": self.p[i, t], "r_spin": self.rs[i, t],
                             "r_up": self.ru[i, t], "r_down": self.rd[i, t]})
        return pd.DataFrame(rows)

    def reserve_shortfall(self) -> float:
        return float(sum(s.sum() for s in self.slack_up.values()) + sum(s.sum() for s in self.slack_down.values()))

    def to_document(self) -> dict:
        return {
            "format": "windflex.da_solution",
            "version": FORMAT_VERSION,
            "generators": list(self.generators),
            "buses": list(self.buses),
            "lines": list(self.lines),
            "policy": self.policy,
            **{k: getattr(self, k).tolist() for k in ("u", "v", "w", "p", "rs", "ru", "rd", "flow", "angle")},
            "slack_up": {k: v.tolist() for k, v in self.slack_up.items()},
            "slack_down": {k: v.tolist() for k, v in self.slack_down.items()},
            "objective": self.objective,
            "breakdown": self.breakdown,
            "status": self.status,
            "gap": self.gap,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "DaSolution":
        if doc.get("format") != "windflex.da_solution" or doc.get("version") != FORMAT_VERSION:
            raise DataValidationError("not a version-1 day-ahead solution document")
        periods = len(doc["p"][0])
        rows = {"flow": "lines", "angle": "buses"}
        arrays = {k: np.asarray(doc[k], dtype=float).reshape(len(doc[rows.get(k, "generators")]), periods)
                  for k in ("u", "v", "w", "p", "rs", "ru", "rd", "flow", "angle")}
        return cls(
            tuple(doc["generators"]), tuple(doc["buses"]), tuple(doc["lines"]), doc["policy"],
            slack_up={k: np.asarray(v, dtype=float) for k, v in doc["slack_up"].items()},
            slack_down={k: np.asarray(v, dtype=float) for k, v in doc["slack_down"].items()},
            objective=doc["objective"], breakdown=dict(doc["breakdown"]), status=doc["status"], gap=doc.get("gap"),
            **arrays,
        )


def _grid(opt: OptModel, var, rows, cols) -> np.ndarray:
    if var is None:
        return np.zeros((len(rows), len(cols)))
    return np.array([[opt.value(var[r, c]) for c in cols] for r in rows])


def solve(handle: ScucModel, limits: SolveLimits = SolveLimits()) -> DaSolution:
    opt, topo, vs = handle.opt, handle.topo, handle.vars
    result = opt.solve(limits)
    G, T = topo.G, topo.T
    u = np.rint(_grid(opt, vs["u"], G, T))
    v, w = _grid(opt, vs["v"], G, T), _grid(opt, vs["w"], G, T)
    rs, ru, rd = _grid(opt, vs["rs"], G, T), _grid(opt, vs["ru"], G, T), _grid(opt, vs["rd"], G, T)
    cost = _grid(opt, vs["cost"], G, T)
    gens = [topo.gen[g] for g in G]
    slack_up = {e: np.array([opt.value(vs["slack_up"][e, t]) for t in T]) for e in handle.entities}
    slack_dn = {e: np.array([opt.value(vs["slack_down"][e, t]) for t in T]) for e in handle.entities}
    relax = handle.options.relax_price
    breakdown = {
        "generation": float(cost.sum()),
        "no_load": float(sum(gen.no_load * u[i].sum() for i, gen in enumerate(gens))),
        "startup": float(sum(gen.startup * v[i].sum() for i, gen in enumerate(gens))),
        "shutdown": float(sum(gen.shutdown * w[i].sum() for i, gen in enumerate(gens))),
        "reserve_penalty": float(relax * (sum(s.sum() for s in slack_up.values()) + sum(s.sum() for s in slack_dn.values()))),
        "reserve_tiebreak": float(handle.options.reserve_tiebreak * (rs.sum() + ru.sum() + rd.sum())),
    }
    log.info("[scuc] %s: objective %.2f (generation %.2f, reserve penalty %.2f)",
             result.status, result.objective, breakdown["generation"], breakdown["reserve_penalty"])
    return DaSolution(
        tuple(G), tuple(topo.B), tuple(topo.L), handle.policy, u, v, w, _grid(opt, vs["p"], G, T), rs, ru, rd,
        _grid(opt, vs["flow"], topo.L, T), _grid(opt, vs["theta"], topo.B, T), slack_up, slack_dn,
        result.objective, breakdown, result.status, result.gap, result.seconds,
    )
