"""Solver-neutral model handle on top of pyomo.

``appsi_highs`` (the default) runs HiGHS through pyomo's persistent APPSI
interface; any other name goes through ``SolverFactory``.
"""

import logging
import re
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import pyomo.environ as pyo
from pyomo.repn import generate_standard_repn

from windflex.errors import InfeasibleError, SolverError

log = logging.getLogger(__name__)

# Native option names for gap, time limit and threads.
LEGACY_OPTIONS = {
    "glpk": ("mipgap", "tmlim", None),
    "cbc": ("ratioGap", "seconds", "threads"),
    "gurobi": ("MIPGap", "TimeLimit", "Threads"),
    "cplex": ("mip_tolerances_mipgap", "timelimit", "threads"),
}
IIS_SOLVERS = ("gurobi", "cplex", "xpress")


@dataclass(frozen=True)
class SolveLimits:
    mip_gap: float = 0.001
    time_limit: float | None = None
    threads: int = 1
    seed: int = 0


@dataclass(frozen=True)
class SolveResult:
    status: str
    objective: float
    bound: float | None
    gap: float | None
    seconds: float
    solver: str


@dataclass
class OptModel:
    """A minimization model: variables, linear constraint groups, a linear objective."""

    name: str
    solver: str = "appsi_highs"
    model: pyo.ConcreteModel = field(init=False)
    duals: dict = field(default_factory=dict, init=False)
    reduced_costs: dict = field(default_factory=dict, init=False)
    _groups: dict = field(default_factory=dict, init=False)
    _persistent: object = field(default=None, init=False)

    def __post_init__(self):
        self.model = pyo.ConcreteModel(name=self.name)

    def add_var(self, name: str, index, *, binary: bool = False, lb: float | None = 0.0,
                ub: float | None = None):
        domain = pyo.Binary if binary else pyo.Reals
        var = pyo.Var(list(index), domain=domain, bounds=(None if binary else lb, None if binary else ub))
        self.model.add_component(name, var)
        return var

    def add_constraint(self, group: str, expr):
        cons = self._groups.get(group)
        if cons is None:
            cons = pyo.ConstraintList()
            self.model.add_component(group, cons)
            self._groups[group] = cons
        return cons.add(expr)

    def set_objective(self, expr):
        if self.model.component("objective") is not None:
            self.model.del_component("objective")
        self.model.objective = pyo.Objective(expr=expr, sense=pyo.minimize)

    @staticmethod
    def value(expr) -> float:
        v = pyo.value(expr, exception=False)
        return 0.0 if v is None else float(v)

    def is_linear_program(self) -> bool:
        return not any(v.is_binary() and not v.fixed for v in self.model.component_data_objects(pyo.Var))

    def solve(self, limits: SolveLimits = SolveLimits()) -> SolveResult:
        start = time.perf_counter()
        if self.solver == "appsi_highs":
            result = self._solve_appsi(limits)
        else:
            result = self._solve_legacy(limits)
        seconds = time.perf_counter() - start
        log.info("[solve] %s: %s obj=%.6g in %.2fs", self.name, result[0], result[1], seconds)
        status, objective, bound = result
        gap = None
        if bound is not None and objective is not None:
            gap = abs(objective - bound) / max(1.0, abs(objective))
        return SolveResult(status, objective, bound, gap, seconds, self.solver)

    def _solve_appsi(self, limits: SolveLimits):
        from pyomo.contrib.appsi.base import TerminationCondition
        from pyomo.contrib.appsi.solvers import Highs

        if self._persistent is None:
            opt = Highs()
            if not opt.available():
                raise SolverError("HiGHS is not available (install highspy)")
            self._persistent = opt
        opt = self._persistent
        opt.config.load_solution = False
        opt.config.stream_solver = False
        opt.config.mip_gap = limits.mip_gap
        if limits.time_limit is not None:
            opt.config.time_limit = limits.time_limit
        options = {"random_seed": limits.seed}
        if limits.threads > 1:
            options["threads"] = limits.threads
        opt.highs_options = options

        try:
            res = opt.solve(self.model)
        except RuntimeError as e:
            raise SolverError(f"{self.name}: HiGHS failed: {e}") from e
        tc = res.termination_condition
        if tc in (TerminationCondition.infeasible, TerminationCondition.infeasibleOrUnbounded):
            raise InfeasibleError(f"{self.name}: model is infeasible")
        if tc == TerminationCondition.unbounded:
            raise SolverError(f"{self.name}: model is unbounded")
        if res.best_feasible_objective is None:
            raise SolverError(f"{self.name}: no feasible solution ({tc.name})")
        status = "optimal" if tc == TerminationCondition.optimal else "time_limit"
        if status != "optimal":
            log.warning("[solve] %s stopped with %s, using best incumbent", self.name, tc.name)

        res.solution_loader.load_vars()
        self.duals, self.reduced_costs = {}, {}
        if self.is_linear_program():
            try:
                self.duals = dict(res.solution_loader.get_duals())
                self.reduced_costs = dict(res.solution_loader.get_reduced_costs())
            except RuntimeError:
                # fixed binaries keep HiGHS in MIP mode, which reports no duals
                self.duals, self.reduced_costs = {}, {}
        bound = res.best_objective_bound
        return status, float(res.best_feasible_objective), None if bound is None else float(bound)

    def _solve_legacy(self, limits: SolveLimits):
        from pyomo.opt import SolverFactory, SolverStatus, TerminationCondition

        opt = SolverFactory(self.solver)
        if opt is None or not opt.available(exception_flag=False):
            raise SolverError(f"solver {self.solver!r} is not available")
        gap_key, time_key, thread_key = LEGACY_OPTIONS.get(self.solver, (None, None, None))
        if gap_key:
            opt.options[gap_key] = limits.mip_gap
        if time_key and limits.time_limit is not None:
            opt.options[time_key] = limits.time_limit
        if thread_key:
            opt.options[thread_key] = limits.threads

        lp = self.is_linear_program()
        if lp and self.model.component("dual") is None:
            self.model.dual = pyo.Suffix(direction=pyo.Suffix.IMPORT)
            self.model.rc = pyo.Suffix(direction=pyo.Suffix.IMPORT)

        results = opt.solve(self.model, load_solutions=False, tee=False)
        tc = results.solver.termination_condition
        if tc in (TerminationCondition.infeasible, TerminationCondition.infeasibleOrUnbounded):
            raise InfeasibleError(f"{self.name}: model is infeasible", self._conflict())
        has_solution = len(results.solution) > 0
        if tc not in (TerminationCondition.optimal, TerminationCondition.maxTimeLimit) or not has_solution:
            raise SolverError(f"{self.name}: solver ended with {tc} ({results.solver.status})")
        self.model.solutions.load_from(results)
        status = "optimal" if tc == TerminationCondition.optimal else "time_limit"
        if results.solver.status == SolverStatus.warning:
            log.warning("[solve] %s: solver reported a warning", self.name)

        self.duals, self.reduced_costs = {}, {}
        if lp:
            self.duals = {c: self.model.dual.get(c, 0.0) for c in self.constraints()}
            self.reduced_costs = {v: self.model.rc.get(v, 0.0) for v in self.variables()}
        bound = results.problem.lower_bound
        try:
            bound = float(bound)
        except (TypeError, ValueError):
            bound = None
        return status, float(pyo.value(self.model.objective)), bound

    def _conflict(self) -> list[str]:
        if self.solver not in IIS_SOLVERS:
            return []
        from pyomo.contrib.iis import write_iis

        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "conflict.ilp"
            try:
                write_iis(self.model, str(path), solver=self.solver)
            except Exception as e:  # the IIS writer raises solver-specific errors
                log.warning("[solve] %s: conflict extraction failed: %s", self.name, e)
                return []
            text = path.read_text()
        return sorted(set(re.findall(r"^\s*([A-Za-z_][\w\[\],.]*)\s*:", text, flags=re.MULTILINE)))

    def constraints(self):
        return list(self.model.component_data_objects(pyo.Constraint, active=True))

    def variables(self):
        return [v for v in self.model.component_data_objects(pyo.Var) if not v.fixed]

    def dual(self, con) -> float | None:
        return self.duals.get(con)

    def dual_objective(self, tol: float = 1e-7) -> float:
        """Dual objective of a solved LP assembled from row duals and reduced costs."""
        if not self.duals:
            raise SolverError(f"{self.name}: no dual information available")
        obj = generate_standard_repn(self.model.objective.expr, compute_values=True)
        total = float(obj.constant)
        for con, y in self.duals.items():
            if not y:
                continue
            body = generate_standard_repn(con.body, compute_values=True)
            lower = None if con.lower is None else pyo.value(con.lower)
            upper = None if con.upper is None else pyo.value(con.upper)
            activity = pyo.value(con.body)
            if lower is not None and (upper is None or abs(activity - lower) <= abs(activity - upper)):
                rhs = lower
            else:
                rhs = upper
            total += y * (rhs - float(body.constant))
        for var, rc in self.reduced_costs.items():
            if not rc or var.fixed:
                continue
            lb, ub = var.lb, var.ub
            x = var.value
            if lb is not None and (ub is None or abs(x - lb) <= abs(x - ub)):
                total += rc * lb
            elif ub is not None:
                total += rc * ub
        return total
