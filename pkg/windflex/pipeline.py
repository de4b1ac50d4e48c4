"""Stage-by-stage study runner.

Every stage reads what the previous stage persisted in the run directory, so
re-running one stage from disk gives the same downstream result as a full run.
"""

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from windflex import repo
from windflex.artifacts import RunDir
from windflex.config import LEVEL_PRESETS, RunConfig, settings
from windflex.errors import DataValidationError, StageError
from windflex.evaluation import EvaluationReport, evaluate_day
from windflex.grid import GridCase, load_grid_case, parse_grid_case
from windflex.reporting import envelope_frame, make_report_md, write_pdf
from windflex.reserve import aggregate_reserve, read_reserve_frame, reserve_frame, size_reserve
from windflex.sched_backend import SolveLimits
from windflex.sched_rt import RtSolution, build_rt_dispatch, solve_rt
from windflex.sched_scuc import DaSolution, ScucOptions, build_scuc, solve
from windflex.simulator import write_synthetic_inputs
from windflex.stress_coupling import CouplingCoefficients, pca_feature_coupling
from windflex.stress_scenarios import (
    BenchmarkModel,
    ScenarioSet,
    benchmark_history,
    benchmark_power_scenarios,
    confidence_envelope,
    envelope_coverage,
    fit_benchmark_model,
    scenarios_to_power,
    stress_speed_scenarios,
    stress_weather_scenarios,
    table_power,
)
from windflex.stress_transition import TransitionModel, default_edges, fit_transition_model
from windflex.turbine import hub_speed_power
from windflex.weather import (
    FORECAST_HUB_SPEED,
    HISTORY_FEATURES,
    WEATHER_FEATURES,
    FeatureTable,
    load_feature_table,
    standardize,
)

log = logging.getLogger(__name__)

STAGES = ("ingest", "fit", "stress", "size", "scuc", "rt", "evaluate")
COVERAGE_CI = 0.8


@contextmanager
def stage(name: str) -> Iterator[None]:
    log.info("[%s] start", name)
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        log.error("[%s] failed: %s", name, e)
        raise StageError(name, e) from e
    log.info("[%s] done", name)


@dataclass(frozen=True)
class FarmInputs:
    farm: str
    history: FeatureTable
    forecast: FeatureTable
    actual: FeatureTable | None


def _threads(cfg: RunConfig) -> int:
    return max(1, cfg.solver.threads) if cfg.stressor.parallel else 1


def _limits(cfg: RunConfig) -> SolveLimits:
    return SolveLimits(cfg.solver.mip_gap, cfg.solver.time_limit, cfg.solver.threads, cfg.seed)


def _entity_map(case: GridCase, policy: str) -> dict[str, str]:
    if policy == "zonal":
        return {f.id: case.zone_of(f.bus) for f in case.wind_farms}
    if policy == "nodal":
        return {f.id: f.bus for f in case.wind_farms}
    return {f.id: "system" for f in case.wind_farms}


# ingest


def run_ingest(cfg: RunConfig, rd: RunDir) -> GridCase:
    data = cfg.data
    case = load_grid_case(cfg.resolve(data.grid_case))
    if not case.wind_farms:
        log.warning("[ingest] grid case has no wind farms; reserves will be empty")
    rd.write_json("ingest/grid_case.json", case.to_document())
    for i, farm in enumerate(case.wind_farms):
        override = data.farms.get(farm.id)
        if data.synthetic is not None and (override is None or override.history is None):
            syn = data.synthetic
            paths = write_synthetic_inputs(rd.path(f"inputs/{farm.id}"), syn.days, syn.forecast_days, syn.seed + i)
        else:
            paths = {
                "history": cfg.resolve(override.history if override and override.history else data.history),
                "forecast": cfg.resolve(override.forecast if override and override.forecast else data.forecast),
                "actual": cfg.resolve(override.actual if override and override.actual else data.actual),
            }
        kw = {"schema": data.schema_, "timestamp_column": data.timestamp_column}
        history = load_feature_table(paths["history"], features=HISTORY_FEATURES, **kw)
        forecast = load_feature_table(paths["forecast"], features=WEATHER_FEATURES, **kw)
        _write_table(rd, f"ingest/{farm.id}/history.csv", history)
        _write_table(rd, f"ingest/{farm.id}/forecast.csv", forecast)
        if paths.get("actual") is not None:
            actual = load_feature_table(paths["actual"], features=WEATHER_FEATURES, **kw)
            if not actual.timestamps.equals(forecast.timestamps):
                raise DataValidationError(f"{farm.id}: actual and forecast timestamps differ")
            _write_table(rd, f"ingest/{farm.id}/actual.csv", actual)
    return case


def _write_table(rd: RunDir, name: str, table: FeatureTable) -> None:
    frame = table.data.copy()
    frame.insert(0, "timestamp", table.timestamps.strftime("%Y-%m-%dT%H:%M:%S"))
    rd.write_csv(name, frame)


def read_case(rd: RunDir) -> GridCase:
    return parse_grid_case(rd.read_json("ingest/grid_case.json"))


def _read_table(rd: RunDir, name: str, features) -> FeatureTable:
    # ingest already validated these; history may have gaps where rows were dropped
    frame = rd.read_csv(name)
    stamps = pd.DatetimeIndex(pd.to_datetime(frame["timestamp"], format="ISO8601"))
    steps = np.diff(stamps.asi8)
    resolution = float(steps[steps > 0].min()) / 1e9 if (steps > 0).any() else 3600.0
    return FeatureTable.from_frame(frame[list(features)], stamps, resolution)


def read_inputs(rd: RunDir, farm: str) -> FarmInputs:
    history = _read_table(rd, f"ingest/{farm}/history.csv", HISTORY_FEATURES)
    forecast = _read_table(rd, f"ingest/{farm}/forecast.csv", WEATHER_FEATURES)
    actual = None
    if rd.exists(f"ingest/{farm}/actual.csv"):
        actual = _read_table(rd, f"ingest/{farm}/actual.csv", WEATHER_FEATURES)
    return FarmInputs(farm, history, forecast, actual)


# fit


def _pca_window(cfg: RunConfig, inputs: FarmInputs, day: FeatureTable) -> FeatureTable:
    days = cfg.pca.window_days
    if days == 0:
        return day
    rows = int(round(days * 86400 / inputs.history.resolution))
    hist = inputs.history.select(WEATHER_FEATURES)
    return hist.rows(max(0, hist.h - rows), hist.h)


def run_fit(cfg: RunConfig, rd: RunDir) -> None:
    case = read_case(rd)
    spec = cfg.turbine.to_spec()
    sc = cfg.stressor
    for farm in case.wind_farms:
        inputs = read_inputs(rd, farm.id)
        hist = inputs.history
        pairs = np.column_stack([hist.column(FORECAST_HUB_SPEED), hist.column(sc.key_stressor)])
        edges = tuple(sc.edges) if sc.edges else default_edges(spec)
        model = fit_transition_model(pairs, edges, spec, placeholders=sc.placeholders, families=sc.families,
                                     min_samples=sc.min_samples, bins=sc.hist_bins, merge=sc.merge_empty_intervals)
        rd.write_json(f"fit/{farm.id}/transition.json", model.to_document())

        for d, day in enumerate(inputs.forecast.split_days(case.periods)):
            coeffs = pca_feature_coupling(standardize(_pca_window(cfg, inputs, day)), sc.key_stressor)
            rd.write_json(f"fit/{farm.id}/coupling_day{d}.json", coeffs.to_document())

        bench_pairs = benchmark_history(hist.column(FORECAST_HUB_SPEED), hist.select(WEATHER_FEATURES), spec,
                                        farm.capacity)
        bench = fit_benchmark_model(bench_pairs, sc.benchmark_bins, farm.capacity, sc.families, sc.min_samples,
                                    sc.hist_bins)
        rd.write_json(f"fit/{farm.id}/benchmark.json", bench.to_document())


# stress


def _write_scenarios(rd: RunDir, name: str, sset: ScenarioSet) -> None:
    rd.write_csv(name, sset.to_frame()[["scenario", "period", "value"]])


def _read_scenarios(rd: RunDir, name: str, forecast: np.ndarray, capacity: float, seed: int,
                    timestamps=None, entity: str = "") -> ScenarioSet:
    frame = rd.read_csv(name)
    n = int(frame["scenario"].max()) + 1
    values = frame.sort_values(["scenario", "period"])["value"].to_numpy(float).reshape(n, forecast.size)
    return ScenarioSet(values, forecast, seed, "power", timestamps=timestamps, capacity=capacity, entity=entity)


def run_stress(cfg: RunConfig, rd: RunDir) -> None:
    case = read_case(rd)
    spec = cfg.turbine.to_spec()
    sc = cfg.stressor
    threads = _threads(cfg)
    for i, farm in enumerate(case.wind_farms):
        inputs = read_inputs(rd, farm.id)
        model = TransitionModel.from_document(rd.read_json(f"fit/{farm.id}/transition.json"))
        bench = BenchmarkModel.from_document(rd.read_json(f"fit/{farm.id}/benchmark.json"))
        actual_days = inputs.actual.split_days(case.periods) if inputs.actual is not None else None
        for d, day in enumerate(inputs.forecast.split_days(case.periods)):
            coeffs = CouplingCoefficients.from_document(rd.read_json(f"fit/{farm.id}/coupling_day{d}.json"))
            key_speeds = day.column(sc.key_stressor)
            speeds = stress_speed_scenarios(key_speeds, sc.n_scenarios, model, cfg.seed, key=(i, d), threads=threads,
                                            keep_forecast_in_region=sc.keep_forecast_in_region,
                                            timestamps=day.timestamps)
            weather = stress_weather_scenarios(day, coeffs, speeds)
            power = scenarios_to_power(weather, spec, farm.capacity)
            bench_set = benchmark_power_scenarios(
                None, sc.benchmark_bins, hub_speed_power(key_speeds, spec) * farm.capacity, sc.n_scenarios,
                cfg.seed, capacity=farm.capacity, model=bench, key=(i, d, 1), threads=threads,
                timestamps=day.timestamps,
            )
            realized = table_power(actual_days[d], spec) * farm.capacity if actual_days else None

            _write_scenarios(rd, f"stress/{farm.id}/day{d}_power.csv", power)
            _write_scenarios(rd, f"stress/{farm.id}/day{d}_benchmark.csv", bench_set)
            series = pd.DataFrame({
                "period": np.arange(day.h),
                "timestamp": day.timestamps.strftime("%Y-%m-%dT%H:%M:%S"),
                "forecast": power.forecast,
                "benchmark_forecast": bench_set.forecast,
                "realized_mw": realized if realized is not None else np.nan,
            })
            rd.write_csv(f"stress/{farm.id}/day{d}_series.csv", series)
            rd.write_csv(f"plots/{farm.id}_day{d}_envelopes.csv", envelope_frame(power, realized, bench_set))
            log.info("[stress] %s day %d: %d scenarios, mean forecast %.1f MW", farm.id, d, power.n,
                     float(power.forecast_mw().mean()))


def _day_count(cfg: RunConfig, case: GridCase, rd: RunDir) -> int:
    if not case.wind_farms:
        return 1
    frame = rd.read_csv(f"ingest/{case.wind_farms[0].id}/forecast.csv")
    return len(frame) // case.periods


@dataclass(frozen=True)
class DayWind:
    power: ScenarioSet
    benchmark: ScenarioSet
    realized_mw: np.ndarray | None
    date: str


def read_day_wind(cfg: RunConfig, rd: RunDir, farm, d: int) -> DayWind:
    series = rd.read_csv(f"stress/{farm.id}/day{d}_series.csv")
    stamps = pd.DatetimeIndex(pd.to_datetime(series["timestamp"], format="ISO8601"))
    power = _read_scenarios(rd, f"stress/{farm.id}/day{d}_power.csv", series["forecast"].to_numpy(float),
                            farm.capacity, cfg.seed, stamps, farm.id)
    bench = _read_scenarios(rd, f"stress/{farm.id}/day{d}_benchmark.csv",
                            series["benchmark_forecast"].to_numpy(float), farm.capacity, cfg.seed, stamps, farm.id)
    realized = series["realized_mw"].to_numpy(float)
    return DayWind(power, bench, None if np.isnan(realized).all() else realized, str(stamps[0].date()))


# size


def run_size(cfg: RunConfig, rd: RunDir, src: RunDir | None = None, method: str | None = None,
             level: int | None = None) -> None:
    """Size farm reserves and aggregate them to the policy's entities; ``src`` holds the stress outputs."""
    src = src or rd
    case = read_case(src)
    method = method or cfg.reserve.method
    value = cfg.reserve.level_value(method, level)
    mapping = _entity_map(case, cfg.policy)
    for d in range(_day_count(cfg, case, src)):
        farm_scheds = []
        for farm in case.wind_farms:
            wind = read_day_wind(cfg, src, farm, d)
            farm_scheds.append(size_reserve(method, wind.power, value, rated=farm.capacity,
                                            rho_unit=cfg.reserve.rho_unit, entity=farm.id))
        rd.write_csv(f"size/day{d}_farms.csv", reserve_frame(farm_scheds))
        entities = aggregate_reserve(farm_scheds, mapping)
        rd.write_csv(f"size/day{d}_reserve.csv", reserve_frame(entities.values()))
        log.info("[size] day %d: %s level %g, total up %.1f MW, down %.1f MW", d, method, value,
                 sum(float(s.up.sum()) for s in entities.values()),
                 sum(float(s.down.sum()) for s in entities.values()))


# scuc / rt


def day_case(cfg: RunConfig, src: RunDir, case: GridCase, d: int) -> GridCase:
    series = {}
    for farm in case.wind_farms:
        wind = read_day_wind(cfg, src, farm, d)
        forecast = wind.power.forecast_mw()
        series[farm.id] = (forecast.tolist(), (wind.realized_mw if wind.realized_mw is not None else forecast).tolist())
    return case.with_wind(series)


def run_scuc(cfg: RunConfig, rd: RunDir, src: RunDir | None = None) -> None:
    src = src or rd
    case = read_case(src)
    options = ScucOptions(cfg.solver.contingency_mode, cfg.solver.ramp_mode, cfg.penalties.relax,
                          cfg.solver.reserve_tiebreak, cfg.solver.load_reserve_extent, cfg.solver.name)
    for d in range(_day_count(cfg, case, src)):
        reserve = None
        if cfg.policy != "none":
            reserve = read_reserve_frame(rd.read_csv(f"size/day{d}_reserve.csv", dtype={"entity": str}))
        handle = build_scuc(day_case(cfg, src, case, d), reserve, cfg.policy, options)
        da = solve(handle, _limits(cfg))
        rd.write_json(f"scuc/day{d}.json", da.to_document())
        rd.write_csv(f"scuc/day{d}_schedule.csv", da.to_frame())


def run_rt(cfg: RunConfig, rd: RunDir, src: RunDir | None = None) -> None:
    src = src or rd
    case = read_case(src)
    for d in range(_day_count(cfg, case, src)):
        da = DaSolution.from_document(rd.read_json(f"scuc/day{d}.json"))
        handle = build_rt_dispatch(day_case(cfg, src, case, d), da, cfg.penalties, cfg.solver.name)
        rt = solve_rt(handle, _limits(cfg))
        rd.write_json(f"rt/day{d}.json", rt.to_document())
        rd.write_csv(f"rt/day{d}_costs.csv", rt.cost_frame())
        rd.write_csv(f"rt/day{d}_dispatch.csv", rt.dispatch_frame())


# evaluate


def run_evaluate(cfg: RunConfig, rd: RunDir, src: RunDir | None = None, method: str | None = None,
                 level: int | None = None, run_id: str | None = None) -> EvaluationReport:
    src = src or rd
    case = read_case(src)
    method = method or cfg.reserve.method
    level = level or cfg.reserve.level
    report = EvaluationReport(
        run_id=run_id or cfg.run_id(),
        config_hash=cfg.config_hash(),
        seed=cfg.seed,
        policy=cfg.policy,
        method=None if cfg.policy == "none" else method,
        level=None if cfg.policy == "none" else level,
        level_value=None if cfg.policy == "none" else cfg.reserve.level_value(method, level),
    )
    for d in range(_day_count(cfg, case, src)):
        da = DaSolution.from_document(rd.read_json(f"scuc/day{d}.json"))
        rt = RtSolution.from_document(rd.read_json(f"rt/day{d}.json"))
        cov_w, cov_b, date = _coverage(cfg, src, case, d)
        report.days.append(evaluate_day(d, da, rt, date=date, coverage_weather=cov_w, coverage_benchmark=cov_b))

    rd.write_json("report.json", report.to_document())
    rd.write_csv("report_days.csv", report.frame())
    report_md = make_report_md(report)
    rd.path("report.md").write_text(report_md + "\n")
    pdf_path = write_pdf(report_md, rd.path("report.pdf"))
    try:
        repo.insert_run(cfg.name, report, str(rd.root), report_md, pdf_path)
    except Exception as e:  # the registry is optional; a broken database must not fail the study
        log.warning("[registry] could not record run %s: %s", report.run_id, e)
    return report


def _coverage(cfg: RunConfig, src: RunDir, case: GridCase, d: int) -> tuple[float | None, float | None, str | None]:
    """Mean envelope coverage of realized power over farms, weather-driven and benchmark."""
    cov_w, cov_b, date = [], [], None
    for farm in case.wind_farms:
        wind = read_day_wind(cfg, src, farm, d)
        date = wind.date
        if wind.realized_mw is None:
            continue
        cov_w.append(envelope_coverage(*confidence_envelope(wind.power, COVERAGE_CI), wind.realized_mw))
        cov_b.append(envelope_coverage(*confidence_envelope(wind.benchmark, COVERAGE_CI), wind.realized_mw))
    if not cov_w:
        return None, None, date
    return float(np.mean(cov_w)), float(np.mean(cov_b)), date


# orchestration


def default_run_dir(cfg: RunConfig) -> Path:
    return Path(settings.out_dir) / cfg.run_id()


def run_stage(name: str, cfg: RunConfig, out: Path | str):
    rd = RunDir(out)
    rd.root.mkdir(parents=True, exist_ok=True)
    if not rd.exists("INCOMPLETE") and name != "evaluate":
        rd.begin()
    with stage(name):
        result = {
            "ingest": run_ingest,
            "fit": run_fit,
            "stress": run_stress,
            "size": run_size,
            "scuc": run_scuc,
            "rt": run_rt,
            "evaluate": run_evaluate,
        }[name](cfg, rd)
    if name == "evaluate":
        rd.finish()
    return result


def _cell(cfg: RunConfig, rd: RunDir, method: str, level: int) -> EvaluationReport:
    cell = rd.sub(f"sweep/{method}_L{level}")
    cell.root.mkdir(parents=True, exist_ok=True)
    with stage("size"):
        run_size(cfg, cell, rd, method, level)
    with stage("scuc"):
        run_scuc(cfg, cell, rd)
    with stage("rt"):
        run_rt(cfg, cell, rd)
    with stage("evaluate"):
        return run_evaluate(cfg, cell, rd, method, level, run_id=f"{cfg.run_id()}-{method}-L{level}")


def run_pipeline(cfg: RunConfig, out: Path | str | None = None) -> EvaluationReport | list[EvaluationReport]:
    """Full study; with ``reserve.sweep`` every method x level cell gets its own report."""
    rd = RunDir(out or default_run_dir(cfg)).begin()
    log.info("[pipeline] run %s -> %s", cfg.run_id(), rd.root)
    for name, fn in (("ingest", run_ingest), ("fit", run_fit), ("stress", run_stress)):
        with stage(name):
            fn(cfg, rd)

    if cfg.reserve.sweep and cfg.policy != "none":
        reports = [_cell(cfg, rd, method, level)
                   for method in LEVEL_PRESETS for level in range(1, len(LEVEL_PRESETS[method]) + 1)]
        rd.write_csv("sweep_summary.csv", pd.DataFrame([
            {"method": r.method, "level": r.level, "level_value": r.level_value, **r.totals()} for r in reports
        ]))
        rd.finish()
        return reports

    for name, fn in (("size", run_size), ("scuc", run_scuc), ("rt", run_rt)):
        with stage(name):
            fn(cfg, rd)
    with stage("evaluate"):
        report = run_evaluate(cfg, rd)
    rd.finish()
    return report
