import argparse
import logging
import sys
from pathlib import Path

from windflex.config import load_run_config, settings
from windflex.errors import WindflexError

log = logging.getLogger("windflex")

STAGE_COMMANDS = ("ingest", "fit", "stress", "size", "scuc", "rt", "evaluate")


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="run configuration JSON")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="run directory (default: WINDFLEX_OUT_DIR/<run id>)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="windflex", description="Weather-driven wind flexibility reserve studies")
    ap.add_argument("--log-level", default=settings.log_level)
    sub = ap.add_subparsers(dest="cmd", required=True)

    for name, text in (
        ("ingest", "validate inputs and copy them into the run directory"),
        ("fit", "fit the transition model, feature coupling and benchmark"),
        ("stress", "generate stressed weather and power scenarios"),
        ("size", "size flexibility reserve requirements"),
        ("scuc", "solve the day-ahead unit commitment"),
        ("rt", "solve the real-time dispatch"),
        ("evaluate", "compute costs and activation factors, write reports"),
        ("pipeline", "run every stage end to end"),
    ):
        _add_run_args(sub.add_parser(name, help=text))

    p = sub.add_parser("simulate", help="write synthetic weather CSVs")
    p.add_argument("--out", required=True)
    p.add_argument("--days", type=int, default=60)
    p.add_argument("--forecast-days", type=int, default=1)
    p.add_argument("--seed", type=int, default=7)

    p = sub.add_parser("serve", help="serve the run registry API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return ap


def _run(args) -> int:
    if args.cmd == "simulate":
        from windflex.simulator import write_synthetic_inputs

        paths = write_synthetic_inputs(args.out, args.days, args.forecast_days, args.seed)
        for name, path in paths.items():
            print(f"{name}: {path}")
        return 0

    if args.cmd == "serve":
        import uvicorn

        uvicorn.run("windflex.main:app", host=args.host, port=args.port)
        return 0

    from windflex.pipeline import default_run_dir, run_pipeline, run_stage

    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    out = Path(args.out) if args.out else default_run_dir(cfg)

    if args.cmd == "pipeline":
        result = run_pipeline(cfg, out)
        reports = result if isinstance(result, list) else [result]
        for r in reports:
            t = r.totals()
            print(f"{r.run_id}: rt_total={t['rt_total']:.2f} raf_up={t['raf_up']} raf_down={t['raf_down']}")
        print(f"artifacts: {out}")
        return 0

    run_stage(args.cmd, cfg, out)
    print(f"{args.cmd}: {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.log_level)
    try:
        return _run(args)
    except WindflexError as e:
        log.error("%s", e)
        conflict = getattr(getattr(e, "cause", e), "conflict", None)
        if conflict:
            log.error("conflicting constraints: %s", ", ".join(conflict))
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
