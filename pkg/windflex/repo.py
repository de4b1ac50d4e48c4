import logging

import orjson
from sqlalchemy import delete, desc, select

from windflex import db
from windflex.db import Base, SessionLocal
from windflex.evaluation import EvaluationReport
from windflex.models import Run

log = logging.getLogger(__name__)

_SCHEMA_READY = set()


def init_db():
    # model classes must be imported so Base.metadata is populated
    from windflex import models  # noqa: F401

    engine = db.get_engine()
    if engine is None:
        return None
    Base.metadata.create_all(engine)
    _SCHEMA_READY.add(str(engine.url))
    return engine


def _ensure_tables() -> bool:
    engine = db.get_engine()
    if engine is None:
        return False
    if str(engine.url) not in _SCHEMA_READY:
        init_db()
    return True


def _row(r: Run, full: bool = False) -> dict:
    out = {
        "run_id": r.run_id,
        "created_at": r.created_at,
        "name": r.name,
        "policy": r.policy,
        "method": r.method,
        "level": r.level,
        "seed": r.seed,
        "config_hash": r.config_hash,
        "scuc_generation": r.scuc_generation,
        "rt_total": r.rt_total,
        "reserve_penalty": r.reserve_penalty,
        "raf_up": r.raf_up,
        "raf_down": r.raf_down,
        "out_dir": r.out_dir,
        "pdf_path": r.report_pdf_path,
    }
    if full:
        out["report"] = orjson.loads(r.report_json)
        out["report_md"] = r.report_md
    return out


def insert_run(name: str, report: EvaluationReport, out_dir: str, report_md: str, pdf_path: str) -> bool:
    """Record a finished run, replacing an earlier record with the same run id."""
    if not _ensure_tables():
        return False
    totals = report.totals()
    with SessionLocal() as s:
        s.execute(delete(Run).where(Run.run_id == report.run_id))
        s.add(Run(
            run_id=report.run_id,
            created_at=report.created_at,
            name=name,
            policy=report.policy,
            method=report.method,
            level=report.level,
            seed=report.seed,
            config_hash=report.config_hash,
            scuc_generation=totals["scuc_generation"],
            rt_total=totals["rt_total"],
            reserve_penalty=totals["reserve_penalty"],
            raf_up=totals["raf_up"],
            raf_down=totals["raf_down"],
            out_dir=out_dir,
            report_json=orjson.dumps(report.to_document()).decode(),
            report_md=report_md,
            report_pdf_path=pdf_path,
        ))
        s.commit()
    log.info("[registry] recorded run %s", report.run_id)
    return True


def list_runs(limit: int = 50) -> list:
    if not _ensure_tables():
        return []
    with SessionLocal() as s:
        q = select(Run).order_by(desc(Run.created_at), desc(Run.id)).limit(limit)
        rows = s.execute(q).scalars().all()
    return [_row(r) for r in rows]


def get_run(run_id: str) -> dict | None:
    if not _ensure_tables():
        return None
    with SessionLocal() as s:
        q = select(Run).where(Run.run_id == run_id).limit(1)
        r = s.execute(q).scalars().first()
    if not r:
        return None
    return _row(r, full=True)
