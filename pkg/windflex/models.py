from datetime import datetime, timezone

from sqlalchemy import DateTime, Float, Index, Integer, String, Text
from sqlalchemy.orm import Mapped, mapped_column

from windflex.db import Base


def utcnow():
    return datetime.now(timezone.utc)


class Run(Base):
    __tablename__ = "runs"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    run_id: Mapped[str] = mapped_column(String(128), unique=True, index=True)
    created_at: Mapped[datetime] = mapped_column(DateTime(timezone=True), default=utcnow, index=True)

    name: Mapped[str] = mapped_column(String(64), index=True)
    policy: Mapped[str] = mapped_column(String(16))  # none/system/zonal/nodal
    method: Mapped[str | None] = mapped_column(String(16), nullable=True)  # extent/probability/risk
    level: Mapped[int | None] = mapped_column(Integer, nullable=True)
    seed: Mapped[int] = mapped_column(Integer)
    config_hash: Mapped[str] = mapped_column(String(64), index=True)

    scuc_generation: Mapped[float] = mapped_column(Float)
    rt_total: Mapped[float] = mapped_column(Float)
    reserve_penalty: Mapped[float] = mapped_column(Float)
    raf_up: Mapped[float | None] = mapped_column(Float, nullable=True)
    raf_down: Mapped[float | None] = mapped_column(Float, nullable=True)

    out_dir: Mapped[str] = mapped_column(String(512))
    report_json: Mapped[str] = mapped_column(Text)
    report_md: Mapped[str] = mapped_column(Text)
    report_pdf_path: Mapped[str] = mapped_column(String(512))


Index("idx_run_name_created", Run.name, Run.created_at)
