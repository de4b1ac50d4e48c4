from pathlib import Path

import numpy as np
import pandas as pd
from reportlab.lib.pagesizes import LETTER
from reportlab.pdfgen import canvas

from windflex.evaluation import EvaluationReport
from windflex.stress_scenarios import ScenarioSet, confidence_envelope

ENVELOPE_LEVELS = (0.6, 0.8, 0.995, 1.0)


def _fmt(x, digits: int = 2) -> str:
    if x is None:
        return "undefined"
    return f"{x:,.{digits}f}"


def make_report_md(report: EvaluationReport) -> str:
    totals = report.totals()

    lines = []
    lines.append(f"# Wind flexibility reserve study: {report.run_id}")
    lines.append(f"- Created: {report.created_at.isoformat()}")
    lines.append(f"- Config hash: {report.config_hash}")
    lines.append(f"- Seed: {report.seed}")
    lines.append(f"- Policy: {report.policy}")
    if report.method:
        lines.append(f"- Reserve method: {report.method} (level {report.level}, value {report.level_value})")
    lines.append("")
    lines.append("## Costs ($)")
    lines.append(f"- SCUC generation: {_fmt(totals['scuc_generation'])}")
    lines.append(f"- SCUC commitment (no-load, start-up, shut-down): {_fmt(totals['scuc_commitment'])}")
    lines.append(f"- Reserve violation penalty: {_fmt(totals['reserve_penalty'])}"
                 f" ({_fmt(totals['reserve_shortfall_mw'], 3)} MW short)")
    lines.append(f"- RT generation: {_fmt(totals['rt_generation'])}")
    lines.append(f"- RT load shedding: {_fmt(totals['rt_load_shedding'])}")
    lines.append(f"- RT wind spillage: {_fmt(totals['rt_wind_spillage'])}")
    lines.append(f"- RT redispatch: {_fmt(totals['rt_redispatch'])}")
    lines.append(f"- RT total: **{_fmt(totals['rt_total'])}**")
    lines.append("")
    lines.append("## Reserve activation")
    lines.append(f"- RAF up: {_fmt(totals['raf_up'], 4)}")
    lines.append(f"- RAF down: {_fmt(totals['raf_down'], 4)}")
    lines.append(f"- RAF total: {_fmt(totals['raf_total'], 4)}")
    if totals["coverage_weather"] is not None:
        lines.append("")
        lines.append("## Envelope coverage of realized power (80% CI)")
        lines.append(f"- Weather-driven: {_fmt(totals['coverage_weather'], 3)}")
        lines.append(f"- Weather-ignorant benchmark: {_fmt(totals['coverage_benchmark'], 3)}")
    lines.append("")
    lines.append("## Days")
    lines.append("| day | date | SCUC gen | RT gen | shed | spill | redispatch | RT total | RAF up | RAF down |")
    lines.append("|---|---|---|---|---|---|---|---|---|---|")
    for d in report.days:
        lines.append(
            f"| {d.day} | {d.date or '-'} | {_fmt(d.scuc_generation)} | {_fmt(d.rt_generation)} "
            f"| {_fmt(d.rt_load_shedding)} | {_fmt(d.rt_wind_spillage)} | {_fmt(d.rt_redispatch)} "
            f"| {_fmt(d.rt_total)} | {_fmt(d.raf_up, 4)} | {_fmt(d.raf_down, 4)} |"
        )

    return "\n".join(lines)


# (font, size, leading) per markdown line kind
PDF_STYLES = {
    "h1": ("Helvetica-Bold", 14, 20),
    "h2": ("Helvetica-Bold", 11, 16),
    "row": ("Courier", 7, 10),
    "text": ("Helvetica", 9, 13),
}


def _pdf_lines(report_md: str):
    """Markdown lines as (style, text); table rules are dropped and cells padded to column widths."""
    rows, out = [], []

    def flush():
        if rows:
            widths = [max(len(r[i]) for r in rows if i < len(r)) for i in range(max(map(len, rows)))]
            out.extend(("row", "  ".join(c.ljust(w) for c, w in zip(r, widths))) for r in rows)
            rows.clear()

    for line in report_md.splitlines():
        if line.startswith("|"):
            cells = [c.strip() for c in line.strip("|").split("|")]
            if not all(set(c) <= set("-:") for c in cells):
                rows.append(cells)
            continue
        flush()
        text = line.replace("**", "")
        if text.startswith("## "):
            out.append(("h2", text[3:]))
        elif text.startswith("# "):
            out.append(("h1", text[2:]))
        elif text.startswith("- "):
            out.append(("text", "• " + text[2:]))
        else:
            out.append(("text", text))
    flush()
    return out


def write_pdf(report_md: str, pdf_path: str | Path) -> str:
    """Render the markdown report; ``invariant`` keeps the bytes identical across runs."""
    pdf_path = str(pdf_path)
    Path(pdf_path).parent.mkdir(parents=True, exist_ok=True)
    c = canvas.Canvas(pdf_path, pagesize=LETTER, invariant=1)
    top = LETTER[1] - 50
    y = top
    for style, text in _pdf_lines(report_md):
        font, size, leading = PDF_STYLES[style]
        if y < 60:
            c.showPage()
            y = top
        c.setFont(font, size)
        c.drawString(50, y, text[:140])
        y -= leading
    c.save()
    return pdf_path


def envelope_frame(power: ScenarioSet, realized=None, benchmark: ScenarioSet | None = None,
                   levels=ENVELOPE_LEVELS) -> pd.DataFrame:
    """Plot data: forecast, realized and per-CI envelopes in MW, one row per period."""
    frame = pd.DataFrame({"period": np.arange(power.periods), "forecast_mw": power.forecast_mw()})
    if power.timestamps is not None:
        frame.insert(1, "timestamp", power.timestamps.astype(str))
    if realized is not None:
        frame["realized_mw"] = np.asarray(realized, dtype=float)
    for name, sset in (("weather", power), ("benchmark", benchmark)):
        if sset is None:
            continue
        for ci in levels:
            lo, hi = confidence_envelope(sset, ci)
            tag = f"{ci * 100:g}"
            frame[f"{name}_lower_{tag}"] = lo
            frame[f"{name}_upper_{tag}"] = hi
    return frame
