from datetime import datetime, timezone

import numpy as np
import pandas as pd
import pytest

from conftest import power_set
from windflex.artifacts import RunDir
from windflex.errors import DataValidationError
from windflex.evaluation import DayMetrics, EvaluationReport
from windflex.reporting import _pdf_lines, envelope_frame, make_report_md, write_pdf


def _report():
    costs = dict.fromkeys(("scuc_generation", "scuc_commitment", "scuc_objective", "reserve_penalty", "rt_generation",
                           "rt_load_shedding", "rt_wind_spillage", "rt_redispatch", "rt_total", "rt_objective"), 10.0)
    return EvaluationReport(run_id="toy-1", config_hash="abc", seed=1, policy="zonal", method="probability", level=2,
                            level_value=0.4, created_at=datetime(2026, 1, 1, tzinfo=timezone.utc),
                            days=[DayMetrics(day=0, date="2012-01-01", raf_up=0.25, **costs)])


def test_markdown_report_lists_days():
    md = make_report_md(_report())
    assert md.startswith("# Wind flexibility reserve study: toy-1")
    assert "- Policy: zonal" in md
    assert "2012-01-01" in md


def test_pdf_is_reproducible(tmp_path):
    md = make_report_md(_report())
    a = write_pdf(md, tmp_path / "a" / "r.pdf")
    b = write_pdf(md, tmp_path / "b" / "r.pdf")
    assert open(a, "rb").read() == open(b, "rb").read()


def test_envelope_frame_columns():
    rng = np.random.default_rng(0)
    ps = power_set(rng.uniform(0, 100, (50, 3)), [40.0, 50.0, 60.0])
    frame = envelope_frame(ps, realized=[41.0, 49.0, 70.0], benchmark=ps)
    assert frame["forecast_mw"].tolist() == pytest.approx([40.0, 50.0, 60.0])
    assert "weather_lower_80" in frame and "benchmark_upper_100" in frame
    assert np.all(frame["weather_lower_100"] <= frame["weather_lower_80"])


def test_run_dir_marker_and_round_trip(tmp_path):
    rd = RunDir(tmp_path / "run").begin()
    assert not rd.complete
    rd.write_json("x/doc.json", {"b": np.arange(2), "a": 0.1})
    rd.write_csv("x/t.csv", pd.DataFrame({"v": [0.1, 1 / 3]}))
    assert rd.read_json("x/doc.json") == {"a": 0.1, "b": [0, 1]}
    assert rd.read_csv("x/t.csv")["v"].tolist() == [0.1, 1 / 3]
    assert rd.path("x/doc.json").read_text().index('"a"') < rd.path("x/doc.json").read_text().index('"b"')
    rd.finish()
    assert rd.complete
    with pytest.raises(DataValidationError, match="earlier stage"):
        rd.read_json("missing.json")


def test_pdf_layout_of_markdown():
    lines = _pdf_lines("# Title\n- RT total: **12.50**\n\n## Days\n| day | RT total |\n|---|---|\n| 0 | 12.50 |")
    assert lines[0] == ("h1", "Title")
    assert lines[1] == ("text", "• RT total: 12.50")
    assert ("h2", "Days") in lines
    rows = [text for style, text in lines if style == "row"]
    assert rows == ["day  RT total", "0    12.50   "]
