from datetime import datetime, timezone

import pytest
from fastapi.testclient import TestClient

from windflex import repo
from windflex.evaluation import DayMetrics, EvaluationReport
from windflex.main import app
from windflex.reporting import make_report_md, write_pdf


def _report(run_id="toy-abc-s42", rt_total=1234.5):
    costs = dict.fromkeys(("scuc_generation", "scuc_commitment", "scuc_objective", "reserve_penalty", "rt_generation",
                           "rt_load_shedding", "rt_wind_spillage", "rt_redispatch", "rt_objective"), 0.0)
    day = DayMetrics(day=0, rt_total=rt_total, scheduled_up=10.0, deployed_up=4.0, **costs)
    return EvaluationReport(run_id=run_id, config_hash="abc", seed=42, policy="system", method="risk", level=3,
                            level_value=0.2, created_at=datetime(2026, 3, 1, tzinfo=timezone.utc), days=[day])


def _record(tmp_path, report, with_pdf=True):
    md = make_report_md(report)
    pdf = write_pdf(md, tmp_path / f"{report.run_id}.pdf") if with_pdf else str(tmp_path / "gone.pdf")
    assert repo.insert_run("toy", report, str(tmp_path), md, pdf)
    return pdf


@pytest.fixture
def client(tmp_db):
    with TestClient(app) as c:
        yield c


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_list_and_get_run(client, tmp_path):
    _record(tmp_path, _report())
    runs = client.get("/api/runs").json()["runs"]
    assert [r["run_id"] for r in runs] == ["toy-abc-s42"]
    assert runs[0]["raf_up"] == pytest.approx(0.4)

    body = client.get("/api/runs/toy-abc-s42").json()
    assert body["rt_total"] == pytest.approx(1234.5)
    assert body["report"]["format"] == "windflex.evaluation"
    assert body["report_md"].startswith("# Wind flexibility reserve study")


def test_rerecording_replaces_the_row(client, tmp_path):
    _record(tmp_path, _report(rt_total=1.0))
    _record(tmp_path, _report(rt_total=2.0))
    runs = client.get("/api/runs").json()["runs"]
    assert len(runs) == 1
    assert runs[0]["rt_total"] == pytest.approx(2.0)


def test_missing_run_is_404(client):
    resp = client.get("/api/runs/nope")
    assert resp.status_code == 404
    assert resp.json() == {"error": "not_found"}
    assert client.get("/api/runs/nope/pdf").status_code == 404


def test_pdf_download(client, tmp_path):
    _record(tmp_path, _report())
    resp = client.get("/api/runs/toy-abc-s42/pdf")
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "application/pdf"
    assert resp.content.startswith(b"%PDF")


def test_pdf_missing(client, tmp_path):
    _record(tmp_path, _report(), with_pdf=False)
    resp = client.get("/api/runs/toy-abc-s42/pdf")
    assert resp.status_code == 404
    assert resp.json()["error"] == "pdf_missing"


def test_list_limit_is_validated(client):
    assert client.get("/api/runs?limit=0").status_code == 422


def test_without_registry_everything_is_empty():
    with TestClient(app) as c:
        assert c.get("/api/runs").json() == {"runs": []}
        assert c.get("/api/runs/anything").status_code == 404
    assert repo.insert_run("toy", _report(), "/tmp", "", "") is False
