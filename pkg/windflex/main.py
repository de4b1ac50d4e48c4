import logging
import os
from contextlib import asynccontextmanager

from fastapi import FastAPI, Query
from fastapi.responses import FileResponse, JSONResponse

from windflex import __version__
from windflex.repo import get_run, init_db, list_runs

log = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    if init_db() is None:
        log.warning("[startup] no run registry configured (WINDFLEX_DATABASE_URL is empty)")
    yield


app = FastAPI(title="windflex run registry", version=__version__, lifespan=lifespan)


@app.get("/health")
def health():
    return {"status": "ok"}


@app.get("/api/runs")
def api_runs(limit: int = Query(50, ge=1, le=500)):
    return {"runs": list_runs(limit=limit)}


@app.get("/api/runs/{run_id}")
def api_run(run_id: str):
    run = get_run(run_id)
    if not run:
        return JSONResponse({"error": "not_found"}, status_code=404)
    return run


@app.get("/api/runs/{run_id}/pdf")
def api_run_pdf(run_id: str):
    run = get_run(run_id)
    if not run:
        return JSONResponse({"error": "not_found"}, status_code=404)
    path = run["pdf_path"]
    if not path or not os.path.exists(path):
        return JSONResponse({"error": "pdf_missing", "expected_path": path}, status_code=404)
    filename = f"{run_id}.pdf"
    headers = {"Content-Disposition": f'attachment; filename="{filename}"'}
    return FileResponse(path, media_type="application/pdf", filename=filename, headers=headers)
