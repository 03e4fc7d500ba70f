"""HTTP review interface over the scan ledger.

Read-focused JSON endpoints for the dashboard, plus reminder flagging.
No GET endpoint mutates the ledger; staleness is evaluated against the
request time as a pure view.  Authentication is intentionally absent:
bind to loopback (the default) and put a reverse proxy in front for
anything beyond single-host use.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import __version__
from .ledger import (
    LedgerStore,
    SqliteLedger,
    UnregisteredMachineError,
    ValidationError,
    parse_time_bound,
    utc_now,
)
from .serialize import machine_dict, record_dict, reminder_dict, summary_dict

ENV_FRONTEND = "PHITRACK_FRONTEND_DIST"

_PLACEHOLDER = """<!doctype html>
<html><head><title>phitrack</title></head>
<body>
<h1>phitrack review API</h1>
<p>The dashboard has not been built. Endpoints:</p>
<ul>
<li><code>GET /api/machines?stale=</code></li>
<li><code>GET /api/files?mac=&amp;format=&amp;status=&amp;scanned_after=&amp;scanned_before=&amp;version=&amp;limit=&amp;offset=</code></li>
<li><code>GET /api/files/history?mac=&amp;path=</code></li>
<li><code>GET /api/reminders</code> / <code>POST /api/reminders</code></li>
<li><code>GET /api/summary</code></li>
</ul>
</body></html>
"""


class Machine(BaseModel):
    username: str
    mac: str
    paths: list[str]
    formats: list[str]
    scan_frequency: int
    last_scanned: Optional[str]
    stale: bool


class FileRecordOut(BaseModel):
    record_id: str
    mac: str
    filepath: str
    format: str
    file_hash: str
    meta_hash: str
    pixel_hash: str
    version: int
    status: str
    last_modified: str
    last_scanned: str


class Reminder(BaseModel):
    id: str
    username: str
    mac: str
    created_at: str
    note: str
    delivered: bool


class ReminderCreate(BaseModel):
    username: str
    mac: str
    note: str = ""


class Summary(BaseModel):
    machines: int
    stale_machines: int
    files_latest: int
    files_deleted: int
    last_scan_time: Optional[str]


# Where `npm run build` puts the dashboard in a source checkout.
DEFAULT_DIST = str(Path(__file__).resolve().parents[2] / "frontend" / "dist")


def _frontend_dist(explicit: Optional[str]) -> Optional[str]:
    candidates = [explicit, os.environ.get(ENV_FRONTEND), DEFAULT_DIST]
    for candidate in candidates:
        if candidate and os.path.isdir(candidate):
            return candidate
    return None


def create_app(
    store: Optional[LedgerStore] = None,
    store_path: Optional[str] = None,
    frontend_dir: Optional[str] = None,
) -> FastAPI:
    """Build the application around an open store (tests) or a db path (serve)."""
    if store is None:
        if store_path is None:
            raise ValueError("create_app needs a store or a store_path")
        store = SqliteLedger(store_path)

    app = FastAPI(title="phitrack review API", version=__version__)

    @app.exception_handler(ValidationError)
    async def _bad_value(request: Request, exc: ValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc), "field": exc.field})

    @app.exception_handler(UnregisteredMachineError)
    async def _unknown_machine(request: Request, exc: UnregisteredMachineError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _malformed(request: Request, exc: RequestValidationError):
        errors = exc.errors()
        field = str(errors[0]["loc"][-1]) if errors else ""
        return JSONResponse(
            status_code=400,
            content={"detail": f"invalid value for {field}", "field": field},
        )

    @app.get("/api/machines", response_model=list[Machine])
    def get_machines(stale: Optional[bool] = Query(default=None)):
        return [machine_dict(m) for m in store.list_machines(now=utc_now(), stale=stale)]

    @app.get("/api/files", response_model=list[FileRecordOut])
    def get_files(
        response: Response,
        mac: Optional[str] = None,
        format: Optional[str] = None,
        status: Optional[str] = None,
        scanned_after: Optional[str] = None,
        scanned_before: Optional[str] = None,
        version: Optional[int] = None,
        limit: int = Query(default=100, ge=1, le=1000),
        offset: int = Query(default=0, ge=0),
    ):
        filters = dict(
            mac=mac,
            format=format,
            status=status,
            scanned_after=parse_time_bound("scanned_after", scanned_after) if scanned_after else None,
            scanned_before=parse_time_bound("scanned_before", scanned_before) if scanned_before else None,
            version=version,
        )
        response.headers["X-Total-Count"] = str(store.count_files(**filters))
        return [record_dict(r) for r in store.query_files(**filters, limit=limit, offset=offset)]

    @app.get("/api/files/history", response_model=list[FileRecordOut])
    def get_history(mac: str, path: str):
        return [record_dict(r) for r in store.file_history(mac, path)]

    @app.post("/api/reminders", response_model=Reminder, status_code=201)
    def post_reminder(body: ReminderCreate):
        return reminder_dict(store.add_reminder(body.username, body.mac, body.note, utc_now()))

    @app.get("/api/reminders", response_model=list[Reminder])
    def get_reminders():
        return [reminder_dict(r) for r in store.list_reminders()]

    @app.get("/api/summary", response_model=Summary)
    def get_summary():
        return summary_dict(store.summary(utc_now()))

    dist = _frontend_dist(frontend_dir)
    if dist is not None:
        app.mount("/", StaticFiles(directory=dist, html=True), name="dashboard")
    else:
        @app.get("/", response_class=HTMLResponse, include_in_schema=False)
        def index():
            return _PLACEHOLDER

    return app
