"""HTTP service exposing campaigns to scripts and the dashboard.

One service owns one data directory (guarded by a lockfile): every campaign
is a JSON file there, rewritten atomically after each mutation, with an
append-only event log for audit. Suggestions can take minutes (fit + anneal),
so POST .../suggest returns 202 with a job id and the result is polled;
while a job is in flight the campaign rejects other mutations with 423.
Mutations accept an Idempotency-Key header and replay the original response
on retry. All mutations run on a copy of the campaign that is swapped in
and persisted only on success, so readers always see a consistent snapshot
and a crash mid-fit leaves the stored state untouched.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import Depends, FastAPI, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse, RedirectResponse
from fastapi.staticfiles import StaticFiles

from .campaign import (
    Campaign,
    _aug_config_from,
    _fit_config_from,
    _now,
    _sa_config_from,
    init_campaign,
)
from .encoding import FactorSchema
from .errors import (
    BitsMismatch,
    FormoptError,
    LengthMismatch,
    NonFiniteAin,
    NoSeedData,
    ParseError,
    Terminated,
    VersionMismatch,
    WrongState,
)


@dataclass
class ServiceConfig:
    data_dir: Path
    host: str = "127.0.0.1"
    port: int = 8600
    max_concurrent_fits: int = 2
    token: str | None = None
    ui_dir: Path | None = None

    @classmethod
    def from_env(cls, **overrides) -> "ServiceConfig":
        """Environment variables fill in anything not passed explicitly."""
        env = os.environ
        values = {
            "data_dir": Path(env.get("FORMOPT_DATA_DIR", "formopt-data")),
            "host": env.get("FORMOPT_HOST", "127.0.0.1"),
            "port": int(env.get("FORMOPT_PORT", "8600")),
            "max_concurrent_fits": int(env.get("FORMOPT_MAX_FITS", "2")),
            "token": env.get("FORMOPT_TOKEN"),
            "ui_dir": Path(env["FORMOPT_UI_DIR"]) if env.get("FORMOPT_UI_DIR") else None,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class StoreLocked(FormoptError):
    """Another service instance owns the data directory."""


class Unauthorized(FormoptError):
    """Missing or wrong bearer token."""


class NotFound(FormoptError):
    """Unknown campaign id."""


class CampaignStore:
    """File-backed campaign registry: one JSON per campaign, atomic rewrite,
    append-only event log, exclusive lockfile per directory."""

    def __init__(self, data_dir: Path, lock: bool = True):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._lock_path = self.data_dir / ".lock"
        self._lock_fd = None
        if lock:
            try:
                self._lock_fd = os.open(
                    self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY
                )
                os.write(self._lock_fd, str(os.getpid()).encode())
            except FileExistsError:
                raise StoreLocked(
                    f"{self._lock_path} exists; another service owns this directory"
                ) from None
        self._mutex = threading.RLock()
        self._campaigns: dict[str, Campaign] = {}
        for path in sorted(self.data_dir.glob("*.json")):
            c = Campaign.from_json(path.read_text())
            self._campaigns[c.id] = c

    def close(self):
        if self._lock_fd is not None:
            os.close(self._lock_fd)
            self._lock_path.unlink(missing_ok=True)
            self._lock_fd = None

    def _path(self, campaign_id: str) -> Path:
        return self.data_dir / f"{campaign_id}.json"

    def ids(self) -> list[str]:
        with self._mutex:
            return sorted(self._campaigns)

    def get(self, campaign_id: str) -> Campaign | None:
        with self._mutex:
            return self._campaigns.get(campaign_id)

    def put(self, campaign: Campaign, event: str):
        """Swap in a new snapshot and persist it atomically."""
        with self._mutex:
            text = campaign.to_json()
            tmp = self._path(campaign.id).with_suffix(".json.tmp")
            tmp.write_text(text)
            os.replace(tmp, self._path(campaign.id))
            self._campaigns[campaign.id] = campaign
            with open(self.data_dir / "events.jsonl", "a") as fh:
                fh.write(json.dumps(
                    {"ts": _now(), "event": event, "campaign": campaign.id,
                     "state": campaign.state}
                ) + "\n")


def _error_body(code: str, message: str, detail: str = "") -> dict:
    return {"code": code, "message": message, "detail": detail}


_STATUS_FOR = [
    ((Unauthorized,), 401),
    ((NotFound,), 404),
    ((WrongState, BitsMismatch, Terminated), 409),
    ((LengthMismatch, NonFiniteAin, ParseError, VersionMismatch, NoSeedData), 400),
]


def _http_status(exc: FormoptError) -> int:
    for kinds, status in _STATUS_FOR:
        if isinstance(exc, kinds):
            return status
    return 400


def create_app(config: ServiceConfig, store: CampaignStore | None = None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        app.state.executor.shutdown(wait=True)
        app.state.store.close()

    app = FastAPI(title="formopt service", version="1", lifespan=lifespan)
    store = store or CampaignStore(config.data_dir)
    app.state.store = store
    app.state.config = config
    app.state.jobs = {}  # campaign id -> {"job_id", "status", "error"}
    app.state.locks_guard = threading.Lock()
    app.state.camp_locks = {}  # campaign id -> mutation lock
    app.state.idempotent = {}  # Idempotency-Key -> (status, body)
    app.state.executor = ThreadPoolExecutor(max_workers=config.max_concurrent_fits)

    def camp_lock(campaign_id: str) -> threading.Lock:
        with app.state.locks_guard:
            return app.state.camp_locks.setdefault(campaign_id, threading.Lock())

    def set_job(campaign_id: str, **fields):
        with app.state.locks_guard:
            app.state.jobs[campaign_id] = fields

    def get_job(campaign_id: str) -> dict:
        with app.state.locks_guard:
            return dict(app.state.jobs.get(campaign_id) or {})

    def busy(campaign_id: str) -> bool:
        return get_job(campaign_id).get("status") == "running"

    def check_auth(request: Request):
        if config.token:
            if request.headers.get("authorization") != f"Bearer {config.token}":
                raise Unauthorized("missing or bad bearer token")

    auth = Depends(check_auth)

    @app.exception_handler(FormoptError)
    def handle_formopt(_request, exc: FormoptError):
        return JSONResponse(
            _error_body(type(exc).__name__, str(exc)), _http_status(exc)
        )

    def get_or_404(campaign_id: str) -> Campaign:
        c = store.get(campaign_id)
        if c is None:
            raise NotFound(f"no campaign {campaign_id!r}")
        return c

    def idempotent(request: Request):
        key = request.headers.get("idempotency-key")
        return key, (app.state.idempotent.get(key) if key else None)

    def remember(key: str | None, status: int, body: dict):
        if key is not None:
            app.state.idempotent[key] = (status, body)

    def busy_response(campaign_id: str) -> JSONResponse:
        return JSONResponse(
            _error_body("Busy", f"campaign {campaign_id!r} has a fit in progress"),
            423,
        )

    # -- endpoints ---------------------------------------------------------------

    @app.get("/health")
    def health():
        return {"status": "ok", "campaigns": len(store.ids())}

    @app.post("/campaigns", status_code=201, dependencies=[auth])
    async def create_campaign(request: Request):
        key, cached = idempotent(request)
        if cached:
            return JSONResponse(cached[1], cached[0])
        body = await request.json()
        if not isinstance(body, dict) or "schema" not in body:
            raise ParseError("body must be a JSON object with a 'schema' field")
        campaign_id = body.get("id") or uuid.uuid4().hex[:12]
        with camp_lock(campaign_id):
            if store.get(campaign_id) is not None:
                raise WrongState(f"campaign {campaign_id!r} already exists")
            schema = FactorSchema.from_dict(body["schema"])
            try:
                seeds = [(s["bits"], s["ain"]) for s in body.get("seeds", [])]
            except (KeyError, TypeError) as exc:
                raise ParseError(f"each seed needs 'bits' and 'ain': {exc}") from exc
            c = init_campaign(
                schema,
                fit_config=_fit_config_from(body["fit_config"])
                if body.get("fit_config") else None,
                sa_config=_sa_config_from(body["sa_config"])
                if body.get("sa_config") else None,
                aug_config=_aug_config_from(body["aug_config"])
                if body.get("aug_config") else None,
                seed_observations=seeds,
                rng_seed=int(body.get("rng_seed", 0)),
                id=campaign_id,
            )
            store.put(c, "created")
        summary = c.summary()
        remember(key, 201, summary)
        return JSONResponse(summary, 201)

    @app.get("/campaigns", dependencies=[auth])
    def list_campaigns():
        return {"campaigns": [store.get(i).summary() for i in store.ids()]}

    @app.get("/campaigns/{campaign_id}", dependencies=[auth])
    def get_campaign(campaign_id: str):
        return get_or_404(campaign_id).to_dict()

    @app.post("/campaigns/{campaign_id}/suggest", status_code=202, dependencies=[auth])
    def post_suggest(campaign_id: str, request: Request):
        key, cached = idempotent(request)
        if cached:
            return JSONResponse(cached[1], cached[0])
        with camp_lock(campaign_id):
            c = get_or_404(campaign_id)
            if busy(campaign_id):
                return busy_response(campaign_id)
            if c.state == "terminated":
                raise Terminated(f"campaign {campaign_id!r} has terminated")
            if c.state != "ready":
                raise WrongState(
                    f"campaign {campaign_id!r} is awaiting a result; record it first"
                )
            job_id = uuid.uuid4().hex[:12]
            set_job(campaign_id, job_id=job_id, status="running", error=None)

        def work():
            with camp_lock(campaign_id):
                snapshot = Campaign.from_json(store.get(campaign_id).to_json())
                try:
                    snapshot.suggest_next()
                    store.put(snapshot, "suggested")
                    status, error = "done", None
                except Terminated as exc:
                    store.put(snapshot, "terminated")
                    status, error = "terminated", str(exc)
                except Exception as exc:  # surfaced via polling
                    status, error = "failed", f"{type(exc).__name__}: {exc}"
                set_job(campaign_id, job_id=job_id, status=status, error=error)

        app.state.executor.submit(work)
        body = {"job_id": job_id, "poll": f"/campaigns/{campaign_id}/suggestion"}
        remember(key, 202, body)
        return JSONResponse(body, 202)

    @app.get("/campaigns/{campaign_id}/suggestion", dependencies=[auth])
    def get_suggestion(campaign_id: str):
        c = get_or_404(campaign_id)
        job = get_job(campaign_id)
        if job.get("status") == "running":
            return {"status": "running", "job_id": job["job_id"]}
        if job.get("status") == "failed":
            return {"status": "failed", "error": job["error"]}
        if c.state == "awaiting_result" and c.pending is not None:
            return {"status": "done", "suggestion": c.pending.to_dict()}
        if c.state == "terminated":
            return {"status": "terminated"}
        return {"status": "none"}

    @app.post("/campaigns/{campaign_id}/results", dependencies=[auth])
    async def post_result(campaign_id: str, request: Request):
        key, cached = idempotent(request)
        if cached:
            return JSONResponse(cached[1], cached[0])
        body = await request.json()
        if not isinstance(body, dict) or "bits" not in body or "ain" not in body:
            raise ParseError("body must carry 'bits' and 'ain'")
        with camp_lock(campaign_id):
            c = get_or_404(campaign_id)
            if busy(campaign_id):
                return busy_response(campaign_id)
            snapshot = Campaign.from_json(c.to_json())
            snapshot.record_result(
                str(body["bits"]), body["ain"],
                out_of_band=bool(body.get("out_of_band")),
            )
            store.put(snapshot, "recorded")
        summary = snapshot.summary()
        remember(key, 200, summary)
        return JSONResponse(summary, 200)

    @app.get("/campaigns/{campaign_id}/trace", dependencies=[auth])
    def get_trace(campaign_id: str):
        c = get_or_404(campaign_id)
        return {"entries": [e.to_dict() for e in c.log]}

    @app.get("/campaigns/{campaign_id}/metrics", dependencies=[auth])
    def get_metrics(campaign_id: str):
        return get_or_404(campaign_id).metrics_series()

    @app.get("/campaigns/{campaign_id}/export", dependencies=[auth])
    def get_export(campaign_id: str):
        c = get_or_404(campaign_id)
        return PlainTextResponse(
            c.export_log_csv(),
            media_type="text/csv",
            headers={
                "content-disposition": f'attachment; filename="{campaign_id}-trace.csv"'
            },
        )

    if config.ui_dir and Path(config.ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

        @app.get("/", include_in_schema=False)
        def index() -> Response:
            return RedirectResponse("/ui/")

    return app


def run(config: ServiceConfig):  # pragma: no cover - thin uvicorn wrapper
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
