"""REST and event-stream endpoints over a running monitor.

Every route except /health requires a bearer token.  Authentication is
enforced before any handler body runs; the audit counters on
``app.state`` exist so tests can prove a rejected request never reached
application logic.  The event stream also accepts the token as a query
parameter because the browser EventSource API cannot set headers.
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass, field

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from ..errors import UnknownStationError
from .events import sse_stream

TOKEN_ENV = "TROLLEYWATCH_TOKEN"


@dataclass
class ApiConfig:
    tokens: tuple[str, ...]
    heartbeat_s: float = 15.0
    cors_origins: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.tokens or any(not t for t in self.tokens):
            raise ValueError("at least one non-empty token is required")


@dataclass
class AuditCounters:
    auth_rejected: int = 0
    handler_calls: dict = field(default_factory=dict)

    def entered(self, handler: str) -> None:
        self.handler_calls[handler] = self.handler_calls.get(handler, 0) + 1

    def total_handler_calls(self) -> int:
        return sum(self.handler_calls.values())


class ReplenishRequest(BaseModel):
    station_id: str
    qty: int


class AckRequest(BaseModel):
    alert_id: str
    operator: str = "operator"


def _token_ok(config: ApiConfig, presented: str | None) -> bool:
    if presented is None:
        return False
    raw = presented.encode()
    # Check every configured token; no early exit on mismatch.
    ok = False
    for token in config.tokens:
        ok |= hmac.compare_digest(token.encode(), raw)
    return ok


def _bearer(request: Request) -> str | None:
    header = request.headers.get("authorization")
    if header is None or not header.startswith("Bearer "):
        return None
    return header[len("Bearer "):]


def _window_params(start: float | None, end: float | None
                   ) -> tuple[float, float] | None:
    if start is None and end is None:
        return None
    if start is None or end is None:
        raise HTTPException(status_code=400,
                            detail="window needs both start and end")
    if end < start:
        raise HTTPException(status_code=400,
                            detail="window end before start")
    return (start, end)


def create_app(runtime, config: ApiConfig) -> FastAPI:
    app = FastAPI(title="trolleywatch", docs_url=None, redoc_url=None,
                  openapi_url=None)
    audit = AuditCounters()
    app.state.audit = audit
    app.state.runtime = runtime

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware, allow_origins=list(config.cors_origins),
            allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"detail": "malformed request"})

    def _reject() -> HTTPException:
        audit.auth_rejected += 1
        return HTTPException(status_code=401, detail="invalid or missing token",
                             headers={"WWW-Authenticate": "Bearer"})

    def require_token(request: Request) -> None:
        if not _token_ok(config, _bearer(request)):
            raise _reject()

    # ---------- open endpoints ----------

    @app.get("/health")
    def health():
        return {"status": "ok", "t": runtime.clock, "depot": runtime.depot}

    # ---------- authenticated REST ----------

    @app.get("/stations", dependencies=[Depends(require_token)])
    def stations():
        audit.entered("stations")
        return {"t": runtime.clock, "depot": runtime.depot,
                "stations": runtime.list_stations()}

    @app.get("/stations/{station_id}/history",
             dependencies=[Depends(require_token)])
    def station_history(station_id: str,
                        start: float | None = Query(default=None),
                        end: float | None = Query(default=None),
                        limit: int | None = Query(default=None, ge=1)):
        audit.entered("station_history")
        window = _window_params(start, end)
        try:
            records = runtime.station_history(station_id, window=window,
                                              limit=limit)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown station {station_id!r}")
        return {"station_id": station_id, "records": records}

    @app.get("/analytics", dependencies=[Depends(require_token)])
    def analytics(start: float | None = Query(default=None),
                  end: float | None = Query(default=None)):
        audit.entered("analytics")
        return runtime.analytics_document(window=_window_params(start, end))

    @app.post("/replenish", dependencies=[Depends(require_token)])
    def replenish(body: ReplenishRequest):
        audit.entered("replenish")
        try:
            receipt = runtime.request_replenishment(body.station_id, body.qty)
        except UnknownStationError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if receipt["accepted"] == 0:
            raise HTTPException(status_code=409, detail={
                "reason": "depot_empty", "receipt": receipt})
        return receipt

    @app.post("/ack", dependencies=[Depends(require_token)])
    def ack(body: AckRequest):
        audit.entered("ack")
        try:
            return runtime.acknowledge(body.alert_id, body.operator)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown alert {body.alert_id!r}")

    # ---------- event stream ----------

    @app.get("/events")
    def events(request: Request,
               since: int | None = Query(default=None, ge=0),
               token: str | None = Query(default=None),
               max_events: int | None = Query(default=None, ge=1),
               idle_timeout_s: float | None = Query(default=None, gt=0)):
        if not (_token_ok(config, _bearer(request)) or _token_ok(config, token)):
            raise _reject()
        audit.entered("events")
        if since is None:
            resume = request.headers.get("last-event-id")
            if resume is not None and resume.isdigit():
                since = int(resume)
            else:
                since = runtime.broker.latest_seq
        gen = sse_stream(runtime.broker, since, heartbeat_s=config.heartbeat_s,
                         max_events=max_events, idle_timeout_s=idle_timeout_s)
        return StreamingResponse(gen, media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    return app
