"""HTTP surface over the pipeline: the /v1 JSON API.

Endpoints mirror the CLI one-to-one so both produce identical payloads.
Query handling runs under the configured per-request budget; exceeding it
returns an in-band timeout status rather than a transport error.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import pipeline
from .adaptation import Feedback
from .errors import InvalidCorrection, UnknownRequest
from .pipeline import Engine


class QueryBody(BaseModel):
    nl: str


class FeedbackBody(BaseModel):
    request_id: str
    verdict: str
    corrected_sql: str | None = None
    note: str | None = None


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="ctesql", docs_url=None, redoc_url=None)
    executor = ThreadPoolExecutor(max_workers=8)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "knowledge_version": engine.ks.version}

    @app.post("/v1/query")
    def query(body: QueryBody):
        if not body.nl.strip():
            return JSONResponse({"error": "nl must be non-empty"}, status_code=422)
        future = executor.submit(pipeline.run_query, engine, body.nl)
        try:
            response = future.result(timeout=engine.config.request_timeout_s)
        except FutureTimeout:
            return {
                "status": "timeout",
                "error": f"request exceeded {engine.config.request_timeout_s:.0f}s budget",
            }
        return response.to_json()

    @app.post("/v1/feedback")
    def feedback(body: FeedbackBody):
        if body.verdict not in ("accept", "reject"):
            return JSONResponse({"error": "verdict must be accept or reject"}, status_code=422)
        fb = Feedback(
            request_id=body.request_id,
            verdict=body.verdict,
            corrected_sql=body.corrected_sql,
            note=body.note,
        )
        try:
            version = pipeline.submit_feedback(engine, fb)
        except UnknownRequest as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        except InvalidCorrection as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        return {"knowledge_version": version}

    @app.get("/v1/requests/{request_id}")
    def get_request(request_id: str):
        try:
            record = engine.load_request(request_id)
        except UnknownRequest as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        return record.to_json()

    @app.get("/v1/knowledge/summary")
    def summary():
        return pipeline.knowledge_summary(engine)

    return app


def serve(engine: Engine, host: str = "127.0.0.1", port: int = 8080) -> None:
    import uvicorn

    uvicorn.run(create_app(engine), host=host, port=port, log_level="warning")
