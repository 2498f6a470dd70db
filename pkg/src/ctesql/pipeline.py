"""End-to-end orchestration: preprocess, query, feedback.

The engine holds the immutable knowledge-set version, the database handle
and the model provider. run_query executes the fixed stage order
(reformulate, retrieve examples, retrieve instructions, prune schema,
plan, generate, correction loop), records per-stage timings, persists the
request context for later feedback, and returns a JSON-ready response.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path

from . import adaptation, correction, generation, knowledge, retrieval
from .adaptation import Feedback, Journal, RequestRecord
from .config import PipelineConfig
from .database import Database
from .errors import ConfigError, UnknownRequest, UnparsableGeneration
from .models import provider_from_settings
from .retrieval import RetrievalResult
from .sqlast import split_statements


@dataclass
class QueryResponse:
    request_id: str
    nl: str
    reformulated: str
    intent: str
    sql: str
    plan: list[dict]
    retrieval: dict  # {"examples": [[id, score]..], "instructions": [[id, score]..]}
    status: str  # clean | corrected | exhausted | failed
    rounds_used: int
    columns: list[str]
    preview: list[list]
    history: list[dict]
    timings: list[dict]  # [{stage, seconds, degraded}]
    model_calls: int
    knowledge_version: int
    error: str | None = None

    def to_json(self) -> dict:
        return asdict(self)


class Engine:
    """Loaded pipeline state; one engine serves many requests."""

    def __init__(self, config: PipelineConfig, provider=None):
        config.validate()
        self.config = config
        self.db = Database(config.database, timeout_s=config.exec_timeout_s)
        self.provider = provider if provider is not None else provider_from_settings(config.model)
        self.knowledge_dir = Path(config.knowledge_dir)
        self.requests_dir = self.knowledge_dir / "requests"
        self.error_journal = Journal(self.knowledge_dir / "errors.ndjson")
        self.rejection_log = Journal(self.knowledge_dir / "rejections.ndjson")
        self._write_lock = threading.Lock()
        if (self.knowledge_dir / "manifest.json").exists():
            self.ks = knowledge.load(self.knowledge_dir)
        else:
            self.ks = knowledge.KnowledgeSet()

    def close(self) -> None:
        self.db.close()

    def _store_knowledge(self, ks: knowledge.KnowledgeSet) -> None:
        knowledge.persist(ks, self.knowledge_dir)
        self.ks = ks

    def _store_request(self, record: RequestRecord) -> None:
        self.requests_dir.mkdir(parents=True, exist_ok=True)
        path = self.requests_dir / f"{record.request_id}.json"
        path.write_text(json.dumps(record.to_json(), indent=2, ensure_ascii=False) + "\n")

    def load_request(self, request_id: str) -> RequestRecord:
        path = self.requests_dir / f"{request_id}.json"
        if not path.exists():
            raise UnknownRequest(f"no stored context for request {request_id}")
        return RequestRecord.from_json(json.loads(path.read_text()))


# ---------------------------------------------------------------------------
# Preprocess
# ---------------------------------------------------------------------------


def _gather_log_queries(logs_dir: str | Path | None) -> list[str]:
    if logs_dir is None:
        return []
    root = Path(logs_dir)
    paths = [root] if root.is_file() else sorted(root.glob("*.sql"))
    queries: list[str] = []
    for path in paths:
        queries.extend(split_statements(path.read_text()))
    return queries


def _gather_doc_files(docs_dir: str | Path | None) -> list[Path]:
    if docs_dir is None:
        return []
    root = Path(docs_dir)
    if root.is_file():
        return [root]
    return sorted(p for p in root.iterdir() if p.suffix in (".json", ".txt", ".md"))


def run_preprocess(engine: Engine, logs_dir=None, docs_dir=None) -> dict:
    """Bootstrap the knowledge set from logs and documents, then persist.

    Empty inputs leave an existing set untouched; they are fatal only
    when no set exists yet.
    """
    logs = _gather_log_queries(logs_dir)
    docs = _gather_doc_files(docs_dir)
    model = engine.provider.for_request()
    ks, report = knowledge.bootstrap(logs, engine.db, docs, model)
    usable = report.examples_added + report.instructions_added
    with engine._write_lock:
        existing = (engine.knowledge_dir / "manifest.json").exists()
        if usable == 0 and existing:
            current = engine.ks
            return {
                "examples": 0,
                "instructions": 0,
                "tables": len(current.schema.tables),
                "skipped": list(report.skipped),
                "version": current.version,
            }
        if usable == 0 and not existing and not ks.schema.tables:
            raise ConfigError("preprocess found no usable inputs and no existing knowledge set")
        engine._store_knowledge(ks)
    return {
        "examples": report.examples_added,
        "instructions": report.instructions_added,
        "tables": len(ks.schema.tables),
        "skipped": list(report.skipped),
        "version": ks.version,
    }


# ---------------------------------------------------------------------------
# Query
# ---------------------------------------------------------------------------


def _failed_response(
    request_id: str, nl: str, cq, plan_doc, retrieval_doc, timings, model, version, error
) -> QueryResponse:
    return QueryResponse(
        request_id=request_id,
        nl=nl,
        reformulated=cq.reformulated,
        intent=cq.intent,
        sql="",
        plan=plan_doc,
        retrieval=retrieval_doc,
        status="failed",
        rounds_used=0,
        columns=[],
        preview=[],
        history=[],
        timings=timings,
        model_calls=model.call_count,
        knowledge_version=version,
        error=error,
    )


def run_query(engine: Engine, nl: str) -> QueryResponse:
    """One full inference pass over the current knowledge-set version."""
    config = engine.config
    ks = engine.ks
    model = engine.provider.for_request()
    request_id = uuid.uuid4().hex[:12]
    timings: list[dict] = []

    def timed(stage, fn, *args, **kwargs):
        errors_before = len(model.errors)
        started = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            # a stage that raises still consumed time; keep its entry
            timings.append(
                {
                    "stage": stage,
                    "seconds": round(time.perf_counter() - started, 6),
                    "degraded": len(model.errors) > errors_before,
                }
            )

    cq = timed(
        "reformulate", retrieval.reformulate, nl, ks, model, tau_intent=config.tau_intent
    )
    examples_ranked = timed(
        "retrieve_examples", retrieval.retrieve_examples, cq, ks, k=config.k_examples
    )
    chosen = [ks.examples[ex_id] for ex_id, _ in examples_ranked]
    instructions_ranked = timed(
        "retrieve_instructions",
        retrieval.retrieve_instructions,
        cq,
        chosen,
        ks,
        k=config.k_instructions,
        lam=config.lam,
    )
    pruned = timed("prune_schema", retrieval.prune_schema, cq, chosen, ks.schema, model)
    rr = RetrievalResult(
        examples=examples_ranked, instructions=instructions_ranked, pruned_schema=pruned
    )
    plan = timed("plan", generation.build_plan, cq, rr, model)
    plan = generation.augment_with_pseudo_sql(plan, chosen)
    bundle = generation.assemble_prompt(cq, rr, plan, ks)
    plan_doc = [asdict(step) for step in plan.steps]
    retrieval_doc = {
        "examples": [[ex_id, score] for ex_id, score in examples_ranked],
        "instructions": [[ins_id, score] for ins_id, score in instructions_ranked],
    }

    try:
        candidate = timed("generate", generation.generate_sql, bundle, model)
    except UnparsableGeneration as exc:
        response = _failed_response(
            request_id, nl, cq, plan_doc, retrieval_doc, timings, model, ks.version, str(exc)
        )
        engine._store_request(_record_of(response, ks.version))
        return response

    def record_round(stage: str, seconds: float) -> None:
        timings.append({"stage": stage, "seconds": round(seconds, 6), "degraded": False})

    started = time.perf_counter()
    outcome = correction.run_correction_loop(
        candidate,
        cq,
        bundle,
        engine.db,
        model,
        max_rounds=config.max_rounds,
        timeout_s=config.exec_timeout_s,
        record=record_round,
    )
    timings.append(
        {
            "stage": "correction",
            "seconds": round(time.perf_counter() - started, 6),
            "degraded": False,
        }
    )
    for cand, feedback_list in outcome.history:
        for fb in feedback_list:
            if fb.kind in ("syntax_error", "runtime_error"):
                adaptation.record_execution_error(
                    request_id, fb, engine.error_journal, version=ks.version
                )

    history_doc = [
        {
            "sql": cand.sql,
            "feedback": [
                {"kind": fb.kind, "message": fb.message, "criterion": fb.criterion}
                for fb in feedback_list
            ],
        }
        for cand, feedback_list in outcome.history
    ]
    result = outcome.result
    response = QueryResponse(
        request_id=request_id,
        nl=nl,
        reformulated=cq.reformulated,
        intent=cq.intent,
        sql=outcome.final.sql,
        plan=plan_doc,
        retrieval=retrieval_doc,
        status=outcome.status,
        rounds_used=outcome.rounds_used,
        columns=list(result.columns) if result else [],
        preview=[list(row) for row in result.preview()] if result else [],
        history=history_doc,
        timings=timings,
        model_calls=model.call_count,
        knowledge_version=ks.version,
    )
    engine._store_request(_record_of(response, ks.version))
    return response


def _record_of(response: QueryResponse, version: int) -> RequestRecord:
    return RequestRecord(
        request_id=response.request_id,
        nl=response.nl,
        reformulated=response.reformulated,
        intent=response.intent,
        example_ids=[ex_id for ex_id, _ in response.retrieval["examples"]],
        instruction_ids=[ins_id for ins_id, _ in response.retrieval["instructions"]],
        sql=response.sql,
        status=response.status,
        knowledge_version=version,
        created_at=adaptation.utc_now(),
    )


# ---------------------------------------------------------------------------
# Feedback
# ---------------------------------------------------------------------------


def submit_feedback(engine: Engine, fb: Feedback) -> int:
    """Apply one verdict and return the resulting knowledge-set version."""
    ctx = engine.load_request(fb.request_id)
    model = engine.provider.for_request()
    with engine._write_lock:
        ks = adaptation.ingest_feedback(
            fb, ctx, engine.ks, model, rejection_log=engine.rejection_log
        )
        if fb.verdict == "reject" and fb.corrected_sql is not None:
            pairs = [
                (entry["original_sql"], entry["corrected_sql"])
                for entry in engine.rejection_log.entries()
                if entry.get("corrected_sql")
            ]
            instr = adaptation.derive_instruction(pairs, model)
            if instr is not None and instr.id not in ks.instructions:
                ks = knowledge.add_instruction(ks, instr)
        if ks is not engine.ks:
            engine._store_knowledge(ks)
    return engine.ks.version


def knowledge_summary(engine: Engine) -> dict:
    ks = engine.ks
    return {
        "version": ks.version,
        "examples": len(ks.examples),
        "instructions": len(ks.instructions),
        "tables": [t.name for t in ks.schema.tables],
        "partitions": {intent: len(ids) for intent, ids in sorted(ks.partitions.items())},
    }
