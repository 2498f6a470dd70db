"""Self-correction loop: execute, assess, re-generate with feedback.

Candidates run against the embedded engine; failures come back as
feedback values carrying the engine's message verbatim. Successful runs
pass through deterministic assessment criteria and one model judgment,
and any feedback triggers a bounded re-generation loop.
"""

from __future__ import annotations

import sqlite3
import time
from dataclasses import dataclass

from .database import Database
from .errors import ExecutionTimeout, ModelError, UnparsableGeneration
from .generation import CandidateSql, PromptBundle, strip_model_sql
from .models import ModelClient
from .retrieval import CanonicalQuery
from .sqlast import normalize_sql, parse_select

PREVIEW_ROWS = 5
ROW_SANITY_BOUND = 100_000
DEFAULT_CRITERIA = ("empty_result", "all_null_column", "row_count_sanity", "model_judgment")

_SYNTAX_MARKERS = ("syntax error", "unrecognized token", "incomplete input")


@dataclass(frozen=True)
class ExecutionFeedback:
    kind: str  # syntax_error | runtime_error | assessment_failure
    message: str
    criterion: str | None = None
    rows_preview: tuple = ()


@dataclass(frozen=True)
class ExecutionResult:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def preview(self) -> tuple[tuple, ...]:
        return self.rows[:PREVIEW_ROWS]


@dataclass(frozen=True)
class CorrectionOutcome:
    final: CandidateSql
    status: str  # clean | corrected | exhausted
    rounds_used: int
    history: tuple[tuple[CandidateSql, tuple[ExecutionFeedback, ...]], ...]
    result: ExecutionResult | None = None


def execute(
    sql: str, db: Database, timeout_s: float | None = None
) -> ExecutionResult | ExecutionFeedback:
    """Run one statement; failures become feedback values, not exceptions."""
    try:
        columns, rows = db.run_select(sql, timeout_s=timeout_s)
    except ExecutionTimeout as exc:
        return ExecutionFeedback(kind="runtime_error", message=str(exc))
    except sqlite3.ProgrammingError as exc:
        raise ConnectionError(f"database handle unusable: {exc}") from exc
    except sqlite3.Error as exc:
        message = str(exc)
        kind = (
            "syntax_error"
            if any(marker in message for marker in _SYNTAX_MARKERS)
            else "runtime_error"
        )
        return ExecutionFeedback(kind=kind, message=message)
    return ExecutionResult(columns=tuple(columns), rows=tuple(tuple(r) for r in rows))


def assess(
    result: ExecutionResult,
    cq: CanonicalQuery,
    model: ModelClient,
    criteria: tuple[str, ...] = DEFAULT_CRITERIA,
) -> list[ExecutionFeedback]:
    """Check the result against deterministic criteria, then model judgment.

    Deterministic criteria run first so assessment still works with no
    model at all; a model failure degrades to those checks alone. The
    model sees only the capped preview plus aggregate facts.
    """
    feedback: list[ExecutionFeedback] = []
    if "empty_result" in criteria and not result.rows:
        feedback.append(
            ExecutionFeedback(
                kind="assessment_failure",
                message="query returned no rows",
                criterion="empty_result",
            )
        )
    if "all_null_column" in criteria and result.rows:
        for idx, name in enumerate(result.columns):
            if all(row[idx] is None for row in result.rows):
                feedback.append(
                    ExecutionFeedback(
                        kind="assessment_failure",
                        message=f"column {name} is NULL in every row",
                        criterion="all_null_column",
                        rows_preview=result.preview(),
                    )
                )
    if "row_count_sanity" in criteria and len(result.rows) > ROW_SANITY_BOUND:
        feedback.append(
            ExecutionFeedback(
                kind="assessment_failure",
                message=f"result has {len(result.rows)} rows, above the sanity bound",
                criterion="row_count_sanity",
            )
        )
    if "model_judgment" in criteria:
        prompt = (
            "Judge whether this result plausibly answers the request. Reply "
            "PASS if it does, otherwise one sentence naming the problem.\n"
            f"Request: {cq.reformulated}\n"
            f"Columns: {list(result.columns)}\n"
            f"Row count: {len(result.rows)}\n"
            f"Preview: {[list(r) for r in result.preview()]}"
        )
        try:
            verdict = model.complete(prompt, role="assess").strip()
            if verdict and verdict.splitlines()[0].strip().upper() != "PASS":
                feedback.append(
                    ExecutionFeedback(
                        kind="assessment_failure",
                        message=verdict,
                        criterion="model_judgment",
                        rows_preview=result.preview(),
                    )
                )
        except ModelError:
            pass
    return feedback


def correct(
    candidate: CandidateSql,
    feedback: list[ExecutionFeedback],
    bundle: PromptBundle,
    model: ModelClient,
) -> CandidateSql:
    """One re-generation pass from the original prompt plus feedback."""
    assert feedback, "correct requires non-empty feedback"
    messages = "\n".join(f"- [{fb.kind}] {fb.message}" for fb in feedback)
    prompt = (
        bundle.text
        + f"\n\n### Previous Attempt\n{candidate.sql}"
        + f"\n\n### Feedback\n{messages}"
        + "\n\nReply with the corrected SQL query only."
    )
    raw = model.complete(prompt, role="correct")
    sql = strip_model_sql(raw)
    try:
        parse_select(sql)
    except Exception as exc:
        raise UnparsableGeneration(f"corrected output unparsable: {exc}") from exc
    attempt = candidate.provenance[1] + 1
    return CandidateSql(sql=normalize_sql(sql), plan=candidate.plan, provenance=("correct", attempt))


def run_correction_loop(
    candidate: CandidateSql,
    cq: CanonicalQuery,
    bundle: PromptBundle,
    db: Database,
    model: ModelClient,
    max_rounds: int = 2,
    timeout_s: float | None = None,
    criteria: tuple[str, ...] = DEFAULT_CRITERIA,
    record=None,
) -> CorrectionOutcome:
    """Execute-assess-correct until feedback clears or rounds run out.

    Performs at most max_rounds + 1 executions; an unparsable correction
    burns its round without executing anything new. `record(stage,
    seconds)` reports per-round timings when given.
    """

    def gather(cand: CandidateSql):
        outcome = execute(cand.sql, db, timeout_s=timeout_s)
        if isinstance(outcome, ExecutionFeedback):
            return None, (outcome,)
        return outcome, tuple(assess(outcome, cq, model, criteria=criteria))

    result, feedback = gather(candidate)
    history = [(candidate, feedback)]
    if not feedback:
        return CorrectionOutcome(
            final=candidate, status="clean", rounds_used=0, history=tuple(history), result=result
        )
    current = candidate
    rounds_used = 0
    while rounds_used < max_rounds and feedback:
        rounds_used += 1
        round_started = time.perf_counter()
        try:
            current = correct(current, list(feedback), bundle, model)
        except UnparsableGeneration as exc:
            feedback = (
                ExecutionFeedback(kind="syntax_error", message=str(exc)),
            )
            history.append((current, feedback))
            if record is not None:
                record(f"correction_round_{rounds_used}", time.perf_counter() - round_started)
            continue
        result, feedback = gather(current)
        history.append((current, feedback))
        if record is not None:
            record(f"correction_round_{rounds_used}", time.perf_counter() - round_started)
    status = "corrected" if not feedback else "exhausted"
    return CorrectionOutcome(
        final=current,
        status=status,
        rounds_used=rounds_used,
        history=tuple(history),
        result=result if not feedback else None,
    )
