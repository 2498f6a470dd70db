"""Feedback-driven adaptation of the knowledge set.

Accepted queries and user corrections are promoted to examples under the
request's intent; rejections and execution errors land in append-only
journals, and recurring correction patterns are distilled into new
instructions. All updates are additive: nothing ever removes an existing
example or instruction.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from difflib import SequenceMatcher
from pathlib import Path

from . import decomposer, knowledge
from .correction import ExecutionFeedback
from .errors import (
    DuplicateExample,
    InvalidCorrection,
    ModelError,
    ParseError,
    UnsupportedStatement,
)
from .knowledge import Instruction, KnowledgeSet
from .models import ModelClient
from .sqlast import render_tokens, tokenize

N_REJ_DEFAULT = 3
_NGRAM_SIZES = (4, 3, 2)


@dataclass(frozen=True)
class Feedback:
    request_id: str
    verdict: str  # accept | reject
    corrected_sql: str | None = None
    note: str | None = None
    source: str = "user"  # user | system


@dataclass
class RequestRecord:
    """Persisted context of one inference, resolvable by later feedback."""

    request_id: str
    nl: str
    reformulated: str
    intent: str
    example_ids: list[str] = field(default_factory=list)
    instruction_ids: list[str] = field(default_factory=list)
    sql: str = ""
    status: str = ""
    knowledge_version: int = 0
    created_at: str = ""

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "RequestRecord":
        return cls(**{k: doc[k] for k in cls.__dataclass_fields__ if k in doc})


class Journal:
    """Append-only newline-delimited JSON log."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, record: dict) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def entries(self) -> list[dict]:
        if not self.path.exists():
            return []
        return [json.loads(line) for line in self.path.read_text().splitlines() if line.strip()]


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# Feedback ingestion
# ---------------------------------------------------------------------------


def _promote(ks: KnowledgeSet, sql: str, nl: str, intent: str, model) -> KnowledgeSet:
    example = decomposer.build_example(sql, nl_hint=nl, model=model)
    try:
        return knowledge.add_example(ks, example, intent)
    except DuplicateExample:
        # the query is already knowledge under this intent; nothing to add
        return ks


def ingest_feedback(
    fb: Feedback,
    ctx: RequestRecord,
    ks: KnowledgeSet,
    model: ModelClient,
    rejection_log: Journal | None = None,
) -> KnowledgeSet:
    """Fold one verdict into the knowledge set.

    Accept promotes the final SQL as an example annotated with the
    original request; reject with a correction promotes the corrected
    query instead and logs the pair; a bare reject is logged only.
    """
    if fb.verdict == "accept":
        try:
            return _promote(ks, ctx.sql, ctx.nl, ctx.intent, model)
        except (ParseError, UnsupportedStatement) as exc:
            # failed requests carry no promotable SQL
            raise InvalidCorrection(f"accepted SQL does not parse: {exc}") from exc
    if fb.verdict != "reject":
        raise ValueError(f"unknown verdict: {fb.verdict}")
    if fb.corrected_sql is not None:
        try:
            corrected = decomposer.reformat_to_cte(fb.corrected_sql)
        except (ParseError, UnsupportedStatement) as exc:
            raise InvalidCorrection(f"corrected SQL does not parse: {exc}") from exc
        ks = _promote(ks, corrected, ctx.nl, ctx.intent, model)
    if rejection_log is not None:
        rejection_log.append(
            {
                "request_id": fb.request_id,
                "original_sql": ctx.sql,
                "corrected_sql": fb.corrected_sql,
                "note": fb.note,
                "timestamp": utc_now(),
            }
        )
    return ks


# ---------------------------------------------------------------------------
# Instruction derivation
# ---------------------------------------------------------------------------


def _inserted_ngrams(original: str, corrected: str) -> set[str]:
    """Token n-grams the correction inserted, rendered canonically."""
    try:
        orig = [t.value for t in tokenize(original)]
        corr_tokens = tokenize(corrected)
    except ParseError:
        return set()
    corr = [t.value for t in corr_tokens]
    grams: set[str] = set()
    matcher = SequenceMatcher(None, orig, corr, autojunk=False)
    for tag, _, _, j1, j2 in matcher.get_opcodes():
        if tag not in ("insert", "replace"):
            continue
        run = corr_tokens[j1:j2]
        for size in _NGRAM_SIZES:
            for start in range(0, len(run) - size + 1):
                window = run[start : start + size]
                if all(tok.kind == "op" for tok in window):
                    continue
                grams.add(render_tokens(list(window)))
    return grams


def shared_correction_pattern(
    rejections: list[tuple[str, str]], n_rej: int = N_REJ_DEFAULT
) -> str | None:
    """The dominant inserted pattern shared by at least n_rej corrections."""
    counts: dict[str, int] = {}
    for original, corrected in rejections:
        for gram in _inserted_ngrams(original, corrected):
            counts[gram] = counts.get(gram, 0) + 1
    shared = [(count, gram) for gram, count in counts.items() if count >= n_rej]
    if not shared:
        return None
    shared.sort(key=lambda pair: (-pair[0], -len(pair[1].split()), pair[1]))
    return shared[0][1]


def derive_instruction(
    rejections: list[tuple[str, str]],
    model: ModelClient,
    n_rej: int = N_REJ_DEFAULT,
) -> Instruction | None:
    """Distill repeated corrections into one adaptation instruction.

    Needs at least n_rej rejections sharing an inserted-token pattern;
    the model phrases the guideline and any model failure yields nothing.
    """
    if len(rejections) < n_rej:
        return None
    pattern = shared_correction_pattern(rejections, n_rej=n_rej)
    if pattern is None:
        return None
    samples = "\n".join(
        f"- wrong: {orig}\n  fixed: {corr}" for orig, corr in rejections[:n_rej]
    )
    prompt = (
        "Several generated queries needed the same correction. Phrase one "
        "short generation guideline (a single sentence) that would have "
        f"prevented it.\nInserted pattern: {pattern}\nCorrections:\n{samples}\n"
        "Reply with the guideline only."
    )
    try:
        text = model.complete(prompt, role="derive").strip()
    except ModelError:
        return None
    if not text:
        return None
    digest = hashlib.sha256(pattern.encode()).hexdigest()[:8]
    return Instruction(
        id=f"adapt_{digest}",
        text=text,
        sql_snippet=pattern,
        intents=(),
        source="adaptation",
    )


def record_execution_error(
    request_id: str,
    feedback: ExecutionFeedback,
    store: Journal,
    version: int = 0,
) -> None:
    """Append one execution error to the durable journal."""
    store.append(
        {
            "request_id": request_id,
            "version": version,
            "kind": feedback.kind,
            "message": feedback.message,
            "timestamp": utc_now(),
        }
    )
