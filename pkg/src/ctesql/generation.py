"""Plan construction, pseudo-SQL augmentation, prompt assembly, generation.

The model exchanges plans as numbered plain-text lists with optional
pseudo-SQL in square brackets. The prompt is assembled in the fixed
section order of the knowledge-augmented layout and is byte-deterministic
for equal inputs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace

from . import decomposer, retrieval
from .decomposer import DecomposedExample
from .errors import ModelError, ParseError, UnparsableGeneration, UnsupportedStatement
from .knowledge import Instruction, KnowledgeSet
from .models import ModelClient
from .retrieval import CanonicalQuery, RetrievalResult
from .schema import render_schema
from .sqlast import normalize_sql, parse_select

PSEUDO_SQL_THRESHOLD = 0.2

PROMPT_HEADINGS = (
    "### Input Query",
    "### Schema Representation",
    "### Intent-specific Instructions",
    "### Example Decompositions",
    "### Reasoning Plan",
)


@dataclass(frozen=True)
class PlanStep:
    description: str
    pseudo_sql: str | None = None
    refs: tuple[str, ...] = ()


@dataclass(frozen=True)
class CoTPlan:
    steps: tuple[PlanStep, ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a plan has at least one step")


@dataclass(frozen=True)
class PromptBundle:
    sections: tuple[tuple[str, str], ...]  # (heading, body), fixed order
    plan: "CoTPlan | None" = None

    @property
    def text(self) -> str:
        return "\n\n".join(f"{heading}\n{body}" for heading, body in self.sections)


@dataclass(frozen=True)
class CandidateSql:
    sql: str
    plan: CoTPlan
    provenance: tuple[str, int]  # (model role, attempt number)


# ---------------------------------------------------------------------------
# Plan construction
# ---------------------------------------------------------------------------

_NUMBERED_STEP = re.compile(r"^\s*\d+[.)]\s+(.*\S)\s*$")
_BRACKET_TAIL = re.compile(r"^(.*?)\s*\[([^\[\]]+)\]\s*$")


def _collect_refs(description: str, rr: RetrievalResult) -> tuple[str, ...]:
    # words usable as references: retrieved table names and instruction ids
    words = set(re.findall(r"[A-Za-z_][A-Za-z0-9_]*", description))
    refs = [t.name for t in rr.pruned_schema.tables if t.name in words]
    refs.extend(ins_id for ins_id, _ in rr.instructions if ins_id in words)
    return tuple(refs)


def _parse_plan_text(raw: str, rr: RetrievalResult) -> CoTPlan | None:
    steps: list[PlanStep] = []
    for line in raw.splitlines():
        match = _NUMBERED_STEP.match(line)
        if not match:
            continue
        body = match.group(1)
        pseudo = None
        tail = _BRACKET_TAIL.match(body)
        if tail and tail.group(1):
            body, pseudo = tail.group(1).strip(), tail.group(2).strip()
        steps.append(
            PlanStep(description=body, pseudo_sql=pseudo, refs=_collect_refs(body, rr))
        )
    if not steps:
        return None
    return CoTPlan(steps=tuple(steps))


def _fallback_plan(cq: CanonicalQuery, rr: RetrievalResult) -> CoTPlan:
    description = f"answer the query directly: {cq.reformulated}"
    return CoTPlan(steps=(PlanStep(description=description, refs=_collect_refs(description, rr)),))


def build_plan(cq: CanonicalQuery, rr: RetrievalResult, model: ModelClient) -> CoTPlan:
    """Ask the model for a numbered reasoning plan.

    Output that carries no numbered lines, and any model failure, falls
    back to a single-step plan that answers the query directly.
    """
    prompt = (
        "Write a short numbered reasoning plan for answering this request "
        "with one SQL query. One step per line, numbered 1., 2., ...; you "
        "may attach a pseudo-SQL fragment in square brackets at the end of "
        f"a step.\nRequest: {cq.reformulated}\n"
        f"Schema:\n{render_schema(rr.pruned_schema)}"
    )
    try:
        raw = model.complete(prompt, role="plan")
    except ModelError:
        return _fallback_plan(cq, rr)
    return _parse_plan_text(raw, rr) or _fallback_plan(cq, rr)


def augment_with_pseudo_sql(plan: CoTPlan, examples: list[DecomposedExample]) -> CoTPlan:
    """Attach each step's best-matching example clause as pseudo-SQL.

    Never removes, reorders or rewrites steps; steps already carrying
    pseudo-SQL and steps whose best match scores below the threshold are
    left alone.
    """
    clauses: list[str] = []
    for ex in examples:
        for bundle in (*ex.cte_bundles, ex.final_bundle):
            for clause in bundle.all_strings():
                if clause not in clauses:
                    clauses.append(clause)
    if not clauses:
        return plan
    steps = []
    for step in plan.steps:
        if step.pseudo_sql is not None:
            steps.append(step)
            continue
        best, best_score = None, 0.0
        for clause in clauses:
            score = retrieval.similarity(step.description, clause)
            if score > best_score:
                best, best_score = clause, score
        if best is not None and best_score >= PSEUDO_SQL_THRESHOLD:
            steps.append(replace(step, pseudo_sql=best))
        else:
            steps.append(step)
    return CoTPlan(steps=tuple(steps))


# ---------------------------------------------------------------------------
# Prompt assembly
# ---------------------------------------------------------------------------


def _instruction_block(instructions: list[Instruction]) -> str:
    lines = []
    for i, ins in enumerate(instructions, start=1):
        lines.append(f"{i}. {ins.text}")
        if ins.sql_snippet:
            lines.append(f"   e.g. {ins.sql_snippet}")
    return "\n".join(lines)


def _plan_block(plan: CoTPlan) -> str:
    lines = []
    for i, step in enumerate(plan.steps, start=1):
        suffix = f" [{step.pseudo_sql}]" if step.pseudo_sql else ""
        lines.append(f"{i}. {step.description}{suffix}")
    return "\n".join(lines)


def assemble_prompt(
    cq: CanonicalQuery, rr: RetrievalResult, plan: CoTPlan, ks: KnowledgeSet
) -> PromptBundle:
    """Serialize the request context under the fixed section headings.

    Pure function of its inputs; empty sections carry the explicit
    "(none)" marker instead of being dropped.
    """
    schema_text = render_schema(rr.pruned_schema)
    instructions = [ks.instructions[ins_id] for ins_id, _ in rr.instructions]
    examples = [ks.examples[ex_id] for ex_id, _ in rr.examples]
    example_text = "\n".join(
        json.dumps(decomposer.example_to_json(ex), indent=4, ensure_ascii=False)
        for ex in examples
    )
    sections = (
        (PROMPT_HEADINGS[0], cq.reformulated or "(none)"),
        (PROMPT_HEADINGS[1], schema_text or "(none)"),
        (PROMPT_HEADINGS[2], _instruction_block(instructions) or "(none)"),
        (PROMPT_HEADINGS[3], example_text or "(none)"),
        (PROMPT_HEADINGS[4], _plan_block(plan) or "(none)"),
    )
    return PromptBundle(sections=sections, plan=plan)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

_FENCE = re.compile(r"```[a-zA-Z]*\n?(.*?)```", re.DOTALL)


def strip_model_sql(raw: str) -> str:
    """Drop markdown fencing and trailing semicolons from model output."""
    match = _FENCE.search(raw)
    text = match.group(1) if match else raw
    return text.strip().rstrip(";").strip()


def generate_sql(bundle: PromptBundle, model: ModelClient) -> CandidateSql:
    """Produce a parsing candidate from the assembled prompt.

    One re-ask carrying the parse error is permitted before giving up.
    """
    plan = bundle.plan or CoTPlan(steps=(PlanStep(description="answer the query directly"),))
    prompt = bundle.text + "\n\nReply with the SQL query only."
    last_error = None
    for attempt in (1, 2):
        raw = model.complete(prompt, role="generate")
        sql = strip_model_sql(raw)
        try:
            parse_select(sql)
            return CandidateSql(sql=normalize_sql(sql), plan=plan, provenance=("generate", attempt))
        except (ParseError, UnsupportedStatement) as exc:
            last_error = exc
            prompt = (
                bundle.text
                + f"\n\nYour previous reply did not parse: {exc}\n"
                + "Reply with one valid SQL SELECT query only."
            )
    raise UnparsableGeneration(f"model output unparsable after re-ask: {last_error}")
