"""Retrieval stage: reformulation, intent, examples, instructions, schema.

Retrieval runs in a fixed order with forward conditioning: the example
stage feeds instruction scoring, and both feed schema pruning. Scoring is
lexical TF-cosine by default with a pluggable scorer behind the same
contract, and every ranking breaks ties by id so runs are repeatable.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, replace

from .decomposer import DecomposedExample
from .errors import ModelError
from .knowledge import KnowledgeSet
from .models import ModelClient
from .schema import SchemaRepresentation, render_schema

DEFAULT_TAU_INTENT = 0.35
DEFAULT_LAMBDA = 0.5
DEFAULT_K_EXAMPLES = 3
DEFAULT_K_INSTRUCTIONS = 10

_STOPWORDS = frozenset(
    """a an and are as at be been being but by can could did do does for from
    had has have he her him his i if in is it its may me might must my not of
    on or our shall she should so such that the their them these they this
    those to us was we were what which who whom whose will with would you
    your""".split()
)

_SIM_TOKEN = re.compile(r"[a-z0-9]+")
_TERM_TOKEN = re.compile(r"[a-z0-9]+(?:-[a-z0-9]+)*")


@dataclass(frozen=True)
class CanonicalQuery:
    original: str
    reformulated: str
    intent: str
    key_terms: tuple[str, ...] = ()


@dataclass(frozen=True)
class RetrievalResult:
    examples: tuple[tuple[str, float], ...]
    instructions: tuple[tuple[str, float], ...]
    pruned_schema: SchemaRepresentation


# ---------------------------------------------------------------------------
# Similarity
# ---------------------------------------------------------------------------


def _sim_tokens(text: str) -> list[str]:
    return _SIM_TOKEN.findall(text.lower())


def similarity(a: str, b: str) -> float:
    """Cosine over term-frequency vectors of normalized tokens.

    Symmetric; exactly 1.0 for equal non-empty token multisets and 0.0
    when either side has no tokens.
    """
    ta, tb = Counter(_sim_tokens(a)), Counter(_sim_tokens(b))
    if not ta or not tb:
        return 0.0
    if ta == tb:
        return 1.0
    dot = sum(v * tb[t] for t, v in ta.items() if t in tb)
    norm = math.sqrt(sum(v * v for v in ta.values())) * math.sqrt(
        sum(v * v for v in tb.values())
    )
    return min(1.0, max(0.0, dot / norm))


def key_terms(text: str) -> tuple[str, ...]:
    """Content tokens: lowercased, stopwords removed, deduplicated in order.

    Hyphenated compounds stay whole so terms like quarter-over-quarter
    survive as one unit.
    """
    seen: set[str] = set()
    out: list[str] = []
    for tok in _TERM_TOKEN.findall(text.lower()):
        if tok in _STOPWORDS or tok in seen:
            continue
        seen.add(tok)
        out.append(tok)
    return tuple(out)


# ---------------------------------------------------------------------------
# Reformulation and intent
# ---------------------------------------------------------------------------

_LABEL_CHARS = re.compile(r"[^a-z0-9_]+")


def _normalize_label(raw: str) -> str:
    label = _LABEL_CHARS.sub("_", raw.strip().lower().replace("-", "_")).strip("_")
    return label[:64]


def _centroid_similarity(nl: str, member_texts: list[str]) -> float:
    query = Counter(_sim_tokens(nl))
    if not query or not member_texts:
        return 0.0
    centroid: Counter = Counter()
    for text in member_texts:
        centroid.update(_sim_tokens(text))
    if not centroid:
        return 0.0
    dot = sum(v * centroid[t] for t, v in query.items() if t in centroid)
    norm = math.sqrt(sum(v * v for v in query.values())) * math.sqrt(
        sum(v * v for v in centroid.values())
    )
    return min(1.0, max(0.0, dot / norm))


def classify_intent(
    nl: str,
    ks: KnowledgeSet,
    model: ModelClient,
    tau_intent: float = DEFAULT_TAU_INTENT,
    scorer=similarity,
) -> str:
    """Label the query with an existing partition or a model-proposed one.

    A partition matches when its centroid or best member reaches the
    threshold; a verbatim match to any stored input_nl always wins. With
    no match the model proposes a label, and "general" covers model
    failure or empty output.
    """
    best_label, best_score = "", -1.0
    for intent in sorted(ks.partitions):
        members = [ks.examples[ex_id].input_nl for ex_id in ks.partitions[intent]]
        if not members:
            continue
        score = max(
            _centroid_similarity(nl, members),
            max(scorer(nl, text) for text in members),
        )
        if score > best_score:
            best_label, best_score = intent, score
    if best_label and best_score >= tau_intent:
        return best_label
    try:
        raw = model.complete(
            "Name the analytical intent of this request as a short snake_case "
            f"label (e.g. ranking_change, trend, comparison).\nRequest: {nl}\n"
            "Reply with the label only.",
            role="intent",
        )
    except ModelError:
        return "general"
    label = _normalize_label(raw.splitlines()[0] if raw.strip() else "")
    return label or "general"


def reformulate(
    nl: str,
    ks: KnowledgeSet,
    model: ModelClient,
    tau_intent: float = DEFAULT_TAU_INTENT,
    scorer=similarity,
) -> CanonicalQuery:
    """Rewrite the request in canonical form and attach intent and terms.

    Model failure or empty output keeps the original text verbatim; the
    intent always comes from classify_intent on the canonical text.
    """
    try:
        raw = model.complete(
            "Rewrite this analytics request as one imperative sentence with "
            "explicit metrics, filters and timeframes. Keep every concrete "
            f"term.\nRequest: {nl}\nReply with the sentence only.",
            role="reformulate",
        )
        reformulated = raw.strip() or nl
    except ModelError:
        reformulated = nl
    intent = classify_intent(reformulated, ks, model, tau_intent=tau_intent, scorer=scorer)
    return CanonicalQuery(
        original=nl,
        reformulated=reformulated,
        intent=intent,
        key_terms=key_terms(reformulated),
    )


# ---------------------------------------------------------------------------
# Example and instruction retrieval
# ---------------------------------------------------------------------------


def retrieve_examples(
    cq: CanonicalQuery,
    ks: KnowledgeSet,
    k: int = DEFAULT_K_EXAMPLES,
    scorer=similarity,
) -> tuple[tuple[str, float], ...]:
    """Rank the intent partition by similarity to the canonical query.

    Falls back to all examples when the partition is empty; never returns
    an outside example while the partition has members. Scores take the
    better of the reformulated and original texts so a stored example is
    a guaranteed 1.0 match for its own question however the model
    rephrases it.
    """
    candidates = ks.partitions.get(cq.intent) or tuple(sorted(ks.examples))

    def score(ex_id: str) -> float:
        nl = ks.examples[ex_id].input_nl
        return max(scorer(cq.reformulated, nl), scorer(cq.original, nl))

    scored = sorted(
        ((ex_id, score(ex_id)) for ex_id in candidates),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return tuple(scored[:k])


def example_context(ex: DecomposedExample) -> str:
    return " ".join((ex.input_nl, *ex.complex_terms))


def retrieve_instructions(
    cq: CanonicalQuery,
    chosen_examples: list[DecomposedExample],
    ks: KnowledgeSet,
    k: int = DEFAULT_K_INSTRUCTIONS,
    lam: float = DEFAULT_LAMBDA,
    scorer=similarity,
) -> tuple[tuple[str, float], ...]:
    """Blend query-instruction and example-instruction similarity.

    score = lam * sim(query, text) + (1 - lam) * max over examples of
    sim(example context, text); the max over no examples is 0. Candidates
    are instructions tagged with the query intent or tagged with none.
    """
    candidates = [
        ins
        for ins in ks.instructions.values()
        if not ins.intents or cq.intent in ins.intents
    ]
    contexts = [example_context(ex) for ex in chosen_examples]
    scored = []
    for ins in candidates:
        query_part = scorer(cq.reformulated, ins.text)
        example_part = max((scorer(ctx, ins.text) for ctx in contexts), default=0.0)
        scored.append((ins.id, lam * query_part + (1.0 - lam) * example_part))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return tuple(scored[:k])


# ---------------------------------------------------------------------------
# Schema pruning
# ---------------------------------------------------------------------------


def prune_schema(
    cq: CanonicalQuery,
    chosen_examples: list[DecomposedExample],
    schema: SchemaRepresentation,
    model: ModelClient,
) -> SchemaRepresentation:
    """Drop schema elements the model marks irrelevant to the query.

    Tables named by the chosen examples are never pruned, foreign keys
    lose any edge with a pruned endpoint, and every failure mode (model
    error, bad JSON, everything marked irrelevant) degrades to identity.
    """
    protected = {t for ex in chosen_examples for t in ex.features.tables}
    prompt = (
        "Mark schema elements irrelevant to the request. Reply with JSON "
        '{"irrelevant_tables": [...], "irrelevant_columns": ["TABLE.COLUMN", ...]}.'
        f"\nRequest: {cq.reformulated}\nExample tables in use: {sorted(protected)}\n"
        f"Schema:\n{render_schema(schema)}"
    )
    try:
        raw = model.complete(prompt, role="prune")
        doc = json.loads(raw)
        irr_tables = set(doc.get("irrelevant_tables", ()))
        irr_columns = set(doc.get("irrelevant_columns", ()))
    except (ModelError, json.JSONDecodeError, AttributeError):
        return schema

    tables = []
    for tab in schema.tables:
        if tab.name in protected:
            tables.append(tab)
            continue
        if tab.name in irr_tables:
            continue
        cols = tuple(
            c for c in tab.columns if f"{tab.name}.{c.name}" not in irr_columns
        )
        if not cols:
            continue
        pk = tab.primary_key if any(c.name == tab.primary_key for c in cols) else None
        tables.append(replace(tab, columns=cols, primary_key=pk))
    if not tables:
        return schema
    surviving = {t.name: {c.name for c in t.columns} for t in tables}
    fks = tuple(
        fk
        for fk in schema.foreign_keys
        if all(side in surviving for side in fk.tables)
        and all(pair[i] in surviving[fk.tables[i]] for pair in fk.keys for i in range(2))
    )
    return SchemaRepresentation(tables=tuple(tables), foreign_keys=fks)
