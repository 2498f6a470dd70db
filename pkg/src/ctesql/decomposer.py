"""CTE-based query sketching and hierarchical clause decomposition.

A query is first rewritten so every derived table in a FROM clause becomes
a named WITH binding (the sketch), then split per binding into clause
bundles: SELECT/calc items, FROM/JOIN items, WHERE conjuncts, GROUP BY
keys, ORDER keys and LIMIT clauses. Bundles invert back into executable
SQL via recompose, and examples carry a natural-language annotation layer
on top of the sketch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from . import sqlast
from .errors import InvalidExample, IrrecomposableSketch, ModelError
from .sqlast import (
    AndExpr,
    DerivedTable,
    Expr,
    JoinClause,
    ParenExpr,
    SelectStmt,
    TableRef,
    Token,
    normalize_sql,
    parse_select,
    render_tokens,
)

BUNDLE_JSON_KEYS = {
    "selects_calcs": "SELECTs/CALCs",
    "joins": "JOINs",
    "wheres": "WHEREs",
    "group_bys": "GROUP_BYs",
    "orders": "ORDERs",
    "limits": "LIMITs",
}


@dataclass(frozen=True)
class ClauseBundle:
    """Per-subquery clause lists, normalized and deduplicated."""

    selects_calcs: tuple[str, ...] = ()
    joins: tuple[str, ...] = ()
    wheres: tuple[str, ...] = ()
    group_bys: tuple[str, ...] = ()
    orders: tuple[str, ...] = ()
    limits: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, list[str]]:
        return {json_key: list(getattr(self, attr)) for attr, json_key in BUNDLE_JSON_KEYS.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "ClauseBundle":
        kwargs = {}
        for attr, json_key in BUNDLE_JSON_KEYS.items():
            kwargs[attr] = tuple(data.get(json_key, ()))
        return cls(**kwargs)

    def all_strings(self) -> list[str]:
        out: list[str] = []
        for attr in BUNDLE_JSON_KEYS:
            out.extend(getattr(self, attr))
        return out


@dataclass(frozen=True)
class QuerySketch:
    """Ordered CTE bundles plus the final bundle of a CTE-form query."""

    ctes: tuple[tuple[str, ClauseBundle], ...]
    final: ClauseBundle
    source_sql: str


@dataclass(frozen=True)
class ExampleFeatures:
    tables: tuple[str, ...]
    cte_count: int
    cte_desc: tuple[str, ...]


@dataclass(frozen=True)
class DecomposedExample:
    input_nl: str
    complex_terms: tuple[str, ...]
    features: ExampleFeatures
    cte_bundles: tuple[ClauseBundle, ...]
    final_bundle: ClauseBundle
    full_sql_query: str

    def validate(self) -> None:
        feats = self.features
        if feats.cte_count != len(self.cte_bundles) or feats.cte_count != len(feats.cte_desc):
            raise InvalidExample("cte_count disagrees with bundle or description count")
        try:
            stmt = parse_select(self.full_sql_query)
        except Exception as exc:
            raise InvalidExample(f"full_sql_query does not parse: {exc}") from exc
        referenced = set(stmt.table_names())
        for table in feats.tables:
            if table not in referenced:
                raise InvalidExample(f"table {table} not referenced by full_sql_query")
        normalized = normalize_sql(self.full_sql_query)
        for bundle in (*self.cte_bundles, self.final_bundle):
            for text in bundle.all_strings():
                if not text:
                    raise InvalidExample("empty bundle string")
                if normalize_sql(text) not in normalized:
                    raise InvalidExample(f"bundle string not contained in query: {text!r}")


# ---------------------------------------------------------------------------
# reformat_to_cte
# ---------------------------------------------------------------------------


class _Reformatter:
    """Rewrites one statement into flat CTE-sketch form, token-level."""

    def __init__(self, stmt: SelectStmt):
        self.stmt = stmt
        self.tokens = stmt.tokens
        self.bindings: list[tuple[str, list[Token]]] = []
        self.taken = {tok.value for tok in self.tokens if tok.kind == "word"}
        self._counter = 0

    def run(self) -> str:
        main = self._rewrite_select(self.stmt, {})
        out: list[Token] = []
        if self.bindings:
            out.append(Token("word", "WITH"))
            for idx, (name, body) in enumerate(self.bindings):
                if idx:
                    out.append(Token("op", ","))
                out.append(Token("word", name))
                out.append(Token("word", "AS"))
                out.append(Token("op", "("))
                out.extend(body)
                out.append(Token("op", ")"))
        out.extend(main)
        return render_tokens(out)

    def _fresh_name(self) -> str:
        while True:
            self._counter += 1
            name = f"CTE_{self._counter}"
            if name not in self.taken:
                self.taken.add(name)
                return name

    def _unique_cte_name(self, name: str) -> str:
        if name not in {n for n, _ in self.bindings}:
            return name
        k = 2
        while f"{name}_{k}" in self.taken:
            k += 1
        renamed = f"{name}_{k}"
        self.taken.add(renamed)
        return renamed

    def _rewrite_select(self, stmt: SelectStmt, renames: dict[str, str]) -> list[Token]:
        """Emit tokens for stmt's body; its CTE bindings go to self.bindings."""
        env = dict(renames)
        for cte in stmt.ctes:
            body = self._rewrite_select(cte.select, env)
            emitted = self._unique_cte_name(cte.name)
            if emitted != cte.name:
                env[cte.name] = emitted
            self.bindings.append((emitted, body))
        out: list[Token] = []
        for idx, core in enumerate(stmt.cores):
            if idx:
                out.extend(Token("word", w) for w in stmt.core_ops[idx - 1].split())
            out.extend(self._rewrite_core(core, env))
        if stmt.order_by:
            out.append(Token("word", "ORDER"))
            out.append(Token("word", "BY"))
            for i, key in enumerate(stmt.order_by):
                if i:
                    out.append(Token("op", ","))
                out.extend(self._expr_tokens(key, env))
        if stmt.limit is not None:
            out.extend(self._expr_tokens(stmt.limit, env))
        return out

    def _rewrite_core(self, core, env: dict[str, str]) -> list[Token]:
        out = [Token("word", "SELECT")]
        if core.distinct:
            out.append(Token("word", core.distinct))
        for i, item in enumerate(core.items):
            if i:
                out.append(Token("op", ","))
            out.extend(self._expr_tokens(item, env))
        if core.from_first is not None:
            out.append(Token("word", "FROM"))
            out.extend(self._from_item_tokens(core.from_first, env))
            for join in core.joins:
                out.extend(self._join_tokens(join, env))
        if core.where is not None:
            out.append(Token("word", "WHERE"))
            out.extend(self._expr_tokens(core.where, env))
        if core.group_by:
            out.append(Token("word", "GROUP"))
            out.append(Token("word", "BY"))
            for i, expr in enumerate(core.group_by):
                if i:
                    out.append(Token("op", ","))
                out.extend(self._expr_tokens(expr, env))
        if core.having is not None:
            out.append(Token("word", "HAVING"))
            out.extend(self._expr_tokens(core.having, env))
        return out

    def _join_tokens(self, join: JoinClause, env: dict[str, str]) -> list[Token]:
        kws = _canonical_join_kws(join.kws)
        out = [Token("word", w) for w in kws]
        out.extend(self._from_item_tokens(join.right, env))
        if join.on is not None:
            out.append(Token("word", "ON"))
            out.extend(self._expr_tokens(join.on, env))
        elif join.using is not None:
            out.append(Token("word", "USING"))
            out.append(Token("op", "("))
            for i, col in enumerate(join.using):
                if i:
                    out.append(Token("op", ","))
                out.append(Token("word", col))
            out.append(Token("op", ")"))
        return out

    def _from_item_tokens(self, item, env: dict[str, str]) -> list[Token]:
        if isinstance(item, TableRef):
            name = env.get(item.name, item.name)
            out = [Token("word", name)]
            if item.alias:
                out.append(Token("word", item.alias))
            return out
        assert isinstance(item, DerivedTable)
        body = self._rewrite_select(item.select, env)
        name = self._fresh_name()
        self.bindings.append((name, body))
        out = [Token("word", name)]
        if item.alias and self._alias_is_referenced(item.alias):
            out.append(Token("word", item.alias))
        return out

    def _alias_is_referenced(self, alias: str) -> bool:
        # Conservative whole-statement scan for `alias.` qualifier usage.
        toks = self.tokens
        for i, tok in enumerate(toks[:-1]):
            if (
                tok.kind == "word"
                and tok.value == alias
                and toks[i + 1].kind == "op"
                and toks[i + 1].value == "."
            ):
                return True
        return False

    def _expr_tokens(self, node, env: dict[str, str]) -> list[Token]:
        span = list(self.tokens[node.start : node.end])
        if not env:
            return span
        # FROM items are rewritten structurally, so inside expression spans
        # only qualifier positions (name followed by ".") need renaming
        out: list[Token] = []
        for i, tok in enumerate(span):
            if (
                tok.kind == "word"
                and tok.value in env
                and i + 1 < len(span)
                and span[i + 1] == Token("op", ".")
            ):
                out.append(Token("word", env[tok.value]))
            else:
                out.append(tok)
        return out


def _canonical_join_kws(kws: list[str]) -> list[str]:
    if kws == [","]:
        return ["CROSS", "JOIN"]
    words = [w for w in kws if w not in {"INNER", "OUTER"}]
    if words == ["JOIN"] or not words:
        return ["JOIN"]
    return words


def reformat_to_cte(sql: str) -> str:
    """Rewrite a SELECT so every FROM-clause derived table is a WITH binding.

    Output is normalized text; already-sketch-form input only gets
    normalization. Correlated and scalar subqueries inside expressions are
    left in place since hoisting them is not semantics-preserving.
    """
    stmt = parse_select(sql)
    return _Reformatter(stmt).run()


# ---------------------------------------------------------------------------
# decompose
# ---------------------------------------------------------------------------


def _conjuncts(stmt: SelectStmt, expr: Expr) -> list[str]:
    """Flatten a predicate into top-level AND conjuncts, parens stripped."""
    if isinstance(expr, ParenExpr):
        return _conjuncts(stmt, expr.children[0])
    if isinstance(expr, AndExpr):
        out: list[str] = []
        for child in expr.children:
            out.extend(_conjuncts(stmt, child))
        return out
    return [stmt.span_text(expr)]


def _dedup(items: list[str]) -> tuple[str, ...]:
    seen: set[str] = set()
    out: list[str] = []
    for item in items:
        if item and item not in seen:
            seen.add(item)
            out.append(item)
    return tuple(out)


def _bundle_of(stmt: SelectStmt) -> ClauseBundle:
    selects: list[str] = []
    joins: list[str] = []
    wheres: list[str] = []
    group_bys: list[str] = []
    for core in stmt.cores:
        for idx, item in enumerate(core.items):
            start = item.start
            if idx == 0 and core.distinct_idx >= 0:
                start = core.distinct_idx
            selects.append(render_tokens(stmt.tokens[start : item.end]))
        if core.from_first is not None:
            joins.append(stmt.span_text(core.from_first))
            for join in core.joins:
                joins.append(stmt.span_text(join))
        if core.where is not None:
            wheres.extend(_conjuncts(stmt, core.where))
        group_bys.extend(stmt.span_text(g) for g in core.group_by)
        if core.having is not None:
            # A1's clause taxonomy has no HAVING list; the whole clause rides
            # in wheres with its keyword so recompose can re-seat it
            wheres.append(render_tokens(stmt.tokens[core.having_kw_idx : core.having.end]))
    orders = [stmt.span_text(k) for k in stmt.order_by]
    limits = [stmt.span_text(stmt.limit)] if stmt.limit is not None else []
    return ClauseBundle(
        selects_calcs=_dedup(selects),
        joins=_dedup(joins),
        wheres=_dedup(wheres),
        group_bys=_dedup(group_bys),
        orders=_dedup(orders),
        limits=_dedup(limits),
    )


def decompose(sql: str) -> QuerySketch:
    """Split a CTE-form query into per-binding clause bundles.

    Expects reformat_to_cte output; set-operation branches within one
    select are merged into a single bundle.
    """
    stmt = parse_select(sql)
    ctes = tuple((cte.name, _bundle_of(cte.select)) for cte in stmt.ctes)
    final = _bundle_of(replace_ctes_stripped(stmt))
    return QuerySketch(ctes=ctes, final=final, source_sql=normalize_sql(sql))


def replace_ctes_stripped(stmt: SelectStmt) -> SelectStmt:
    """View of the statement without its WITH prefix (same token stream)."""
    return replace(stmt, ctes=[])


# ---------------------------------------------------------------------------
# recompose
# ---------------------------------------------------------------------------


def _needs_parens(conjunct: str) -> bool:
    depth = 0
    for tok in sqlast.tokenize(conjunct):
        if tok.kind == "op" and tok.value == "(":
            depth += 1
        elif tok.kind == "op" and tok.value == ")":
            depth -= 1
        elif depth == 0 and tok.kind == "word" and tok.value == "OR":
            return True
    return False


def _bundle_sql(bundle: ClauseBundle) -> str:
    if not bundle.selects_calcs:
        raise IrrecomposableSketch("bundle has no SELECT items")
    parts = ["SELECT " + ", ".join(bundle.selects_calcs)]
    if bundle.joins:
        parts.append("FROM " + " ".join(bundle.joins))
    havings = [w for w in bundle.wheres if w.upper().startswith("HAVING ")]
    conjuncts = [w for w in bundle.wheres if not w.upper().startswith("HAVING ")]
    if conjuncts:
        if len(conjuncts) > 1:
            rendered = [f"({c})" if _needs_parens(c) else c for c in conjuncts]
        else:
            rendered = conjuncts
        parts.append("WHERE " + " AND ".join(rendered))
    if bundle.group_bys:
        parts.append("GROUP BY " + ", ".join(bundle.group_bys))
    if len(havings) > 1:
        raise IrrecomposableSketch("bundle carries more than one HAVING clause")
    parts.extend(havings)
    if bundle.orders:
        parts.append("ORDER BY " + ", ".join(bundle.orders))
    parts.extend(bundle.limits)
    return " ".join(parts)


def recompose(sketch: QuerySketch) -> str:
    """Rebuild executable SQL from a sketch's bundles.

    Bundles built from a set-operation query merge both branches and are
    not invertible, so those sketches are rejected.
    """
    try:
        source = parse_select(sketch.source_sql)
    except Exception as exc:
        raise IrrecomposableSketch(f"source_sql does not parse: {exc}") from exc
    if any(sel.is_compound for sel in source.all_selects()):
        raise IrrecomposableSketch("set-operation sketches merge branches and cannot recompose")
    pieces: list[str] = []
    if sketch.ctes:
        defs = ", ".join(f"{name} AS ({_bundle_sql(bundle)})" for name, bundle in sketch.ctes)
        pieces.append("WITH " + defs)
    pieces.append(_bundle_sql(sketch.final))
    sql = " ".join(pieces)
    try:
        result = normalize_sql(sql)
        parse_select(result)
    except Exception as exc:
        raise IrrecomposableSketch(f"recomposed text does not parse: {exc}") from exc
    return result


# ---------------------------------------------------------------------------
# annotate
# ---------------------------------------------------------------------------


def _output_columns(bundle: ClauseBundle) -> list[str]:
    cols = []
    for item in bundle.selects_calcs:
        tokens = sqlast.tokenize(item)
        if len(tokens) >= 2 and tokens[-2] == Token("word", "AS"):
            cols.append(tokens[-1].value)
        elif len(tokens) == 1 or (len(tokens) == 3 and tokens[1].value == "."):
            cols.append(tokens[-1].value)
        else:
            cols.append(item)
    return cols


def _base_tables(bundle: ClauseBundle) -> list[str]:
    tables = []
    for join in bundle.joins:
        tokens = sqlast.tokenize(join)
        words = [t.value for t in tokens if t.kind == "word" and t.value not in sqlast.KEYWORDS]
        if words:
            tables.append(words[0])
    return tables


def template_cte_description(name: str, bundle: ClauseBundle) -> str:
    cols = ", ".join(_output_columns(bundle)) or "all columns"
    tables = ", ".join(_base_tables(bundle)) or "no tables"
    return f"CTE {name}: selects {cols} from {tables}"


def _template_complex_terms(sketch: QuerySketch) -> list[str]:
    terms = []
    for _, bundle in (*sketch.ctes, ("", sketch.final)):
        for item in bundle.selects_calcs:
            tokens = sqlast.tokenize(item)
            if len(tokens) >= 4 and tokens[-2] == Token("word", "AS"):
                alias = tokens[-1].value
                expr = render_tokens(tokens[:-2])
                terms.append(f"{alias}: computed as {expr}")
    return terms


def annotate(sketch: QuerySketch, nl_hint: str | None, model) -> DecomposedExample:
    """Attach natural-language descriptions to a sketch.

    The model is asked once for a JSON annotation; empty or malformed
    output falls back to deterministic templates, as does a model error.
    """
    stmt = parse_select(sketch.source_sql)
    names = [name for name, _ in sketch.ctes]
    prompt_lines = [
        "Annotate this decomposed SQL query. Reply with JSON having keys",
        '"input_nl" (one sentence), "complex_terms" (list of strings, each',
        '"NAME: definition and SQL representation") and "cte_desc" (one short',
        "description per CTE, in order).",
        f"CTE names: {names}",
        f"SQL: {sketch.source_sql}",
    ]
    annotation: dict = {}
    try:
        raw = model.complete("\n".join(prompt_lines), role="annotate")
        if raw.strip():
            try:
                parsed = json.loads(raw)
                if isinstance(parsed, dict):
                    annotation = parsed
            except json.JSONDecodeError:
                annotation = {}
    except ModelError:
        annotation = {}

    cte_desc = annotation.get("cte_desc")
    if not isinstance(cte_desc, list) or len(cte_desc) != len(sketch.ctes):
        cte_desc = [template_cte_description(name, bundle) for name, bundle in sketch.ctes]
    complex_terms = annotation.get("complex_terms")
    if not isinstance(complex_terms, list) or not all(isinstance(t, str) for t in complex_terms):
        complex_terms = _template_complex_terms(sketch)
    input_nl = nl_hint
    if not input_nl:
        input_nl = annotation.get("input_nl") if isinstance(annotation.get("input_nl"), str) else ""
    if not input_nl:
        cols = ", ".join(_output_columns(sketch.final)) or "rows"
        tables = ", ".join(stmt.table_names()) or "the database"
        input_nl = f"Query returning {cols} from {tables}"

    example = DecomposedExample(
        input_nl=input_nl,
        complex_terms=tuple(str(t) for t in complex_terms),
        features=ExampleFeatures(
            tables=tuple(stmt.table_names()),
            cte_count=len(sketch.ctes),
            cte_desc=tuple(str(d) for d in cte_desc),
        ),
        cte_bundles=tuple(bundle for _, bundle in sketch.ctes),
        final_bundle=sketch.final,
        full_sql_query=sketch.source_sql,
    )
    example.validate()
    return example


# ---------------------------------------------------------------------------
# A1-shaped JSON serialization
# ---------------------------------------------------------------------------


def example_to_json(example: DecomposedExample) -> dict:
    doc: dict = {
        "input_nl": example.input_nl,
        "complex_terms": list(example.complex_terms),
        "features": {
            "tables": list(example.features.tables),
            "CTEs": example.features.cte_count,
            "CTE_desc": list(example.features.cte_desc),
        },
    }
    for i, bundle in enumerate(example.cte_bundles, start=1):
        doc[f"cte_{i}_columns"] = bundle.as_dict()
    doc["final_columns"] = example.final_bundle.as_dict()
    doc["full_sql_query"] = example.full_sql_query
    return doc


def example_from_json(doc: dict) -> DecomposedExample:
    features = doc.get("features", {})
    cte_count = int(features.get("CTEs", 0))
    bundles = tuple(
        ClauseBundle.from_dict(doc[f"cte_{i}_columns"]) for i in range(1, cte_count + 1)
    )
    example = DecomposedExample(
        input_nl=doc["input_nl"],
        complex_terms=tuple(doc.get("complex_terms", ())),
        features=ExampleFeatures(
            tables=tuple(features.get("tables", ())),
            cte_count=cte_count,
            cte_desc=tuple(features.get("CTE_desc", ())),
        ),
        cte_bundles=bundles,
        final_bundle=ClauseBundle.from_dict(doc["final_columns"]),
        full_sql_query=doc["full_sql_query"],
    )
    example.validate()
    return example


def build_example(sql: str, nl_hint: str | None, model) -> DecomposedExample:
    """Full chain: reformat, decompose, annotate."""
    return annotate(decompose(reformat_to_cte(sql)), nl_hint, model)
