"""Tokenizer, parser and renderer for the ANSI-flavored SELECT dialect.

The engine works on one dialect: the subset of SQL the embedded execution
engine (SQLite plus a few registered scalar functions) accepts. Everything
downstream (decomposition, recomposition, prompt assembly) manipulates the
token stream produced here, so normalization is defined once: uppercase
keywords and unquoted identifiers, single spaces between tokens, no
trailing semicolon. Clause extraction slices token spans, which guarantees
that every extracted string is a substring of the normalized statement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseError, UnsupportedStatement

# Reserved words. Anything else (SUM, COUNT, TO_CHAR, ...) is an ordinary
# identifier, which keeps function names out of the grammar.
KEYWORDS = frozenset(
    """
    SELECT FROM WHERE GROUP BY HAVING ORDER LIMIT OFFSET AS ON USING JOIN
    LEFT RIGHT FULL OUTER INNER CROSS NATURAL AND OR NOT IN IS NULL LIKE
    BETWEEN EXISTS CASE WHEN THEN ELSE END CAST WITH RECURSIVE UNION ALL
    INTERSECT EXCEPT DISTINCT ASC DESC NULLS FIRST LAST OVER PARTITION
    ROWS RANGE GROUPS UNBOUNDED PRECEDING FOLLOWING CURRENT ROW TRUE FALSE
    ESCAPE
    """.split()
)

# Statement openers we recognise but refuse.
_NON_SELECT_OPENERS = frozenset(
    "INSERT UPDATE DELETE CREATE DROP ALTER REPLACE PRAGMA ATTACH DETACH "
    "VACUUM ANALYZE EXPLAIN BEGIN COMMIT ROLLBACK GRANT REVOKE TRUNCATE "
    "MERGE CALL SET SHOW USE DESCRIBE".split()
)

# Keywords that may directly end an expression; used for unary +/- spacing.
_EXPR_ENDERS = frozenset({"NULL", "TRUE", "FALSE", "END"})

_TWO_CHAR_OPS = ("<=", ">=", "<>", "!=", "==", "||")
_SINGLE_OPS = set("=<>+-*/%(),.;")


@dataclass(frozen=True)
class Token:
    kind: str  # word | qword | num | str | op
    value: str

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"{self.kind}:{self.value}"


def tokenize(sql: str) -> list[Token]:
    """Lex SQL text into normalized tokens; comments are dropped."""
    tokens: list[Token] = []
    i, n = 0, len(sql)
    while i < n:
        ch = sql[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "-" and sql.startswith("--", i):
            j = sql.find("\n", i)
            i = n if j < 0 else j + 1
            continue
        if ch == "/" and sql.startswith("/*", i):
            j = sql.find("*/", i + 2)
            if j < 0:
                raise ParseError("unterminated block comment")
            i = j + 2
            continue
        if ch == "'":
            j = i + 1
            while True:
                j = sql.find("'", j)
                if j < 0:
                    raise ParseError("unterminated string literal")
                if j + 1 < n and sql[j + 1] == "'":
                    j += 2
                    continue
                break
            tokens.append(Token("str", sql[i : j + 1]))
            i = j + 1
            continue
        if ch == '"':
            j = i + 1
            while True:
                j = sql.find('"', j)
                if j < 0:
                    raise ParseError("unterminated quoted identifier")
                if j + 1 < n and sql[j + 1] == '"':
                    j += 2
                    continue
                break
            tokens.append(Token("qword", sql[i : j + 1]))
            i = j + 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and sql[i + 1].isdigit()):
            j = i
            while j < n and sql[j].isdigit():
                j += 1
            if j < n and sql[j] == ".":
                j += 1
                while j < n and sql[j].isdigit():
                    j += 1
            if j < n and sql[j] in "eE":
                k = j + 1
                if k < n and sql[k] in "+-":
                    k += 1
                if k < n and sql[k].isdigit():
                    j = k
                    while j < n and sql[j].isdigit():
                        j += 1
            tokens.append(Token("num", sql[i:j].upper()))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (sql[j].isalnum() or sql[j] == "_"):
                j += 1
            tokens.append(Token("word", sql[i:j].upper()))
            i = j
            continue
        two = sql[i : i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token("op", two))
            i += 2
            continue
        if ch in _SINGLE_OPS:
            tokens.append(Token("op", ch))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r} at offset {i}")
    return tokens


def _is_unary_sign(prev: Token | None) -> bool:
    if prev is None:
        return True
    if prev.kind == "op":
        return prev.value not in (")",)
    if prev.kind == "word":
        return prev.value in KEYWORDS and prev.value not in _EXPR_ENDERS
    return False  # identifier, number, string, quoted identifier


def render_tokens(tokens: list[Token]) -> str:
    """Join tokens with canonical single-space separation."""
    parts: list[str] = []
    prev: Token | None = None
    prev_prev: Token | None = None
    for tok in tokens:
        space = True
        if prev is None:
            space = False
        elif tok.value in {",", ")", ".", ";"} and tok.kind == "op":
            space = False
        elif prev.kind == "op" and prev.value in {"(", "."}:
            space = False
        elif (
            tok.kind == "op"
            and tok.value == "("
            and prev.kind in {"word", "qword"}
            and (prev.value == "CAST" or prev.value not in KEYWORDS)
        ):
            space = False
        elif (
            prev is not None
            and prev.kind == "op"
            and prev.value in {"-", "+"}
            and _is_unary_sign(prev_prev)
        ):
            space = False
        if space:
            parts.append(" ")
        parts.append(tok.value)
        prev_prev = prev
        prev = tok
    return "".join(parts)


def normalize_sql(sql: str) -> str:
    """Canonical text form: lexed, uppercased, single-spaced, no final ';'."""
    tokens = tokenize(sql)
    while tokens and tokens[-1] == Token("op", ";"):
        tokens.pop()
    return render_tokens(tokens)


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------
# Nodes record [start, end) spans into the statement token list. Expression
# structure is skeletal: AND/OR/NOT/paren shape is modeled (clause splitting
# needs it), everything else is a generic node carrying its span and any
# nested subselects.


@dataclass
class Node:
    start: int = field(default=-1, kw_only=True)
    end: int = field(default=-1, kw_only=True)


@dataclass
class Expr(Node):
    children: list = field(default_factory=list, kw_only=True)

    def walk_selects(self):
        for child in self.children:
            if isinstance(child, SelectStmt):
                yield child
            elif isinstance(child, Expr):
                yield from child.walk_selects()


@dataclass
class AndExpr(Expr):
    pass


@dataclass
class OrExpr(Expr):
    pass


@dataclass
class NotExpr(Expr):
    pass


@dataclass
class ParenExpr(Expr):
    pass


@dataclass
class GenericExpr(Expr):
    pass


@dataclass
class SelectItem(Node):
    expr: Expr | None = None  # None for bare *
    alias: str | None = None


@dataclass
class TableRef(Node):
    name: str = ""
    alias: str | None = None


@dataclass
class DerivedTable(Node):
    select: "SelectStmt | None" = None
    alias: str | None = None


@dataclass
class JoinClause(Node):
    kws: list[str] = field(default_factory=list)  # ["LEFT","JOIN"]; [","] for comma joins
    right: "TableRef | DerivedTable | None" = None
    on: Expr | None = None
    using: list[str] | None = None


@dataclass
class OrderKey(Node):
    expr: Expr | None = None  # span additionally covers ASC/DESC/NULLS


@dataclass
class SelectCore(Node):
    distinct: str | None = None  # "DISTINCT" | "ALL" | None
    distinct_idx: int = -1
    items: list[SelectItem] = field(default_factory=list)
    from_first: "TableRef | DerivedTable | None" = None
    joins: list[JoinClause] = field(default_factory=list)
    where: Expr | None = None
    group_by: list[Expr] = field(default_factory=list)
    having: Expr | None = None
    having_kw_idx: int = -1


@dataclass
class CteDef(Node):
    name: str = ""
    select: "SelectStmt | None" = None


@dataclass
class SelectStmt(Node):
    ctes: list[CteDef] = field(default_factory=list)
    cores: list[SelectCore] = field(default_factory=list)
    core_ops: list[str] = field(default_factory=list)  # between consecutive cores
    order_by: list[OrderKey] = field(default_factory=list)
    limit: Node | None = None
    tokens: list[Token] = field(default_factory=list)  # shared statement stream

    @property
    def is_compound(self) -> bool:
        return len(self.cores) > 1

    def span_text(self, node: Node) -> str:
        return render_tokens(self.tokens[node.start : node.end])

    def all_selects(self):
        """Yield this statement and every nested select, pre-order."""
        yield self
        for cte in self.ctes:
            yield from cte.select.all_selects()
        for core in self.cores:
            for item in core.items:
                if item.expr is not None:
                    for sub in item.expr.walk_selects():
                        yield from sub.all_selects()
            for fi in [core.from_first] + [j.right for j in core.joins]:
                if isinstance(fi, DerivedTable):
                    yield from fi.select.all_selects()
            for expr in [core.where, core.having] + core.group_by:
                if expr is not None:
                    for sub in expr.walk_selects():
                        yield from sub.all_selects()

    def table_names(self) -> list[str]:
        """Base relation names referenced anywhere, CTE names excluded."""
        cte_names = {c.name for s in self.all_selects() for c in s.ctes}
        seen: list[str] = []
        for sel in self.all_selects():
            for core in sel.cores:
                for fi in [core.from_first] + [j.right for j in core.joins]:
                    if isinstance(fi, TableRef) and fi.name not in cte_names:
                        if fi.name not in seen:
                            seen.append(fi.name)
        return seen


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_CLAUSE_STOPPERS = frozenset(
    "FROM WHERE GROUP HAVING ORDER LIMIT OFFSET ON USING JOIN LEFT RIGHT "
    "FULL INNER CROSS NATURAL UNION INTERSECT EXCEPT WHEN THEN ELSE END "
    "AND OR AS BY ASC DESC NULLS".split()
)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    # -- primitives --------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token | None:
        idx = self.pos + ahead
        return self.toks[idx] if idx < len(self.toks) else None

    def at_word(self, *words: str, ahead: int = 0) -> bool:
        tok = self.peek(ahead)
        return tok is not None and tok.kind == "word" and tok.value in words

    def at_op(self, op: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "op" and tok.value == op

    def take(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input")
        self.pos += 1
        return tok

    def expect_word(self, word: str) -> None:
        if not self.at_word(word):
            raise ParseError(f"expected {word}, found {self._describe()}")
        self.pos += 1

    def expect_op(self, op: str) -> None:
        if not self.at_op(op):
            raise ParseError(f"expected {op!r}, found {self._describe()}")
        self.pos += 1

    def _describe(self) -> str:
        tok = self.peek()
        return "end of input" if tok is None else repr(tok.value)

    # -- statement ---------------------------------------------------------

    def parse_statement(self) -> SelectStmt:
        first = self.peek()
        if first is None:
            raise ParseError("empty statement")
        if first.kind == "word" and first.value in _NON_SELECT_OPENERS:
            raise UnsupportedStatement(f"{first.value} statements are not supported")
        stmt = self.parse_select()
        if self.at_op(";"):
            self.pos += 1
        if self.peek() is not None:
            raise ParseError(f"trailing input after statement: {self._describe()}")
        return stmt

    def parse_select(self) -> SelectStmt:
        start = self.pos
        stmt = SelectStmt(start=start)
        if self.at_word("WITH"):
            self.pos += 1
            if self.at_word("RECURSIVE"):
                raise UnsupportedStatement("recursive CTEs are not supported")
            stmt.ctes.append(self.parse_cte())
            while self.at_op(","):
                self.pos += 1
                stmt.ctes.append(self.parse_cte())
        stmt.cores.append(self.parse_core())
        while self.at_word("UNION", "INTERSECT", "EXCEPT"):
            op = self.take().value
            if op == "UNION" and self.at_word("ALL"):
                self.pos += 1
                op = "UNION ALL"
            stmt.core_ops.append(op)
            stmt.cores.append(self.parse_core())
        if self.at_word("ORDER"):
            self.pos += 1
            self.expect_word("BY")
            stmt.order_by.append(self.parse_order_key())
            while self.at_op(","):
                self.pos += 1
                stmt.order_by.append(self.parse_order_key())
        if self.at_word("LIMIT"):
            lstart = self.pos
            self.pos += 1
            self.parse_expr()
            if self.at_op(","):
                raise ParseError("use LIMIT n OFFSET m instead of LIMIT m, n")
            if self.at_word("OFFSET"):
                self.pos += 1
                self.parse_expr()
            stmt.limit = Node(start=lstart, end=self.pos)
        stmt.end = self.pos
        return stmt

    def parse_cte(self) -> CteDef:
        start = self.pos
        name_tok = self.take()
        if name_tok.kind != "word" or name_tok.value in KEYWORDS:
            raise ParseError(f"invalid CTE name {name_tok.value!r}")
        if self.at_op("("):
            raise ParseError("CTE column alias lists are not supported")
        self.expect_word("AS")
        self.expect_op("(")
        select = self.parse_select()
        self.expect_op(")")
        return CteDef(name=name_tok.value, select=select, start=start, end=self.pos)

    def parse_core(self) -> SelectCore:
        start = self.pos
        self.expect_word("SELECT")
        core = SelectCore(start=start)
        if self.at_word("DISTINCT", "ALL"):
            core.distinct_idx = self.pos
            core.distinct = self.take().value
        core.items.append(self.parse_select_item())
        while self.at_op(","):
            self.pos += 1
            core.items.append(self.parse_select_item())
        if self.at_word("FROM"):
            self.pos += 1
            core.from_first = self.parse_from_item()
            while True:
                join = self.try_parse_join()
                if join is None:
                    break
                core.joins.append(join)
        if self.at_word("WHERE"):
            self.pos += 1
            core.where = self.parse_expr()
        if self.at_word("GROUP"):
            self.pos += 1
            self.expect_word("BY")
            core.group_by.append(self.parse_expr())
            while self.at_op(","):
                self.pos += 1
                core.group_by.append(self.parse_expr())
        if self.at_word("HAVING"):
            core.having_kw_idx = self.pos
            self.pos += 1
            core.having = self.parse_expr()
        core.end = self.pos
        return core

    def parse_select_item(self) -> SelectItem:
        start = self.pos
        if self.at_op("*"):
            self.pos += 1
            return SelectItem(expr=None, start=start, end=self.pos)
        expr = self.parse_expr()
        alias = None
        if self.at_word("AS"):
            self.pos += 1
            alias_tok = self.take()
            if alias_tok.kind not in {"word", "qword"} or (
                alias_tok.kind == "word" and alias_tok.value in KEYWORDS
            ):
                raise ParseError(f"invalid alias {alias_tok.value!r}")
            alias = alias_tok.value
        elif self._at_bare_alias():
            alias = self.take().value
        return SelectItem(expr=expr, alias=alias, start=start, end=self.pos)

    def _at_bare_alias(self) -> bool:
        tok = self.peek()
        if tok is None:
            return False
        if tok.kind == "qword":
            return True
        return tok.kind == "word" and tok.value not in KEYWORDS

    def parse_from_item(self) -> TableRef | DerivedTable:
        start = self.pos
        if self.at_op("("):
            self.pos += 1
            if not self.at_word("SELECT", "WITH"):
                raise ParseError("parenthesized join sources are not supported")
            select = self.parse_select()
            self.expect_op(")")
            alias = self._parse_table_alias()
            return DerivedTable(select=select, alias=alias, start=start, end=self.pos)
        name_tok = self.take()
        if name_tok.kind != "word" or name_tok.value in KEYWORDS:
            raise ParseError(f"invalid table reference {name_tok.value!r}")
        name = name_tok.value
        while self.at_op("."):  # schema-qualified names keep the last part
            self.pos += 1
            part = self.take()
            if part.kind != "word":
                raise ParseError("invalid qualified table name")
            name = part.value
        alias = self._parse_table_alias()
        return TableRef(name=name, alias=alias, start=start, end=self.pos)

    def _parse_table_alias(self) -> str | None:
        if self.at_word("AS"):
            self.pos += 1
            tok = self.take()
            if tok.kind != "word" or tok.value in KEYWORDS:
                raise ParseError(f"invalid table alias {tok.value!r}")
            return tok.value
        tok = self.peek()
        if tok is not None and tok.kind == "word" and tok.value not in KEYWORDS:
            self.pos += 1
            return tok.value
        return None

    def try_parse_join(self) -> JoinClause | None:
        start = self.pos
        kws: list[str] = []
        if self.at_op(","):
            self.pos += 1
            kws = [","]
        elif self.at_word("NATURAL"):
            raise ParseError("NATURAL joins are not supported")
        elif self.at_word("JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS"):
            while self.at_word("JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS", "OUTER"):
                kws.append(self.take().value)
            if kws[-1] != "JOIN":
                raise ParseError("malformed join keywords")
        else:
            return None
        right = self.parse_from_item()
        join = JoinClause(kws=kws, right=right, start=start)
        if self.at_word("ON"):
            self.pos += 1
            join.on = self.parse_expr()
        elif self.at_word("USING"):
            self.pos += 1
            self.expect_op("(")
            cols = [self.take().value]
            while self.at_op(","):
                self.pos += 1
                cols.append(self.take().value)
            self.expect_op(")")
            join.using = cols
        join.end = self.pos
        return join

    def parse_order_key(self) -> OrderKey:
        start = self.pos
        expr = self.parse_expr()
        if self.at_word("ASC", "DESC"):
            self.pos += 1
        if self.at_word("NULLS"):
            self.pos += 1
            if not self.at_word("FIRST", "LAST"):
                raise ParseError("expected FIRST or LAST after NULLS")
            self.pos += 1
        return OrderKey(expr=expr, start=start, end=self.pos)

    # -- expressions --------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        start = self.pos
        left = self.parse_and()
        if not self.at_word("OR"):
            return left
        children = [left]
        while self.at_word("OR"):
            self.pos += 1
            children.append(self.parse_and())
        return OrExpr(children=children, start=start, end=self.pos)

    def parse_and(self) -> Expr:
        start = self.pos
        left = self.parse_not()
        if not self.at_word("AND"):
            return left
        children = [left]
        while self.at_word("AND"):
            self.pos += 1
            children.append(self.parse_not())
        return AndExpr(children=children, start=start, end=self.pos)

    def parse_not(self) -> Expr:
        if self.at_word("NOT"):
            start = self.pos
            self.pos += 1
            operand = self.parse_not()
            return NotExpr(children=[operand], start=start, end=self.pos)
        return self.parse_predicate()

    def parse_predicate(self) -> Expr:
        start = self.pos
        left = self.parse_additive()
        children: list = [left]
        augmented = False
        while True:
            tok = self.peek()
            if tok is None:
                break
            if tok.kind == "op" and tok.value in {"=", "==", "!=", "<>", "<", "<=", ">", ">="}:
                self.pos += 1
                children.append(self.parse_additive())
                augmented = True
                continue
            if self.at_word("IS"):
                self.pos += 1
                if self.at_word("NOT"):
                    self.pos += 1
                if self.at_word("NULL", "TRUE", "FALSE"):
                    self.pos += 1
                else:
                    children.append(self.parse_additive())
                augmented = True
                continue
            negated = False
            if self.at_word("NOT") and self.at_word("IN", "LIKE", "BETWEEN", ahead=1):
                self.pos += 1
                negated = True
            if self.at_word("IN"):
                self.pos += 1
                self.expect_op("(")
                if self.at_word("SELECT", "WITH"):
                    children.append(self.parse_select())
                else:
                    children.append(self.parse_expr())
                    while self.at_op(","):
                        self.pos += 1
                        children.append(self.parse_expr())
                self.expect_op(")")
                augmented = True
                continue
            if self.at_word("LIKE"):
                self.pos += 1
                children.append(self.parse_additive())
                if self.at_word("ESCAPE"):
                    self.pos += 1
                    children.append(self.parse_additive())
                augmented = True
                continue
            if self.at_word("BETWEEN"):
                self.pos += 1
                children.append(self.parse_additive())
                self.expect_word("AND")
                children.append(self.parse_additive())
                augmented = True
                continue
            if negated:
                raise ParseError("dangling NOT before predicate")
            break
        if not augmented:
            return left
        return GenericExpr(children=children, start=start, end=self.pos)

    def parse_additive(self) -> Expr:
        start = self.pos
        left = self.parse_multiplicative()
        children = [left]
        augmented = False
        while True:
            tok = self.peek()
            if tok is not None and tok.kind == "op" and tok.value in {"+", "-", "||"}:
                self.pos += 1
                children.append(self.parse_multiplicative())
                augmented = True
            else:
                break
        if not augmented:
            return left
        return GenericExpr(children=children, start=start, end=self.pos)

    def parse_multiplicative(self) -> Expr:
        start = self.pos
        left = self.parse_unary()
        children = [left]
        augmented = False
        while True:
            tok = self.peek()
            if tok is not None and tok.kind == "op" and tok.value in {"*", "/", "%"}:
                self.pos += 1
                children.append(self.parse_unary())
                augmented = True
            else:
                break
        if not augmented:
            return left
        return GenericExpr(children=children, start=start, end=self.pos)

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.value in {"-", "+"}:
            start = self.pos
            self.pos += 1
            operand = self.parse_unary()
            return GenericExpr(children=[operand], start=start, end=self.pos)
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        start = self.pos
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of expression")
        if tok.kind in {"num", "str"}:
            self.pos += 1
            return GenericExpr(start=start, end=self.pos)
        if tok.kind == "op" and tok.value == "(":
            self.pos += 1
            if self.at_word("SELECT", "WITH"):
                sub = self.parse_select()
                self.expect_op(")")
                return GenericExpr(children=[sub], start=start, end=self.pos)
            inner = self.parse_expr()
            if self.at_op(","):  # row value used by IN / comparisons
                children = [inner]
                while self.at_op(","):
                    self.pos += 1
                    children.append(self.parse_expr())
                self.expect_op(")")
                return GenericExpr(children=children, start=start, end=self.pos)
            self.expect_op(")")
            return ParenExpr(children=[inner], start=start, end=self.pos)
        if tok.kind == "op" and tok.value == "*":
            self.pos += 1
            return GenericExpr(start=start, end=self.pos)
        if tok.kind == "word" and tok.value in {"NULL", "TRUE", "FALSE"}:
            self.pos += 1
            return GenericExpr(start=start, end=self.pos)
        if tok.kind == "word" and tok.value == "CASE":
            return self.parse_case()
        if tok.kind == "word" and tok.value == "CAST":
            return self.parse_cast()
        if tok.kind == "word" and tok.value == "EXISTS":
            self.pos += 1
            self.expect_op("(")
            sub = self.parse_select()
            self.expect_op(")")
            return GenericExpr(children=[sub], start=start, end=self.pos)
        if tok.kind in {"word", "qword"}:
            if tok.kind == "word" and tok.value in KEYWORDS:
                raise ParseError(f"unexpected keyword {tok.value!r} in expression")
            self.pos += 1
            nxt = self.peek()
            if nxt is not None and nxt.kind == "op" and nxt.value == "(":
                return self.parse_call(start)
            children: list = []
            while self.at_op("."):
                self.pos += 1
                part = self.take()
                if part.kind == "op" and part.value == "*":
                    break
                if part.kind not in {"word", "qword"}:
                    raise ParseError("invalid qualified reference")
            return GenericExpr(children=children, start=start, end=self.pos)
        raise ParseError(f"unexpected token {tok.value!r} in expression")

    def parse_case(self) -> Expr:
        start = self.pos
        self.expect_word("CASE")
        children: list = []
        if not self.at_word("WHEN"):
            children.append(self.parse_expr())
        while self.at_word("WHEN"):
            self.pos += 1
            children.append(self.parse_expr())
            self.expect_word("THEN")
            children.append(self.parse_expr())
        if self.at_word("ELSE"):
            self.pos += 1
            children.append(self.parse_expr())
        self.expect_word("END")
        return GenericExpr(children=children, start=start, end=self.pos)

    def parse_cast(self) -> Expr:
        start = self.pos
        self.expect_word("CAST")
        self.expect_op("(")
        inner = self.parse_expr()
        self.expect_word("AS")
        tok = self.take()
        if tok.kind != "word":
            raise ParseError("expected type name in CAST")
        while self.at_word("PRECISION") or (
            self.peek() is not None
            and self.peek().kind == "word"
            and self.peek().value not in KEYWORDS
            and not self.at_op(")")
        ):
            self.pos += 1
        if self.at_op("("):
            self.pos += 1
            self.take()
            if self.at_op(","):
                self.pos += 1
                self.take()
            self.expect_op(")")
        self.expect_op(")")
        return GenericExpr(children=[inner], start=start, end=self.pos)

    def parse_call(self, start: int) -> Expr:
        self.expect_op("(")
        children: list = []
        if self.at_word("DISTINCT", "ALL"):
            self.pos += 1
        if self.at_op("*"):
            self.pos += 1
        elif not self.at_op(")"):
            children.append(self.parse_expr())
            while self.at_op(","):
                self.pos += 1
                children.append(self.parse_expr())
        self.expect_op(")")
        if self.at_word("OVER"):
            self.pos += 1
            self.expect_op("(")
            if self.at_word("PARTITION"):
                self.pos += 1
                self.expect_word("BY")
                children.append(self.parse_expr())
                while self.at_op(","):
                    self.pos += 1
                    children.append(self.parse_expr())
            if self.at_word("ORDER"):
                self.pos += 1
                self.expect_word("BY")
                self.parse_order_key()
                while self.at_op(","):
                    self.pos += 1
                    self.parse_order_key()
            if self.at_word("ROWS", "RANGE", "GROUPS"):
                self.pos += 1
                self._parse_frame()
            self.expect_op(")")
        return GenericExpr(children=children, start=start, end=self.pos)

    def _parse_frame(self) -> None:
        def bound() -> None:
            if self.at_word("UNBOUNDED"):
                self.pos += 1
                if not self.at_word("PRECEDING", "FOLLOWING"):
                    raise ParseError("malformed window frame bound")
                self.pos += 1
            elif self.at_word("CURRENT"):
                self.pos += 1
                self.expect_word("ROW")
            else:
                self.parse_expr()
                if not self.at_word("PRECEDING", "FOLLOWING"):
                    raise ParseError("malformed window frame bound")
                self.pos += 1

        if self.at_word("BETWEEN"):
            self.pos += 1
            bound()
            self.expect_word("AND")
            bound()
        else:
            bound()


def parse_select(sql: str) -> SelectStmt:
    """Parse a single SELECT statement (optionally WITH-prefixed)."""
    tokens = tokenize(sql)
    if not tokens:
        raise ParseError("empty statement")
    parser = _Parser(tokens)
    stmt = parser.parse_statement()
    for sel in stmt.all_selects():
        sel.tokens = tokens
    return stmt


def parses(sql: str) -> bool:
    """True when the text parses as a single SELECT in this dialect."""
    try:
        parse_select(sql)
        return True
    except (ParseError, UnsupportedStatement):
        return False


def split_statements(text: str) -> list[str]:
    """Split multi-statement text on semicolons, respecting literals."""
    parts: list[str] = []
    current: list[Token] = []
    for tok in tokenize(text):
        if tok == Token("op", ";"):
            if current:
                parts.append(render_tokens(current))
                current = []
        else:
            current.append(tok)
    if current:
        parts.append(render_tokens(current))
    return parts
