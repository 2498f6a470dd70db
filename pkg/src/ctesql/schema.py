"""Schema representation: introspection, file loading and A3 rendering.

The representation carries table names, column names, column types,
column descriptions and per-column data samples, plus primary and foreign
keys. It can be built from a live database connection or loaded from a
schema file (JSON, or previously rendered text), and renders to the exact
text block the prompt assembler embeds.
"""

from __future__ import annotations

import ast
import json
import sqlite3
from dataclasses import dataclass, replace
from pathlib import Path

from .database import Database
from .errors import FormatError, UnknownElement

SAMPLE_KEEP_ALL_MAX = 10  # <= this many distinct values: keep every one
SAMPLE_TOP_N = 5  # otherwise: most frequent, ties by value ascending


@dataclass(frozen=True)
class ColumnRepr:
    name: str
    col_type: str
    description: str = ""
    sample_rows: tuple[str, ...] = ()  # rendered literals, e.g. "'CANADA'"


@dataclass(frozen=True)
class TableRepr:
    name: str
    columns: tuple[ColumnRepr, ...]
    primary_key: str | None = None

    def column(self, name: str) -> ColumnRepr | None:
        for col in self.columns:
            if col.name == name:
                return col
        return None


@dataclass(frozen=True)
class ForeignKey:
    tables: tuple[str, str]
    keys: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class SchemaRepresentation:
    tables: tuple[TableRepr, ...] = ()
    foreign_keys: tuple[ForeignKey, ...] = ()

    def table(self, name: str) -> TableRepr | None:
        for tab in self.tables:
            if tab.name == name:
                return tab
        return None

    def validate(self) -> None:
        names = [t.name for t in self.tables]
        if len(names) != len(set(names)):
            raise FormatError("duplicate table names")
        for tab in self.tables:
            for col in tab.columns:
                if len(col.sample_rows) > SAMPLE_KEEP_ALL_MAX:
                    raise FormatError(
                        f"{tab.name}.{col.name}: more than {SAMPLE_KEEP_ALL_MAX} sample rows"
                    )
        for fk in self.foreign_keys:
            for idx, side in enumerate(fk.tables):
                tab = self.table(side)
                if tab is None:
                    raise FormatError(f"foreign key references missing table {side}")
                for pair in fk.keys:
                    if tab.column(pair[idx]) is None:
                        raise FormatError(
                            f"foreign key references missing column {side}.{pair[idx]}"
                        )


# ---------------------------------------------------------------------------
# Introspection
# ---------------------------------------------------------------------------


def render_literal(value) -> str:
    """Rendered sample literal: text quoted, numbers bare."""
    return repr(value)


def _value_order_key(value):
    if isinstance(value, (int, float)):
        return (0, float(value), "")
    return (1, 0.0, str(value))


def sample_column(db: Database, table: str, column: str) -> tuple[str, ...]:
    """Apply the sampling rule to one column.

    NULL never counts. All distinct values when there are at most 10,
    otherwise the 5 most frequent, frequency-descending with ties broken
    by value ascending.
    """
    rows = db.connection.execute(
        f'SELECT "{column}", COUNT(*) FROM "{table}" '
        f'WHERE "{column}" IS NOT NULL GROUP BY "{column}"'
    ).fetchall()
    rows.sort(key=lambda r: (-r[1], _value_order_key(r[0])))
    if len(rows) > SAMPLE_KEEP_ALL_MAX:
        rows = rows[:SAMPLE_TOP_N]
    return tuple(render_literal(v) for v, _ in rows)


def introspect(db: Database) -> SchemaRepresentation:
    """Build the representation for every base table of a live database."""
    try:
        names = [
            r[0]
            for r in db.connection.execute(
                "SELECT name FROM sqlite_master WHERE type = 'table' "
                "AND name NOT LIKE 'sqlite_%' ORDER BY name"
            )
        ]
        tables: list[TableRepr] = []
        fks: list[ForeignKey] = []
        for name in names:
            cols: list[ColumnRepr] = []
            pk: str | None = None
            pk_count = 0
            for _, col_name, col_type, _, _, pk_flag in db.connection.execute(
                f'PRAGMA table_info("{name}")'
            ):
                cols.append(
                    ColumnRepr(
                        name=col_name,
                        col_type=col_type or "",
                        sample_rows=sample_column(db, name, col_name),
                    )
                )
                if pk_flag:
                    pk_count += 1
                    pk = col_name if pk_count == 1 else None
            groups: dict[int, list[tuple[str, str, str]]] = {}
            for row in db.connection.execute(f'PRAGMA foreign_key_list("{name}")'):
                fk_id, _, ref_table, col_from, col_to = row[0], row[1], row[2], row[3], row[4]
                groups.setdefault(fk_id, []).append((ref_table, col_from, col_to))
            for pairs in groups.values():
                ref_table = pairs[0][0]
                fks.append(
                    ForeignKey(
                        tables=(name, ref_table),
                        keys=tuple((frm, to) for _, frm, to in pairs),
                    )
                )
            tables.append(TableRepr(name=name, columns=tuple(cols), primary_key=pk))
    except sqlite3.Error as exc:
        raise ConnectionError(f"database not readable: {exc}") from exc
    schema = SchemaRepresentation(tables=tuple(tables), foreign_keys=tuple(fks))
    schema.validate()
    return schema


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def render_schema(schema: SchemaRepresentation, keep: set[str] | None = None) -> str:
    """Render the representation as the canonical indented text block.

    `keep` holds table names and TABLE.COLUMN qualified column names. A
    named table is kept whole unless individual columns of it are also
    named, in which case only those columns survive. Foreign keys render
    only when both endpoints survive.
    """
    kept = _apply_keep(schema, keep)
    lines: list[str] = []
    for tab in kept.tables:
        lines.append(f"- Table: {tab.name}")
        lines.append("  - Columns:")
        for col in tab.columns:
            lines.append(f"     - {col.name} ({col.col_type})")
            lines.append(f"       - Description: {col.description}")
            lines.append(f"       - Sample rows: [{', '.join(col.sample_rows)}]")
        if tab.primary_key:
            lines.append(f"  - Primary key: {tab.primary_key}")
    if kept.foreign_keys:
        lines.append("- Foreign keys:")
        for fk in kept.foreign_keys:
            lines.append(f"  - ({fk.tables[0]}, {fk.tables[1]}):")
            for pair in fk.keys:
                lines.append(f"    - ({pair[0]}, {pair[1]})")
    return "\n".join(lines)


def _apply_keep(schema: SchemaRepresentation, keep: set[str] | None) -> SchemaRepresentation:
    if keep is None:
        return schema
    known = {t.name for t in schema.tables}
    known.update(f"{t.name}.{c.name}" for t in schema.tables for c in t.columns)
    unknown = set(keep) - known
    if unknown:
        raise UnknownElement(f"keep references unknown elements: {sorted(unknown)}")
    tables: list[TableRepr] = []
    for tab in schema.tables:
        named_cols = [c for c in tab.columns if f"{tab.name}.{c.name}" in keep]
        if named_cols:
            pk = tab.primary_key if any(c.name == tab.primary_key for c in named_cols) else None
            tables.append(replace(tab, columns=tuple(named_cols), primary_key=pk))
        elif tab.name in keep:
            tables.append(tab)
    surviving = {t.name: {c.name for c in t.columns} for t in tables}
    fks = tuple(
        fk
        for fk in schema.foreign_keys
        if all(side in surviving for side in fk.tables)
        and all(
            pair[i] in surviving[fk.tables[i]] for pair in fk.keys for i in range(2)
        )
    )
    return SchemaRepresentation(tables=tuple(tables), foreign_keys=fks)


def schema_to_json(schema: SchemaRepresentation) -> dict:
    """Serialize to the JSON schema-file shape accepted by load_schema_file."""
    return {
        "tables": [
            {
                "name": tab.name,
                "columns": [
                    {
                        "name": col.name,
                        "type": col.col_type,
                        "description": col.description,
                        "samples": list(col.sample_rows),
                    }
                    for col in tab.columns
                ],
                "primary_key": tab.primary_key,
            }
            for tab in schema.tables
        ],
        "foreign_keys": [
            {"tables": list(fk.tables), "keys": [list(pair) for pair in fk.keys]}
            for fk in schema.foreign_keys
        ],
    }


# ---------------------------------------------------------------------------
# File loading
# ---------------------------------------------------------------------------


def load_schema_file(path: str | Path) -> SchemaRepresentation:
    """Load a schema description from JSON or rendered-text format."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        schema = _schema_from_json(text)
    elif stripped.startswith("- Table:") or stripped.startswith("- Foreign keys:") or not stripped:
        schema = parse_rendered_schema(text)
    else:
        raise FormatError(f"{path}: neither JSON nor rendered schema text")
    schema.validate()
    return schema


def _schema_from_json(text: str) -> SchemaRepresentation:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("schema JSON must be an object")
    tables = []
    for tab in doc.get("tables", []):
        cols = []
        for col in tab.get("columns", []):
            try:
                cols.append(
                    ColumnRepr(
                        name=col["name"],
                        col_type=col.get("type", ""),
                        description=col.get("description", ""),
                        sample_rows=tuple(
                            s if isinstance(s, str) else render_literal(s)
                            for s in col.get("samples", [])
                        ),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise FormatError(f"table {tab.get('name')}: bad column entry: {exc}") from exc
        if "name" not in tab:
            raise FormatError("table entry missing name")
        tables.append(
            TableRepr(name=tab["name"], columns=tuple(cols), primary_key=tab.get("primary_key"))
        )
    fks = []
    for fk in doc.get("foreign_keys", []):
        try:
            fks.append(
                ForeignKey(
                    tables=(fk["tables"][0], fk["tables"][1]),
                    keys=tuple((k[0], k[1]) for k in fk["keys"]),
                )
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise FormatError(f"bad foreign_keys entry: {exc}") from exc
    return SchemaRepresentation(tables=tuple(tables), foreign_keys=tuple(fks))


def _parse_sample_list(body: str, lineno: int) -> tuple[str, ...]:
    try:
        values = ast.literal_eval(body)
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"line {lineno}: bad sample list: {exc}") from exc
    if not isinstance(values, (list, tuple)):
        raise FormatError(f"line {lineno}: sample rows must be a list")
    return tuple(render_literal(v) for v in values)


def _parse_pair(body: str, lineno: int) -> tuple[str, str]:
    inner = body.strip()
    if not (inner.startswith("(") and inner.endswith(")")):
        raise FormatError(f"line {lineno}: expected a (A, B) pair")
    parts = [p.strip() for p in inner[1:-1].split(",")]
    if len(parts) != 2 or not all(parts):
        raise FormatError(f"line {lineno}: expected exactly two names in pair")
    return parts[0], parts[1]


def parse_rendered_schema(text: str) -> SchemaRepresentation:
    """Parse render_schema output back into a representation."""
    tables: list[TableRepr] = []
    fks: list[ForeignKey] = []
    cur_table: dict | None = None
    cur_col: ColumnRepr | None = None
    cur_fk: ForeignKey | None = None
    in_fk_section = False

    def close_col():
        nonlocal cur_col
        if cur_col is not None and cur_table is not None:
            cur_table["columns"].append(cur_col)
        cur_col = None

    def close_table():
        nonlocal cur_table
        close_col()
        if cur_table is not None:
            tables.append(
                TableRepr(
                    name=cur_table["name"],
                    columns=tuple(cur_table["columns"]),
                    primary_key=cur_table["primary_key"],
                )
            )
        cur_table = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("- Table: "):
            close_table()
            in_fk_section = False
            cur_table = {"name": line[len("- Table: ") :].strip(), "columns": [], "primary_key": None}
        elif line == "- Columns:":
            continue
        elif line.startswith("- Description:"):
            if cur_col is None:
                raise FormatError(f"line {lineno}: description outside a column")
            cur_col = replace(cur_col, description=line[len("- Description:") :].strip())
        elif line.startswith("- Sample rows:"):
            if cur_col is None:
                raise FormatError(f"line {lineno}: sample rows outside a column")
            body = line[len("- Sample rows:") :].strip()
            cur_col = replace(cur_col, sample_rows=_parse_sample_list(body, lineno))
        elif line.startswith("- Primary key: "):
            if cur_table is None:
                raise FormatError(f"line {lineno}: primary key outside a table")
            close_col()
            cur_table["primary_key"] = line[len("- Primary key: ") :].strip()
        elif line == "- Foreign keys:":
            close_table()
            in_fk_section = True
        elif in_fk_section and line.startswith("- (") and line.endswith(":"):
            if cur_fk is not None:
                fks.append(cur_fk)
            pair = _parse_pair(line[2:-1], lineno)
            cur_fk = ForeignKey(tables=pair, keys=())
        elif in_fk_section and line.startswith("- ("):
            if cur_fk is None:
                raise FormatError(f"line {lineno}: key pair outside a foreign-key entry")
            pair = _parse_pair(line[2:], lineno)
            cur_fk = replace(cur_fk, keys=cur_fk.keys + (pair,))
        elif line.startswith("- ") and "(" in line and line.endswith(")"):
            if cur_table is None:
                raise FormatError(f"line {lineno}: column outside a table")
            close_col()
            head = line[2:]
            name, _, rest = head.partition(" (")
            if not name or not rest.endswith(")"):
                raise FormatError(f"line {lineno}: bad column header")
            cur_col = ColumnRepr(name=name.strip(), col_type=rest[:-1].strip())
        else:
            raise FormatError(f"line {lineno}: unrecognized schema line: {line!r}")
    if cur_fk is not None:
        fks.append(cur_fk)
    close_table()
    return SchemaRepresentation(tables=tuple(tables), foreign_keys=tuple(fks))
