"""External knowledge set: intent-partitioned examples, instructions, schema.

The set is an immutable value; every mutation returns a new set with the
version incremented. Snapshots persist as one JSON file per component
plus a manifest carrying the version and content checksums.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import decomposer
from .decomposer import DecomposedExample
from .errors import (
    CorruptSnapshot,
    DuplicateExample,
    DuplicateId,
    FormatError,
    ParseError,
    UnsupportedStatement,
)
from .schema import SchemaRepresentation, schema_to_json
from .sqlast import normalize_sql

INSTRUCTION_SOURCES = ("example-derived", "document", "adaptation")


@dataclass(frozen=True)
class Instruction:
    id: str
    text: str
    sql_snippet: str | None = None
    intents: tuple[str, ...] = ()  # empty: applies to every intent
    source: str = "document"

    def validate(self) -> None:
        if not self.text.strip():
            raise FormatError("instruction text is empty")
        if self.source not in INSTRUCTION_SOURCES:
            raise FormatError(f"unknown instruction source: {self.source}")


@dataclass(frozen=True)
class KnowledgeSet:
    examples: dict[str, DecomposedExample] = field(default_factory=dict)
    instructions: dict[str, Instruction] = field(default_factory=dict)
    schema: SchemaRepresentation = field(default_factory=SchemaRepresentation)
    partitions: dict[str, tuple[str, ...]] = field(default_factory=dict)
    version: int = 0

    def validate(self) -> None:
        partitioned = {ex_id for ids in self.partitions.values() for ex_id in ids}
        if partitioned != set(self.examples):
            raise CorruptSnapshot("partition membership disagrees with example ids")
        for intent, ids in self.partitions.items():
            if len(ids) != len(set(ids)):
                raise CorruptSnapshot(f"partition {intent} repeats an example id")

    def intents_of(self, ex_id: str) -> tuple[str, ...]:
        return tuple(
            intent for intent, ids in self.partitions.items() if ex_id in ids
        )


def next_example_id(ks: KnowledgeSet) -> str:
    n = len(ks.examples) + 1
    while f"ex_{n:04d}" in ks.examples:
        n += 1
    return f"ex_{n:04d}"


def next_instruction_id(ks: KnowledgeSet) -> str:
    n = len(ks.instructions) + 1
    while f"instr_{n:04d}" in ks.instructions:
        n += 1
    return f"instr_{n:04d}"


def add_example(ks: KnowledgeSet, ex: DecomposedExample, intent: str) -> KnowledgeSet:
    """Store an example under an intent partition.

    The same query may join several partitions (one stored copy); an
    identical full_sql_query already present in this intent is rejected.
    """
    ex.validate()
    normalized = normalize_sql(ex.full_sql_query)
    existing_id = None
    for ex_id, stored in ks.examples.items():
        if normalize_sql(stored.full_sql_query) == normalized:
            existing_id = ex_id
            break
    partition = ks.partitions.get(intent, ())
    if existing_id is not None and existing_id in partition:
        raise DuplicateExample(f"identical query already stored under intent {intent}")
    examples = dict(ks.examples)
    ex_id = existing_id or next_example_id(ks)
    if existing_id is None:
        examples[ex_id] = ex
    partitions = dict(ks.partitions)
    partitions[intent] = partition + (ex_id,)
    return replace(ks, examples=examples, partitions=partitions, version=ks.version + 1)


def add_instruction(ks: KnowledgeSet, instr: Instruction) -> KnowledgeSet:
    instr.validate()
    if instr.id in ks.instructions:
        raise DuplicateId(f"instruction id already present: {instr.id}")
    instructions = dict(ks.instructions)
    instructions[instr.id] = instr
    return replace(ks, instructions=instructions, version=ks.version + 1)


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------

_SNAPSHOT_FILES = ("examples.json", "instructions.json", "schema.json")


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def persist(ks: KnowledgeSet, directory: str | Path) -> None:
    """Write the snapshot; same-version persists are byte-identical."""
    ks.validate()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payloads = {
        "examples.json": _dump(
            {
                "examples": [
                    {"id": ex_id, **decomposer.example_to_json(ex)}
                    for ex_id, ex in ks.examples.items()
                ],
                "partitions": {k: list(v) for k, v in ks.partitions.items()},
            }
        ),
        "instructions.json": _dump(
            [
                {
                    "id": ins.id,
                    "text": ins.text,
                    "sql_snippet": ins.sql_snippet,
                    "intents": list(ins.intents),
                    "source": ins.source,
                }
                for ins in ks.instructions.values()
            ]
        ),
        "schema.json": _dump(schema_to_json(ks.schema)),
    }
    checksums = {
        name: hashlib.sha256(text.encode()).hexdigest() for name, text in payloads.items()
    }
    payloads["manifest.json"] = _dump({"version": ks.version, "checksums": checksums})
    for name, text in payloads.items():
        (directory / name).write_text(text)


def load(directory: str | Path) -> KnowledgeSet:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
        raw = {name: (directory / name).read_text() for name in _SNAPSHOT_FILES}
    except FileNotFoundError as exc:
        raise CorruptSnapshot(f"snapshot incomplete: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorruptSnapshot(f"manifest unreadable: {exc}") from exc
    checksums = manifest.get("checksums", {})
    for name, text in raw.items():
        digest = hashlib.sha256(text.encode()).hexdigest()
        if checksums.get(name) != digest:
            raise CorruptSnapshot(f"checksum mismatch for {name}")
    try:
        ex_doc = json.loads(raw["examples.json"])
        ins_doc = json.loads(raw["instructions.json"])
        examples = {}
        for entry in ex_doc["examples"]:
            entry = dict(entry)
            ex_id = entry.pop("id")
            examples[ex_id] = decomposer.example_from_json(entry)
        partitions = {k: tuple(v) for k, v in ex_doc["partitions"].items()}
        instructions = {
            e["id"]: Instruction(
                id=e["id"],
                text=e["text"],
                sql_snippet=e.get("sql_snippet"),
                intents=tuple(e.get("intents", ())),
                source=e.get("source", "document"),
            )
            for e in ins_doc
        }
        from .schema import load_schema_file

        schema = load_schema_file(directory / "schema.json")
        ks = KnowledgeSet(
            examples=examples,
            instructions=instructions,
            schema=schema,
            partitions=partitions,
            version=int(manifest["version"]),
        )
        ks.validate()
    except (KeyError, TypeError, ValueError, FormatError) as exc:
        raise CorruptSnapshot(f"snapshot structure invalid: {exc}") from exc
    return ks


# ---------------------------------------------------------------------------
# Instruction documents
# ---------------------------------------------------------------------------

_NUMBERED = re.compile(r"^(\d+)\.\s+(.*)$")


def parse_instruction_doc(text: str) -> list[dict]:
    """Parse an instruction document into plain entry dicts.

    Accepts a JSON list of {text, sql_snippet?, intents?} objects or the
    numbered-text layout (continuation lines extend the text; a line
    beginning "e.g." carries the SQL representation).
    """
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid instruction JSON: {exc}") from exc
        if not isinstance(doc, list) or not all(isinstance(e, dict) for e in doc):
            raise FormatError("instruction JSON must be a list of objects")
        return doc
    entries: list[dict] = []
    current: dict | None = None
    for line in text.splitlines():
        match = _NUMBERED.match(line.strip())
        if match:
            if current:
                entries.append(current)
            current = {"text": match.group(2).strip(), "sql_snippet": None}
        elif current is not None and line.strip():
            body = line.strip()
            if body.lower().startswith("e.g."):
                current["sql_snippet"] = body[4:].strip()
            else:
                current["text"] += " " + body
    if current:
        entries.append(current)
    return entries


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------


@dataclass
class BootstrapReport:
    examples_added: int = 0
    instructions_added: int = 0
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (entry, reason)


def bootstrap(logs, schema_src, docs, model) -> tuple[KnowledgeSet, BootstrapReport]:
    """Build a knowledge set from query logs, a schema source and documents.

    Unusable log entries or document entries are skipped and reported,
    never fatal. `schema_src` is a Database or a schema file path.
    """
    from . import retrieval
    from .database import Database
    from .schema import introspect, load_schema_file

    report = BootstrapReport()
    if isinstance(schema_src, Database):
        schema = introspect(schema_src)
    elif schema_src is not None:
        schema = load_schema_file(schema_src)
    else:
        schema = SchemaRepresentation()
    ks = KnowledgeSet(schema=schema)

    for sql in logs:
        try:
            example = decomposer.build_example(sql, nl_hint=None, model=model)
        except (ParseError, UnsupportedStatement) as exc:
            report.skipped.append((sql, f"unparsable: {exc}"))
            continue
        intent = retrieval.classify_intent(example.input_nl, ks, model)
        try:
            ks = add_example(ks, example, intent)
            report.examples_added += 1
        except DuplicateExample as exc:
            report.skipped.append((sql, str(exc)))

    for doc_path in docs:
        try:
            entries = parse_instruction_doc(Path(doc_path).read_text())
        except (OSError, FormatError) as exc:
            report.skipped.append((str(doc_path), str(exc)))
            continue
        for entry in entries:
            text = str(entry.get("text", "")).strip()
            if not text:
                report.skipped.append((str(doc_path), "entry with empty text"))
                continue
            instr = Instruction(
                id=str(entry.get("id") or next_instruction_id(ks)),
                text=text,
                sql_snippet=entry.get("sql_snippet"),
                intents=tuple(entry.get("intents", ())),
                source="document",
            )
            try:
                ks = add_instruction(ks, instr)
                report.instructions_added += 1
            except (DuplicateId, FormatError) as exc:
                report.skipped.append((str(doc_path), str(exc)))
    return ks, report
