"""Tests for feedback ingestion and instruction derivation."""

import hashlib
import json
from datetime import datetime

import pytest

from ctesql.adaptation import (
    Feedback,
    Journal,
    N_REJ_DEFAULT,
    RequestRecord,
    _inserted_ngrams,
    derive_instruction,
    ingest_feedback,
    record_execution_error,
    shared_correction_pattern,
    utc_now,
)
from ctesql.correction import ExecutionFeedback
from ctesql.errors import InvalidCorrection
from ctesql.models import ScriptedModel
from ctesql.sqlast import normalize_sql

from conftest import COST_PAIRS, REF_NL, REF_REFORMULATED

ACCEPTED_SQL = (
    "SELECT COUNTRY, SUM(REVENUE) AS TOTAL_REVENUE "
    "FROM SPORTS_FINANCIALS GROUP BY COUNTRY"
)


def make_record(sql=ACCEPTED_SQL, intent="revenue_total"):
    return RequestRecord(
        request_id="req_0001",
        nl=REF_NL,
        reformulated=REF_REFORMULATED,
        intent=intent,
        example_ids=["ex_0001"],
        instruction_ids=["instr_0002"],
        sql=sql,
        status="clean",
        knowledge_version=11,
        created_at=utc_now(),
    )


class TestRecords:
    def test_request_record_round_trip(self):
        record = make_record()
        doc = record.to_json()
        assert doc["request_id"] == "req_0001"
        assert doc["example_ids"] == ["ex_0001"]
        assert RequestRecord.from_json(doc) == record

    def test_from_json_ignores_unknown_keys(self):
        record = make_record()
        doc = record.to_json()
        doc["extra"] = "ignored"
        assert RequestRecord.from_json(doc) == record

    def test_feedback_defaults(self):
        fb = Feedback(request_id="req_0001", verdict="accept")
        assert fb.corrected_sql is None
        assert fb.note is None
        assert fb.source == "user"

    def test_utc_now_is_aware_iso(self):
        stamp = utc_now()
        parsed = datetime.fromisoformat(stamp)
        assert parsed.utcoffset() is not None
        assert parsed.utcoffset().total_seconds() == 0


class TestJournal:
    def test_append_then_entries(self, tmp_path):
        journal = Journal(tmp_path / "logs" / "rejections.ndjson")
        journal.append({"a": 1})
        journal.append({"b": "two"})
        assert journal.entries() == [{"a": 1}, {"b": "two"}]

    def test_missing_file_reads_empty(self, tmp_path):
        assert Journal(tmp_path / "absent.ndjson").entries() == []

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "log.ndjson"
        path.write_text('{"a": 1}\n\n{"b": 2}\n')
        assert Journal(path).entries() == [{"a": 1}, {"b": 2}]

    def test_append_only_across_handles(self, tmp_path):
        path = tmp_path / "log.ndjson"
        Journal(path).append({"a": 1})
        Journal(path).append({"b": 2})
        assert Journal(path).entries() == [{"a": 1}, {"b": 2}]


class TestIngestFeedback:
    def test_accept_promotes_final_sql(self, base_knowledge):
        ctx = make_record()
        fb = Feedback(request_id=ctx.request_id, verdict="accept")
        ks = ingest_feedback(fb, ctx, base_knowledge, ScriptedModel({}))
        assert ks.version == base_knowledge.version + 1
        assert len(ks.examples) == len(base_knowledge.examples) + 1
        promoted = ks.examples["ex_0002"]
        assert promoted.input_nl == ctx.nl
        assert normalize_sql(promoted.full_sql_query) == normalize_sql(ACCEPTED_SQL)
        assert "ex_0002" in ks.partitions["revenue_total"]

    def test_accept_duplicate_is_swallowed(self, base_knowledge):
        ctx = make_record()
        fb = Feedback(request_id=ctx.request_id, verdict="accept")
        once = ingest_feedback(fb, ctx, base_knowledge, ScriptedModel({}))
        twice = ingest_feedback(fb, ctx, once, ScriptedModel({}))
        assert twice is once

    def test_reject_with_correction_promotes_and_logs(self, base_knowledge, tmp_path):
        journal = Journal(tmp_path / "rejections.ndjson")
        original, corrected = COST_PAIRS[0]
        ctx = make_record(sql=original, intent="cost_change")
        fb = Feedback(
            request_id=ctx.request_id,
            verdict="reject",
            corrected_sql=corrected,
            note="costs should sort as savings",
        )
        ks = ingest_feedback(fb, ctx, base_knowledge, ScriptedModel({}), journal)
        assert ks.version == base_knowledge.version + 1
        promoted = ks.examples["ex_0002"]
        assert normalize_sql(promoted.full_sql_query) == normalize_sql(corrected)
        assert "ex_0002" in ks.partitions["cost_change"]
        [entry] = journal.entries()
        assert entry["request_id"] == "req_0001"
        assert entry["original_sql"] == original
        assert entry["corrected_sql"] == corrected
        assert entry["note"] == "costs should sort as savings"
        datetime.fromisoformat(entry["timestamp"])

    def test_bare_reject_logs_only(self, base_knowledge, tmp_path):
        journal = Journal(tmp_path / "rejections.ndjson")
        ctx = make_record()
        fb = Feedback(request_id=ctx.request_id, verdict="reject", note="wrong table")
        ks = ingest_feedback(fb, ctx, base_knowledge, ScriptedModel({}), journal)
        assert ks is base_knowledge
        [entry] = journal.entries()
        assert entry["corrected_sql"] is None
        assert entry["note"] == "wrong table"

    def test_reject_without_journal(self, base_knowledge):
        ctx = make_record()
        fb = Feedback(request_id=ctx.request_id, verdict="reject")
        assert ingest_feedback(fb, ctx, base_knowledge, ScriptedModel({})) is base_knowledge

    def test_invalid_correction_raises_before_logging(self, base_knowledge, tmp_path):
        journal = Journal(tmp_path / "rejections.ndjson")
        ctx = make_record()
        for bad in ("SELECT , FROM WHERE", "DELETE FROM SPORTS_FINANCIALS"):
            fb = Feedback(request_id=ctx.request_id, verdict="reject", corrected_sql=bad)
            with pytest.raises(InvalidCorrection):
                ingest_feedback(fb, ctx, base_knowledge, ScriptedModel({}), journal)
        assert journal.entries() == []

    def test_accept_without_promotable_sql(self, base_knowledge):
        # a failed request has no SQL worth promoting
        ctx = make_record(sql="")
        fb = Feedback(request_id=ctx.request_id, verdict="accept")
        with pytest.raises(InvalidCorrection):
            ingest_feedback(fb, ctx, base_knowledge, ScriptedModel({}))

    def test_unknown_verdict(self, base_knowledge):
        fb = Feedback(request_id="req_0001", verdict="maybe")
        with pytest.raises(ValueError):
            ingest_feedback(fb, make_record(), base_knowledge, ScriptedModel({}))


class TestInsertedNgrams:
    def test_multiplier_insertion_windows(self):
        # inserted run is [-, 1, *, (]; the all-op window [* (] is excluded
        grams = _inserted_ngrams(*COST_PAIRS[0])
        assert grams == {"-1", "-1 *", "-1 * (", "1 *", "1 * ("}
        assert "* (" not in grams

    def test_where_insertion_windows(self):
        grams = _inserted_ngrams("SELECT A FROM T", "SELECT A FROM T WHERE A > 0")
        assert grams == {"WHERE A > 0", "WHERE A >", "A > 0", "WHERE A", "A >", "> 0"}

    def test_identical_queries_yield_nothing(self):
        assert _inserted_ngrams(ACCEPTED_SQL, ACCEPTED_SQL) == set()

    def test_unparsable_input_yields_nothing(self):
        assert _inserted_ngrams("SELECT A FROM T", "SELECT 'unterminated FROM T") == set()
        assert _inserted_ngrams("SELECT 'unterminated", "SELECT A FROM T") == set()


class TestSharedCorrectionPattern:
    def test_multiplier_pairs_pick_longest_then_lex(self):
        # all grams tie on count; -1 * ( and 1 * ( tie on token length
        assert shared_correction_pattern(COST_PAIRS) == "-1 * ("

    def test_count_beats_length(self):
        pairs = [
            ("SELECT A FROM T", "SELECT A FROM T ORDER BY A LIMIT 5"),
            ("SELECT B FROM T", "SELECT B FROM T ORDER BY B LIMIT 5"),
            ("SELECT C FROM T", "SELECT C FROM T LIMIT 5"),
        ]
        assert shared_correction_pattern(pairs) == "LIMIT 5"

    def test_below_threshold_is_none(self):
        assert shared_correction_pattern(COST_PAIRS[:2]) is None
        assert shared_correction_pattern([]) is None

    def test_threshold_is_tunable(self):
        assert shared_correction_pattern(COST_PAIRS[:2], n_rej=2) == "-1 * ("

    def test_disjoint_corrections_share_nothing(self):
        pairs = [
            ("SELECT A FROM T", "SELECT A FROM T LIMIT 5"),
            ("SELECT B FROM T", "SELECT B FROM T WHERE B > 0"),
            ("SELECT C FROM T", "SELECT C, D FROM T"),
        ]
        assert shared_correction_pattern(pairs) is None


class TestDeriveInstruction:
    def test_derives_adaptation_instruction(self):
        model = ScriptedModel(
            {"derive": ["Multiply cost deltas by -1 so reductions rank as improvements."]}
        )
        instr = derive_instruction(COST_PAIRS, model)
        assert instr is not None
        assert instr.id == "adapt_" + hashlib.sha256(b"-1 * (").hexdigest()[:8]
        assert instr.id == "adapt_fe05175f"
        assert instr.sql_snippet == "-1 * ("
        assert instr.text == "Multiply cost deltas by -1 so reductions rank as improvements."
        assert instr.source == "adaptation"
        assert instr.intents == ()
        role, prompt = model.transcript[0]
        assert role == "derive"
        assert "Inserted pattern: -1 * (" in prompt
        assert prompt.count("- wrong:") == N_REJ_DEFAULT

    def test_too_few_rejections_skip_model(self):
        model = ScriptedModel({"derive": ["unused"]})
        assert derive_instruction(COST_PAIRS[:2], model) is None
        assert model.call_count == 0

    def test_no_shared_pattern(self):
        pairs = [
            ("SELECT A FROM T", "SELECT A FROM T LIMIT 5"),
            ("SELECT B FROM T", "SELECT B FROM T WHERE B > 0"),
            ("SELECT C FROM T", "SELECT C, D FROM T"),
        ]
        assert derive_instruction(pairs, ScriptedModel({"derive": ["unused"]})) is None

    def test_model_failure_yields_none(self):
        assert derive_instruction(COST_PAIRS, ScriptedModel({})) is None

    def test_blank_phrasing_yields_none(self):
        assert derive_instruction(COST_PAIRS, ScriptedModel({"derive": ["   "]})) is None

    def test_id_tracks_pattern_not_phrasing(self):
        first = derive_instruction(COST_PAIRS, ScriptedModel({"derive": ["one phrasing"]}))
        second = derive_instruction(COST_PAIRS, ScriptedModel({"derive": ["another"]}))
        assert first.id == second.id


class TestRecordExecutionError:
    def test_journal_entry_shape(self, tmp_path):
        journal = Journal(tmp_path / "errors.ndjson")
        feedback = ExecutionFeedback(kind="runtime_error", message="no such table: X")
        record_execution_error("req_0042", feedback, journal, version=11)
        [entry] = journal.entries()
        assert entry["request_id"] == "req_0042"
        assert entry["version"] == 11
        assert entry["kind"] == "runtime_error"
        assert entry["message"] == "no such table: X"
        datetime.fromisoformat(entry["timestamp"])

    def test_default_version(self, tmp_path):
        journal = Journal(tmp_path / "errors.ndjson")
        record_execution_error(
            "req_0042", ExecutionFeedback(kind="timeout", message="slow"), journal
        )
        assert journal.entries()[0]["version"] == 0
