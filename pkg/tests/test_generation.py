"""Plan building, prompt assembly and SQL generation tests."""

import pytest

from conftest import (
    NO_PRUNE,
    REF_PLAN,
    REF_REFORMULATED,
    GOLDEN_SQL,
    build_base_knowledge,
)
from ctesql.errors import UnparsableGeneration
from ctesql.generation import (
    PROMPT_HEADINGS,
    PSEUDO_SQL_THRESHOLD,
    CoTPlan,
    PlanStep,
    assemble_prompt,
    augment_with_pseudo_sql,
    build_plan,
    generate_sql,
    strip_model_sql,
)
from ctesql.knowledge import KnowledgeSet
from ctesql.models import ScriptedModel
from ctesql.retrieval import CanonicalQuery, RetrievalResult, reformulate, retrieve_examples, retrieve_instructions, prune_schema
from ctesql.sqlast import normalize_sql


def cq(text="alpha beta"):
    return CanonicalQuery(original=text, reformulated=text, intent="g", key_terms=())


def empty_rr():
    from ctesql.schema import SchemaRepresentation

    return RetrievalResult(examples=(), instructions=(), pruned_schema=SchemaRepresentation())


class TestBuildPlan:
    def test_numbered_response_parsed(self):
        model = ScriptedModel(
            {"plan": ["1. First step [SELECT 1]\n2. Second step\n3. Third [A > 5]"]}
        )
        plan = build_plan(cq(), empty_rr(), model)
        assert [s.description for s in plan.steps] == ["First step", "Second step", "Third"]
        assert [s.pseudo_sql for s in plan.steps] == ["SELECT 1", None, "A > 5"]

    def test_unnumbered_response_falls_back(self):
        plan = build_plan(cq(), empty_rr(), ScriptedModel({"plan": ["no numbers here"]}))
        assert len(plan.steps) == 1
        assert plan.steps[0].description.startswith("answer the query directly")

    def test_model_failure_falls_back(self):
        plan = build_plan(cq(), empty_rr(), ScriptedModel({}))
        assert len(plan.steps) == 1

    def test_empty_plan_rejected(self):
        with pytest.raises(ValueError):
            CoTPlan(steps=())


class TestAugment:
    def make_examples(self):
        from ctesql.decomposer import build_example

        return [
            build_example(
                "SELECT SPORT_CATEGORY, REVENUE FROM SPORTS_FINANCIALS "
                "WHERE SPORT_RANK <= 5 ORDER BY SPORT_RANK",
                nl_hint="top sports",
                model=ScriptedModel({}),
            )
        ]

    def test_matching_step_gains_pseudo_sql(self):
        plan = CoTPlan(steps=(PlanStep(description="rank sports and keep sport_rank <= 5"),))
        out = augment_with_pseudo_sql(plan, self.make_examples())
        assert out.steps[0].pseudo_sql == "SPORT_RANK <= 5"

    def test_existing_pseudo_sql_untouched(self):
        plan = CoTPlan(
            steps=(PlanStep(description="rank sports and keep sport_rank <= 5",
                            pseudo_sql="KEEP ME"),)
        )
        out = augment_with_pseudo_sql(plan, self.make_examples())
        assert out.steps[0].pseudo_sql == "KEEP ME"

    def test_low_similarity_left_alone(self):
        plan = CoTPlan(steps=(PlanStep(description="completely unrelated wording"),))
        out = augment_with_pseudo_sql(plan, self.make_examples())
        assert out.steps[0].pseudo_sql is None
        assert PSEUDO_SQL_THRESHOLD == 0.2

    def test_steps_never_reordered_or_dropped(self):
        plan = CoTPlan(
            steps=tuple(PlanStep(description=f"step {i}") for i in range(4))
        )
        out = augment_with_pseudo_sql(plan, self.make_examples())
        assert [s.description for s in out.steps] == [f"step {i}" for i in range(4)]


def one_step_plan():
    return CoTPlan(steps=(PlanStep(description="answer"),))


class TestAssemblePrompt:
    def test_headings_fixed_order(self):
        assert PROMPT_HEADINGS == (
            "### Input Query",
            "### Schema Representation",
            "### Intent-specific Instructions",
            "### Example Decompositions",
            "### Reasoning Plan",
        )
        bundle = assemble_prompt(cq(), empty_rr(), one_step_plan(), KnowledgeSet())
        positions = [bundle.text.find(h) for h in PROMPT_HEADINGS]
        assert all(p >= 0 for p in positions)
        assert positions == sorted(positions)

    def test_empty_sections_marked_none(self):
        bundle = assemble_prompt(cq(), empty_rr(), one_step_plan(), KnowledgeSet())
        assert "### Schema Representation\n(none)" in bundle.text
        assert "### Intent-specific Instructions\n(none)" in bundle.text
        assert "### Example Decompositions\n(none)" in bundle.text

    def test_byte_deterministic(self, db):
        ks = build_base_knowledge(db)
        script = {
            "reformulate": [REF_REFORMULATED],
            "intent": ["ranking_change"],
            "prune": [NO_PRUNE],
            "plan": [REF_PLAN],
        }

        def build_once():
            model = ScriptedModel(script)
            canonical = reformulate("q", ks, model)
            ranked = retrieve_examples(canonical, ks)
            chosen = [ks.examples[i] for i, _ in ranked]
            instructions = retrieve_instructions(canonical, chosen, ks)
            pruned = prune_schema(canonical, chosen, ks.schema, model)
            rr = RetrievalResult(examples=ranked, instructions=instructions, pruned_schema=pruned)
            plan = build_plan(canonical, rr, model)
            return assemble_prompt(canonical, rr, plan, ks).text

        first = build_once()
        assert all(build_once() == first for _ in range(4))

    def test_instructions_numbered_with_snippets(self, db):
        ks = build_base_knowledge(db)
        canonical = cq("bucket months into fiscal quarters")
        ranked = retrieve_instructions(canonical, [], ks, k=2)
        rr = RetrievalResult(examples=(), instructions=ranked, pruned_schema=ks.schema)
        bundle = assemble_prompt(canonical, rr, one_step_plan(), ks)
        section = bundle.text.split("### Intent-specific Instructions\n")[1].split("\n###")[0]
        assert section.startswith("1. ")
        assert "   e.g. " in section

    def test_examples_rendered_as_json(self, db):
        ks = build_base_knowledge(db)
        rr = RetrievalResult(
            examples=(("ex_0001", 1.0),), instructions=(), pruned_schema=ks.schema
        )
        bundle = assemble_prompt(cq(), rr, one_step_plan(), ks)
        assert '"input_nl": "Top 5 sports by change in RPV from 2021 to 2022"' in bundle.text
        assert '"full_sql_query"' in bundle.text

    def test_plan_block_includes_pseudo_sql_brackets(self):
        plan = CoTPlan(steps=(PlanStep(description="filter", pseudo_sql="A > 1"),))
        bundle = assemble_prompt(cq(), empty_rr(), plan, KnowledgeSet())
        assert "### Reasoning Plan\n1. filter [A > 1]" in bundle.text


class TestStripModelSql:
    def test_plain_text(self):
        assert strip_model_sql("SELECT 1;") == "SELECT 1"

    def test_fenced_block(self):
        assert strip_model_sql("```sql\nSELECT 1\n```") == "SELECT 1"

    def test_prose_around_fence_ignored(self):
        raw = "Here is the query:\n```sql\nSELECT A FROM T\n```\nHope that helps."
        assert strip_model_sql(raw) == "SELECT A FROM T"


class TestGenerateSql:
    def bundle(self):
        return assemble_prompt(cq(), empty_rr(), one_step_plan(), KnowledgeSet())

    def test_first_try_success(self):
        model = ScriptedModel({"generate": ["SELECT a FROM t"]})
        candidate = generate_sql(self.bundle(), model)
        assert candidate.sql == "SELECT A FROM T"
        assert candidate.provenance == ("generate", 1)
        assert model.call_count == 1

    def test_one_reask_with_parse_error(self):
        model = ScriptedModel({"generate": ["SELECT ((broken", "SELECT a FROM t"]})
        candidate = generate_sql(self.bundle(), model)
        assert candidate.provenance == ("generate", 2)
        assert model.call_count == 2
        assert "did not parse" in model.transcript[1][1]

    def test_two_failures_raise(self):
        model = ScriptedModel({"generate": ["SELECT ((broken"]})
        with pytest.raises(UnparsableGeneration):
            generate_sql(self.bundle(), model)
        assert model.call_count == 2

    def test_golden_sql_normalizes(self):
        model = ScriptedModel({"generate": [f"```sql\n{GOLDEN_SQL}```"]})
        candidate = generate_sql(self.bundle(), model)
        assert candidate.sql == normalize_sql(GOLDEN_SQL)
