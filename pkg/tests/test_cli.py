"""Tests for the command-line surface."""

import json
import shutil

import pytest
import yaml
from click.testing import CliRunner

from ctesql.cli import main
from ctesql.database import Database
from ctesql.knowledge import load as load_knowledge
from ctesql.sqlast import normalize_sql

from conftest import (
    FIXTURES,
    GOLDEN_SQL,
    REF_NL,
    SEED_SQL,
    STORED_ANNOTATION,
    STORED_SQL,
    reference_script,
)


@pytest.fixture
def workspace(tmp_path):
    """Config, seeded database file, logs, docs and a scripted model."""
    db_path = tmp_path / "sports.db"
    with Database(db_path) as db:
        db.executescript(SEED_SQL)
    logs_dir = tmp_path / "logs"
    logs_dir.mkdir()
    (logs_dir / "queries.sql").write_text(STORED_SQL)
    docs_dir = tmp_path / "docs"
    docs_dir.mkdir()
    shutil.copy(FIXTURES / "instructions.txt", docs_dir / "instructions.txt")
    script = reference_script()
    script["annotate"] = [json.dumps(STORED_ANNOTATION)]
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps(script))
    config_path = tmp_path / "config.yaml"
    config_path.write_text(
        yaml.safe_dump(
            {
                "knowledge_dir": str(tmp_path / "knowledge"),
                "database": str(db_path),
                "model": {"provider": "scripted", "script": str(script_path)},
            }
        )
    )
    return tmp_path


def invoke(*args):
    return CliRunner().invoke(main, list(args), catch_exceptions=False)


class TestCliFlow:
    def test_preprocess_query_feedback(self, workspace):
        config = str(workspace / "config.yaml")

        r = invoke(
            "--config", config,
            "preprocess",
            "--logs", str(workspace / "logs"),
            "--docs", str(workspace / "docs"),
        )
        assert r.exit_code == 0, r.output
        report = json.loads(r.output)
        assert report["examples"] == 1
        assert report["instructions"] == 10
        assert report["version"] == 11

        r = invoke("--config", config, "query", REF_NL)
        assert r.exit_code == 0, r.output
        response = json.loads(r.output)
        assert response["status"] == "clean"
        assert normalize_sql(response["sql"]) == normalize_sql(GOLDEN_SQL)

        r = invoke("--config", config, "feedback", response["request_id"], "--accept")
        assert r.exit_code == 0, r.output
        assert json.loads(r.output) == {"knowledge_version": 12}
        assert load_knowledge(workspace / "knowledge").version == 12

    def test_reject_with_sql_file(self, workspace):
        config = str(workspace / "config.yaml")
        invoke("--config", config, "preprocess", "--logs", str(workspace / "logs"),
               "--docs", str(workspace / "docs"))
        response = json.loads(invoke("--config", config, "query", REF_NL).output)
        sql_file = workspace / "fix.sql"
        sql_file.write_text("SELECT COUNTRY FROM SPORTS_FINANCIALS GROUP BY COUNTRY")
        r = invoke(
            "--config", config,
            "feedback", response["request_id"], "--reject", "--sql", str(sql_file),
        )
        assert r.exit_code == 0, r.output
        assert json.loads(r.output) == {"knowledge_version": 12}


class TestCliErrors:
    def test_failed_query_exits_nonzero(self, workspace, tmp_path):
        config = str(workspace / "config.yaml")
        invoke("--config", config, "preprocess", "--logs", str(workspace / "logs"),
               "--docs", str(workspace / "docs"))
        script = reference_script()
        script["generate"] = ["nope", "still nope"]
        script_path = tmp_path / "bad_script.json"
        script_path.write_text(json.dumps(script))
        bad_config = tmp_path / "bad_config.yaml"
        bad_config.write_text(
            yaml.safe_dump(
                {
                    "knowledge_dir": str(workspace / "knowledge"),
                    "database": str(workspace / "sports.db"),
                    "model": {"provider": "scripted", "script": str(script_path)},
                }
            )
        )
        r = CliRunner().invoke(main, ["--config", str(bad_config), "query", REF_NL])
        assert r.exit_code == 1
        assert json.loads(r.output)["status"] == "failed"

    def test_feedback_requires_verdict(self, workspace):
        r = CliRunner().invoke(
            main, ["--config", str(workspace / "config.yaml"), "feedback", "req_x"]
        )
        assert r.exit_code == 2
        assert "--accept or --reject" in r.output

    def test_feedback_unknown_request(self, workspace):
        config = str(workspace / "config.yaml")
        invoke("--config", config, "preprocess", "--logs", str(workspace / "logs"),
               "--docs", str(workspace / "docs"))
        r = CliRunner().invoke(main, ["--config", config, "feedback", "missing", "--accept"])
        assert r.exit_code == 1
        assert "Error" in r.output

    def test_preprocess_without_inputs_fails(self, tmp_path):
        db_path = tmp_path / "empty.db"
        Database(db_path).close()
        script_path = tmp_path / "script.json"
        script_path.write_text(json.dumps({}))
        config_path = tmp_path / "config.yaml"
        config_path.write_text(
            yaml.safe_dump(
                {
                    "knowledge_dir": str(tmp_path / "knowledge"),
                    "database": str(db_path),
                    "model": {"provider": "scripted", "script": str(script_path)},
                }
            )
        )
        r = CliRunner().invoke(main, ["--config", str(config_path), "preprocess"])
        assert r.exit_code == 1
        assert "no usable inputs" in r.output

    def test_bad_config_reported(self, tmp_path):
        config_path = tmp_path / "config.yaml"
        config_path.write_text("mystery: 1\n")
        r = CliRunner().invoke(main, ["--config", str(config_path), "query", "x"])
        assert r.exit_code != 0
