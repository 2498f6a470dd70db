"""End-to-end demo on a synthetic sports warehouse with a scripted model.

Builds a throwaway workspace, bootstraps the knowledge set from one logged
query and an instruction document, answers a question, applies accept
feedback, and shows the promoted example winning retrieval on the re-ask.

Run: python3 scripts/demo.py
"""

import json
import tempfile
from pathlib import Path

from ctesql.adaptation import Feedback
from ctesql.config import PipelineConfig
from ctesql.database import Database
from ctesql.models import ScriptedProvider
from ctesql.pipeline import Engine, knowledge_summary, run_preprocess, run_query, submit_feedback

SEED = """
CREATE TABLE SPORTS_FINANCIALS (
    COUNTRY TEXT, SPORT_CATEGORY TEXT, FIN_MONTH TEXT, REVENUE INTEGER, COST INTEGER
);
CREATE TABLE SPORTS_VIEWERSHIP (COUNTRY TEXT, VIEW_MONTH TEXT, VIEWER_HOURS INTEGER);
INSERT INTO SPORTS_FINANCIALS VALUES
    ('UNITED STATES', 'BASKETBALL', '2023-01-15', 5200, 2100),
    ('UNITED STATES', 'BASKETBALL', '2023-04-15', 6100, 2300),
    ('UNITED STATES', 'FOOTBALL',   '2023-01-15', 8400, 3900),
    ('UNITED STATES', 'FOOTBALL',   '2023-04-15', 7900, 4100),
    ('CANADA',        'HOCKEY',     '2023-01-15', 4700, 1800),
    ('CANADA',        'HOCKEY',     '2023-04-15', 5300, 1900);
INSERT INTO SPORTS_VIEWERSHIP VALUES
    ('UNITED STATES', '2023-01-15', 910),
    ('UNITED STATES', '2023-04-15', 1040),
    ('CANADA',        '2023-01-15', 630),
    ('CANADA',        '2023-04-15', 700);
"""

LOGGED_QUERY = """\
WITH REVENUE_BY_SPORT AS (
  SELECT SPORT_CATEGORY, SUM(REVENUE) AS TOTAL_REVENUE
  FROM SPORTS_FINANCIALS
  WHERE COUNTRY = 'UNITED STATES'
  GROUP BY SPORT_CATEGORY
)
SELECT SPORT_CATEGORY, TOTAL_REVENUE
FROM REVENUE_BY_SPORT
ORDER BY TOTAL_REVENUE DESC
"""

INSTRUCTIONS = """\
1. Bucket months into quarters with TO_CHAR before aggregating.
   e.g. TO_CHAR(FIN_MONTH, 'YYYY"Q"Q') = '2023Q2'
2. Guard ratio denominators with NULLIF.
   e.g. CAST(REVENUE AS FLOAT) / NULLIF(VIEWER_HOURS, 0)
3. Filter to the requested country before aggregating.
   e.g. WHERE COUNTRY = 'UNITED STATES'
"""

DEMO_NL = "Which sport brings in the most quarterly revenue in the United States?"

DEMO_SQL = """\
WITH QUARTERLY AS (
  SELECT SPORT_CATEGORY, TO_CHAR(FIN_MONTH, 'YYYY"Q"Q') AS QTR, SUM(REVENUE) AS REVENUE
  FROM SPORTS_FINANCIALS
  WHERE COUNTRY = 'UNITED STATES'
  GROUP BY SPORT_CATEGORY, QTR
)
SELECT SPORT_CATEGORY, QTR, REVENUE
FROM QUARTERLY
ORDER BY REVENUE DESC
"""

SCRIPT = {
    "annotate": [
        json.dumps(
            {
                "input_nl": "Rank United States sports by total revenue.",
                "complex_terms": [],
                "cte_desc": ["Total revenue per United States sport"],
            }
        )
    ],
    "intent": ["revenue_ranking"],
    "reformulate": ["Rank United States sports by revenue per quarter of 2023."],
    "prune": [json.dumps({"irrelevant_tables": ["SPORTS_VIEWERSHIP"], "irrelevant_columns": []})],
    "plan": [
        "1. Bucket 2023 months into quarters per sport "
        "[TO_CHAR(FIN_MONTH, 'YYYY\"Q\"Q')]\n"
        "2. Sum revenue per sport and quarter for the United States\n"
        "3. Order sports by quarterly revenue, best first [ORDER BY REVENUE DESC]"
    ],
    "generate": [DEMO_SQL],
    "assess": ["PASS"],
}


def show(title: str, payload) -> None:
    print(f"\n=== {title} ===")
    print(json.dumps(payload, indent=2, default=str))


def main() -> None:
    with tempfile.TemporaryDirectory() as workdir:
        workspace = Path(workdir)
        db_path = workspace / "sports.db"
        with Database(db_path) as db:
            db.executescript(SEED)
        logs = workspace / "logs"
        logs.mkdir()
        (logs / "queries.sql").write_text(LOGGED_QUERY)
        docs = workspace / "docs"
        docs.mkdir()
        (docs / "instructions.txt").write_text(INSTRUCTIONS)

        config = PipelineConfig(knowledge_dir=str(workspace / "knowledge"), database=str(db_path))
        engine = Engine(config, provider=ScriptedProvider(SCRIPT))
        try:
            show("preprocess", run_preprocess(engine, logs_dir=logs, docs_dir=docs))

            response = run_query(engine, DEMO_NL)
            show(
                "query",
                {
                    "status": response.status,
                    "intent": response.intent,
                    "reformulated": response.reformulated,
                    "plan": [step["description"] for step in response.plan],
                    "sql": response.sql,
                    "columns": response.columns,
                    "preview": response.preview,
                    "model_calls": response.model_calls,
                },
            )

            version = submit_feedback(
                engine, Feedback(request_id=response.request_id, verdict="accept")
            )
            show("feedback", {"verdict": "accept", "knowledge_version": version})

            again = run_query(engine, DEMO_NL)
            show(
                "re-ask",
                {
                    "retrieved_examples": again.retrieval["examples"],
                    "knowledge": knowledge_summary(engine),
                },
            )
        finally:
            engine.close()


if __name__ == "__main__":
    main()
