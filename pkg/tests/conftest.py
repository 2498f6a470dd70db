"""Shared fixtures: seeded warehouse, reference scenario, scripted models."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import settings

from ctesql.config import PipelineConfig
from ctesql.database import Database
from ctesql.knowledge import bootstrap
from ctesql.models import ScriptedModel, ScriptedProvider
from ctesql.pipeline import Engine

settings.register_profile("suite", deadline=None, derandomize=True)
settings.load_profile("suite")

FIXTURES = Path(__file__).parent / "fixtures"

COUNTRIES = {
    "UNITED STATES": ["BASKETBALL", "FOOTBALL", "SOCCER", "BASEBALL", "HOCKEY", "TENNIS", "GOLF"],
    "CANADA": ["HOCKEY", "BASKETBALL", "SOCCER"],
    "UNITED KINGDOM": ["SOCCER", "TENNIS"],
}
COUNTRY_BASE = {"UNITED STATES": 1000, "CANADA": 20000, "UNITED KINGDOM": 30000}


def seed_statements() -> list[str]:
    # deterministic arithmetic rows; revenue and cost are unique per row
    stmts = [
        "CREATE TABLE SPORTS_FINANCIALS ("
        "COUNTRY TEXT, SPORT_CATEGORY TEXT, FIN_MONTH TEXT, REVENUE INTEGER, COST INTEGER)",
        "CREATE TABLE SPORTS_VIEWERSHIP ("
        "COUNTRY TEXT, VIEW_MONTH TEXT, VIEWER_HOURS INTEGER, "
        "FOREIGN KEY (COUNTRY) REFERENCES SPORTS_FINANCIALS (COUNTRY))",
    ]
    for country, sports in COUNTRIES.items():
        base = COUNTRY_BASE[country]
        for i, sport in enumerate(sports):
            for m in range(1, 7):
                revenue = base + 137 * i + 11 * m
                cost = base // 2 + 61 * i + 7 * m
                stmts.append(
                    "INSERT INTO SPORTS_FINANCIALS VALUES "
                    f"('{country}', '{sport}', '2023-{m:02d}-15', {revenue}, {cost})"
                )
        for m in range(1, 7):
            hours = 5000 + base // 100 + 83 * m
            stmts.append(
                "INSERT INTO SPORTS_VIEWERSHIP VALUES "
                f"('{country}', '2023-{m:02d}-15', {hours})"
            )
    return stmts


SEED_SQL = ";\n".join(seed_statements()) + ";\n"

REF_NL = (
    "Identify the top 5 sports associations with the best and worst "
    "quarter-over-quarter financial performance in the United States for Q2 2023."
)
REF_REFORMULATED = (
    "Rank United States sports by revenue per viewer hour shift between "
    "2023 Q1 and 2023 Q2, returning the five best and five worst."
)
STORED_NL = "Top 5 sports by change in RPV from 2021 to 2022"

GOLDEN_SQL = """\
WITH FINANCIALS AS (
  SELECT
    COUNTRY,
    SPORT_CATEGORY,
    SUM(CASE WHEN TO_CHAR(FIN_MONTH, 'YYYY"Q"Q') = '2023Q1' THEN REVENUE ELSE 0 END) AS REVENUE_2023Q1,
    SUM(CASE WHEN TO_CHAR(FIN_MONTH, 'YYYY"Q"Q') = '2023Q2' THEN REVENUE ELSE 0 END) AS REVENUE_2023Q2
  FROM
    SPORTS_FINANCIALS
  WHERE
    TO_CHAR(FIN_MONTH, 'YYYY"Q"Q') IN ('2023Q1', '2023Q2')
    AND COUNTRY = 'UNITED STATES'
  GROUP BY
    COUNTRY,
    SPORT_CATEGORY
), VIEWERSHIP AS (
  SELECT
    COUNTRY,
    SUM(CASE WHEN TO_CHAR(VIEW_MONTH, 'YYYY"Q"Q') = '2023Q1' THEN VIEWER_HOURS ELSE 0 END) AS VIEWER_HOURS_2023Q1,
    SUM(CASE WHEN TO_CHAR(VIEW_MONTH, 'YYYY"Q"Q') = '2023Q2' THEN VIEWER_HOURS ELSE 0 END) AS VIEWER_HOURS_2023Q2
  FROM
    SPORTS_VIEWERSHIP
  WHERE
    TO_CHAR(VIEW_MONTH, 'YYYY"Q"Q') IN ('2023Q1', '2023Q2')
    AND COUNTRY = 'UNITED STATES'
  GROUP BY
    COUNTRY
), CALCULATIONS AS (
  SELECT
    f.SPORT_CATEGORY,
    CAST(f.REVENUE_2023Q2 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2023Q2, 0) AS RPV,
    CAST(f.REVENUE_2023Q1 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2023Q1, 0) AS PRIOR_QTR_RPV,
    -1 * ((CAST(f.REVENUE_2023Q2 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2023Q2, 0)) - (CAST(f.REVENUE_2023Q1 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2023Q1, 0))) AS RPV_CHANGE,
    (-1 * ((CAST(f.REVENUE_2023Q2 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2023Q2, 0)) - (CAST(f.REVENUE_2023Q1 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2023Q1, 0)))) * NULLIF(v.VIEWER_HOURS_2023Q2, 0) as IMPACT,
    ROW_NUMBER() OVER (PARTITION BY f.COUNTRY ORDER BY (-1 * ((CAST(f.REVENUE_2023Q2 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2023Q2, 0)) - (CAST(f.REVENUE_2023Q1 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2023Q1, 0)))) DESC) AS SPORT_RANK,
    ROW_NUMBER() OVER (PARTITION BY f.COUNTRY ORDER BY (-1 * ((CAST(f.REVENUE_2023Q2 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2023Q2, 0)) - (CAST(f.REVENUE_2023Q1 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2023Q1, 0)))) ASC) AS WORST_SPORT_RANK
  FROM
    FINANCIALS f
  JOIN
    VIEWERSHIP v ON f.COUNTRY = v.COUNTRY
)
SELECT
  SPORT_RANK, SPORT_CATEGORY, RPV, PRIOR_QTR_RPV, RPV_CHANGE, IMPACT
FROM
  CALCULATIONS
WHERE
  SPORT_RANK <= 5 OR WORST_SPORT_RANK <= 5
ORDER BY
  SPORT_RANK;
"""

STORED_SQL = """\
WITH FINANCIALS AS (
  SELECT
    COUNTRY,
    SPORT_CATEGORY,
    SUM(CASE WHEN TO_CHAR(FIN_MONTH, 'YYYY') = '2021' THEN REVENUE ELSE 0 END) AS REVENUE_2021,
    SUM(CASE WHEN TO_CHAR(FIN_MONTH, 'YYYY') = '2022' THEN REVENUE ELSE 0 END) AS REVENUE_2022
  FROM SPORTS_FINANCIALS
  WHERE TO_CHAR(FIN_MONTH, 'YYYY') IN ('2021', '2022')
  GROUP BY COUNTRY, SPORT_CATEGORY
), VIEWERSHIP AS (
  SELECT
    COUNTRY,
    SUM(CASE WHEN TO_CHAR(VIEW_MONTH, 'YYYY') = '2021' THEN VIEWER_HOURS ELSE 0 END) AS VIEWER_HOURS_2021,
    SUM(CASE WHEN TO_CHAR(VIEW_MONTH, 'YYYY') = '2022' THEN VIEWER_HOURS ELSE 0 END) AS VIEWER_HOURS_2022
  FROM SPORTS_VIEWERSHIP
  WHERE TO_CHAR(VIEW_MONTH, 'YYYY') IN ('2021', '2022')
  GROUP BY COUNTRY
), CALCULATIONS AS (
  SELECT
    f.SPORT_CATEGORY,
    CAST(f.REVENUE_2022 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2022, 0) - CAST(f.REVENUE_2021 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2021, 0) AS RPV_CHANGE,
    ROW_NUMBER() OVER (ORDER BY CAST(f.REVENUE_2022 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2022, 0) - CAST(f.REVENUE_2021 AS FLOAT) / NULLIF(v.VIEWER_HOURS_2021, 0) DESC) AS SPORT_RANK
  FROM FINANCIALS f
  JOIN VIEWERSHIP v ON f.COUNTRY = v.COUNTRY
)
SELECT SPORT_RANK, SPORT_CATEGORY, RPV_CHANGE
FROM CALCULATIONS
WHERE SPORT_RANK <= 5
ORDER BY SPORT_RANK
"""

STORED_ANNOTATION = {
    "input_nl": STORED_NL,
    "complex_terms": [
        "RPV: revenue per viewer hour, its SQL representation is "
        "CAST(REVENUE AS FLOAT) / NULLIF(VIEWER_HOURS, 0)"
    ],
    "cte_desc": [
        "Yearly revenue per country and sport for 2021 and 2022",
        "Yearly viewer hours per country",
        "RPV change per sport ranked best to worst",
    ],
}

REF_PLAN = (
    "1. Aggregate 2023 Q1 and Q2 revenue per sport for the United States "
    "[SUM(CASE WHEN TO_CHAR(FIN_MONTH, 'YYYY\"Q\"Q') = '2023Q2' THEN REVENUE ELSE 0 END)]\n"
    "2. Aggregate 2023 Q1 and Q2 viewer hours for the United States "
    "[SUM(CASE WHEN TO_CHAR(VIEW_MONTH, 'YYYY\"Q\"Q') = '2023Q2' THEN VIEWER_HOURS ELSE 0 END)]\n"
    "3. Compute revenue per viewer hour for each quarter and rank the change in both directions\n"
    "4. Keep sports ranked in the top 5 from either direction and order by best rank "
    "[SPORT_RANK <= 5 OR WORST_SPORT_RANK <= 5]"
)

NO_PRUNE = json.dumps({"irrelevant_tables": [], "irrelevant_columns": []})

# three rejections whose corrections all insert the same -1 * ( multiplier
COST_PAIRS = [
    (
        "SELECT SPORT_CATEGORY, MAX(COST) - MIN(COST) AS COST_CHANGE "
        "FROM SPORTS_FINANCIALS GROUP BY SPORT_CATEGORY",
        "SELECT SPORT_CATEGORY, -1 * (MAX(COST) - MIN(COST)) AS COST_CHANGE "
        "FROM SPORTS_FINANCIALS GROUP BY SPORT_CATEGORY",
    ),
    (
        "SELECT COUNTRY, SUM(COST) - SUM(REVENUE) AS NET_COST "
        "FROM SPORTS_FINANCIALS GROUP BY COUNTRY",
        "SELECT COUNTRY, -1 * (SUM(COST) - SUM(REVENUE)) AS NET_COST "
        "FROM SPORTS_FINANCIALS GROUP BY COUNTRY",
    ),
    (
        "SELECT FIN_MONTH, COST - REVENUE AS MONTHLY_COST FROM SPORTS_FINANCIALS",
        "SELECT FIN_MONTH, -1 * (COST - REVENUE) AS MONTHLY_COST FROM SPORTS_FINANCIALS",
    ),
]


def reference_script() -> dict[str, list]:
    return {
        "reformulate": [REF_REFORMULATED],
        "intent": ["ranking_change"],
        "prune": [NO_PRUNE],
        "plan": [REF_PLAN],
        "generate": [GOLDEN_SQL],
        "assess": ["PASS"],
    }


def bootstrap_model() -> ScriptedModel:
    return ScriptedModel(
        {
            "annotate": [json.dumps(STORED_ANNOTATION)],
            "intent": ["ranking_change"],
        }
    )


def build_base_knowledge(db: Database):
    ks, report = bootstrap(
        [STORED_SQL], db, [FIXTURES / "instructions.txt"], bootstrap_model()
    )
    assert not report.skipped
    return ks


@pytest.fixture
def db():
    with Database() as handle:
        handle.executescript(SEED_SQL)
        yield handle


@pytest.fixture
def base_knowledge(db):
    return build_base_knowledge(db)


class SequencedProvider:
    """Hands out one scripted client per request, in order; repeats the last."""

    def __init__(self, scripts: list[dict]):
        self.scripts = list(scripts)
        self.served = 0

    def for_request(self) -> ScriptedModel:
        idx = min(self.served, len(self.scripts) - 1)
        self.served += 1
        return ScriptedModel(self.scripts[idx])


@pytest.fixture
def engine_factory(tmp_path, db):
    engines = []
    counter = iter(range(1000))

    def make(script=None, provider=None, preload=True, **overrides):
        from ctesql.knowledge import persist

        kdir = tmp_path / f"knowledge_{next(counter)}"
        if preload:
            persist(build_base_knowledge(db), kdir)
        config = PipelineConfig(knowledge_dir=str(kdir), **overrides)
        engine = Engine(config, provider=provider or ScriptedProvider(script or {}))
        engine.db.executescript(SEED_SQL)
        engines.append(engine)
        return engine

    yield make
    for engine in engines:
        engine.close()
