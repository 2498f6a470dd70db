"""Command-line surface: preprocess, query, feedback, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .adaptation import Feedback
from .config import load_config
from .errors import CtesqlError
from .pipeline import Engine, run_preprocess, run_query, submit_feedback


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Pipeline config file (YAML or JSON).")
@click.pass_context
def main(ctx, config_path):
    """Text-to-SQL engine with CTE decomposition and knowledge retrieval."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = load_config(config_path)


def _engine(ctx) -> Engine:
    return Engine(ctx.obj["config"])


@main.command()
@click.option("--logs", type=click.Path(exists=True), default=None, help="A .sql log file or a directory of them.")
@click.option("--docs", type=click.Path(exists=True), default=None, help="An instruction document or a directory of them.")
@click.pass_context
def preprocess(ctx, logs, docs):
    """Bootstrap the knowledge set from query logs and documents."""
    engine = _engine(ctx)
    try:
        report = run_preprocess(engine, logs_dir=logs, docs_dir=docs)
    except CtesqlError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(report, indent=2))


@main.command()
@click.argument("nl")
@click.pass_context
def query(ctx, nl):
    """Run one natural-language query through the pipeline."""
    engine = _engine(ctx)
    response = run_query(engine, nl)
    click.echo(json.dumps(response.to_json(), indent=2))
    if response.status == "failed":
        sys.exit(1)


@main.command()
@click.argument("request_id")
@click.option("--accept", "verdict", flag_value="accept")
@click.option("--reject", "verdict", flag_value="reject")
@click.option("--sql", "sql_file", type=click.Path(exists=True), default=None,
              help="File holding corrected SQL for a reject.")
@click.option("--note", default=None)
@click.pass_context
def feedback(ctx, request_id, verdict, sql_file, note):
    """Send an accept/reject verdict for a completed request."""
    if verdict is None:
        raise click.UsageError("pass --accept or --reject")
    corrected = Path(sql_file).read_text() if sql_file else None
    engine = _engine(ctx)
    try:
        version = submit_feedback(
            engine,
            Feedback(request_id=request_id, verdict=verdict, corrected_sql=corrected, note=note),
        )
    except CtesqlError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps({"knowledge_version": version}))


@main.command()
@click.option("--port", type=int, default=8080)
@click.option("--host", default="127.0.0.1")
@click.pass_context
def serve(ctx, port, host):
    """Serve the /v1 JSON API."""
    from .service import serve as serve_app

    serve_app(_engine(ctx), host=host, port=port)


if __name__ == "__main__":
    main()
