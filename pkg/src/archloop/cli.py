"""Command-line entry points: the HTTP server, the exam benchmark, and
the bundled example subjects."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .api import create_app
from .certbench import ModelParams, load_question_set, run_benchmark
from .engine import Engine, example_seeds
from .gateway import gateway_from_env


@click.group()
def main() -> None:
    """Cloud architecture design support engine."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True, type=int)
@click.option(
    "--data-dir",
    default="./archloop-data",
    show_default=True,
    type=click.Path(file_okay=False),
    help="Directory for session journals.",
)
@click.option(
    "--replay",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Serve from a replay cassette instead of a live provider.",
)
@click.option(
    "--record",
    type=click.Path(dir_okay=False),
    default=None,
    help="Record live exchanges into a cassette file.",
)
@click.option("--model", default=None, help="Override the default model.")
@click.option(
    "--token",
    default=None,
    help="Static bearer token (defaults to ARCHLOOP_API_TOKEN).",
)
def serve(
    host: str,
    port: int,
    data_dir: str,
    replay: str | None,
    record: str | None,
    model: str | None,
    token: str | None,
) -> None:
    """Run the HTTP service."""
    import uvicorn

    gateway = gateway_from_env(replay=replay, record=record, model=model)
    engine = Engine(gateway, data_dir)
    loaded = engine.load_existing()
    if loaded:
        click.echo(f"loaded {len(loaded)} existing session(s)")
    app = create_app(engine, api_token=token)
    uvicorn.run(app, host=host, port=port)


@main.command()
def seeds() -> None:
    """Print the bundled example session subjects."""
    for seed in example_seeds():
        click.echo(f"[{seed['id']}] {seed['scenario']}")
        click.echo(f"    {seed['subject']}")


@main.group()
def bench() -> None:
    """Exam benchmark harness."""


@bench.command("run")
@click.option(
    "--questions",
    "questions_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Question set file (YAML or JSON).",
)
@click.option("--model", default=None, help="Model name (default from env).")
@click.option(
    "--replay",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Grade from a replay cassette instead of a live provider.",
)
@click.option(
    "--out",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write the full report as JSON.",
)
@click.option("--parallelism", default=1, show_default=True, type=int)
@click.option("--temperature", default=0.0, show_default=True, type=float)
def bench_run(
    questions_path: str,
    model: str | None,
    replay: str | None,
    out: str | None,
    parallelism: int,
    temperature: float,
) -> None:
    """Grade a model on a question set and print the accuracy table."""
    questions = load_question_set(questions_path)
    gateway = gateway_from_env(replay=replay, model=model)
    report = run_benchmark(
        questions,
        ModelParams(model=gateway.model, temperature=temperature),
        gateway,
        parallelism=parallelism,
        set_name=Path(questions_path).stem,
    )
    click.echo(report.render_table(), nl=False)
    if out:
        Path(out).write_text(
            json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        click.echo(f"report written to {out}")
    if report.incomplete:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
