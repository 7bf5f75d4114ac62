"""Command line entry points: serve the API, replay a session log, run evals."""

from __future__ import annotations

import json
from pathlib import Path

import click
import uvicorn

from modiste.errors import CorpusError
from modiste.evalharness import (
    default_corpus_path,
    default_scenario_path,
    emit_report,
    eval_backend,
    load_corpus,
    score_classification,
    score_splitting,
)
from modiste.server import create_app
from modiste.session import Engine, replay_events
from modiste.store import EventLog


@click.group()
def main():
    """Conversational fashion photo editing engine."""


@main.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="JSON config with storeRoot, backends, scenario, planner settings.",
)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, type=int, show_default=True)
def serve(config_path: Path, host: str, port: int):
    """Run the HTTP API (and the web chat, when its build is present)."""
    config = json.loads(config_path.read_text(encoding="utf-8"))
    base_dir = config_path.resolve().parent
    engine = Engine.from_config(config, base_dir=base_dir)
    dist = Path(config.get("frontendDist", "frontend/dist"))
    if not dist.is_absolute():
        dist = base_dir / dist
    app = create_app(engine, frontend_dist=dist if dist.is_dir() else None)
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.argument(
    "session_log", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
def replay(session_log: Path):
    """Reconstruct a session from its event log and print the transcript."""
    events = EventLog(session_log).read_all()
    folded = replay_events(events)
    click.echo(f"session: {session_log.stem}")
    click.echo(f"state: {folded['state']}")
    if folded["currentImageRef"]:
        click.echo(f"current image: {folded['currentImageRef']}")
    click.echo(f"events: {len(events)}")
    for turn in folded["turns"]:
        suffix = f"  [image {turn.image_ref}]" if turn.image_ref else ""
        click.echo(f"{turn.role:>9}: {turn.text}{suffix}")


@main.command(name="eval")
@click.option(
    "--corpus",
    "corpus_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Requirement corpus (JSON lines); defaults to the shipped 220 cases.",
)
@click.option(
    "--backend",
    "backend_name",
    default="scripted",
    show_default=True,
    help="'fallback' (deterministic), 'mock' (unscripted), 'scripted' "
    "(shipped scenario), or a path to a scenario file.",
)
@click.option(
    "--task",
    "task_name",
    type=click.Choice(["split", "classify"]),
    default="split",
    show_default=True,
)
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["table", "json"]),
    default="table",
    show_default=True,
)
def eval_command(corpus_path: Path | None, backend_name: str, task_name: str, fmt: str):
    """Score requirement splitting or clause classification on a corpus.

    Low accuracy is a result, not an error: the exit code is nonzero only
    when the corpus itself is malformed.
    """
    try:
        cases = load_corpus(corpus_path or default_corpus_path())
    except CorpusError as exc:
        raise click.ClickException(str(exc)) from exc
    choice = str(default_scenario_path()) if backend_name == "scripted" else backend_name
    if choice not in ("fallback", "mock") and not Path(choice).is_file():
        raise click.UsageError(f"--backend must name a mode or a scenario file, got {backend_name!r}")
    with eval_backend(choice) as backend:
        if task_name == "split":
            report = score_splitting(cases, backend.split, backend.label)
        else:
            report = score_classification(cases, backend.classify, backend.label)
    click.echo(emit_report(report, fmt))


if __name__ == "__main__":
    main()
