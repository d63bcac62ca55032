"""Command-line interface.

Five subcommands cover the full workflow:

    eventlens ingest  -- validate a dataset file and print the accounting
    eventlens run     -- execute the pipeline over a dataset
    eventlens score   -- grade a predictions file against ground truth
    eventlens compare -- net error change between two scored runs
    eventlens report  -- render summaries as tables + figures

Exit codes: 0 ok, 1 completed with warnings (exclusions, degraded stages,
scoring skips), 2 fatal.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import Config, load_config
from .metrics import COMBOS, PROFILES
from .report import write_compare, write_report
from .runner import (
    compare_runs,
    execute_run,
    ingest_dataset,
    load_cards,
    read_jsonl,
    score_predictions,
    write_json,
    write_scores,
)

EXIT_OK = 0
EXIT_WARNINGS = 1
EXIT_FATAL = 2


def _load(config_path: str | None) -> Config:
    return load_config(config_path)


def _fail(message: str) -> "click.exceptions.Exit":
    click.echo(f"error: {message}", err=True)
    return click.exceptions.Exit(EXIT_FATAL)


@click.group()
def main() -> None:
    """Extract event/time/place context from images and score it."""


@main.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Also write the validation report as JSON.")
def ingest(dataset: str, out: str | None) -> None:
    """Validate DATASET (JSONL) and report total/excluded/utilized counts."""
    report = ingest_dataset(dataset)
    click.echo(f"{'Total':>10}  {'Excluded':>10}  {'Utilized':>10}")
    click.echo(f"{report.total:>10}  {len(report.excluded):>10}  {report.utilized:>10}")
    for item in report.excluded:
        click.echo(f"  excluded {item.get('id', item.get('line'))}: {item['reason']}")
    for warning in report.warnings:
        click.echo(f"  warning {warning}")
    if out:
        write_json(Path(out), report.to_json())
    if report.utilized == 0:
        raise _fail("no utilizable records in dataset")
    if report.excluded or report.warnings:
        raise click.exceptions.Exit(EXIT_WARNINGS)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--dataset", type=click.Path(exists=True), default=None,
              help="Override the dataset path from the config.")
@click.option("--run-id", default=None, help="Override run.run_id.")
@click.option("--mode", default=None,
              type=click.Choice(["direct", "partial_cross", "full_cross", "zeroshot_cot", "detective"]),
              help="Override pipeline.mode.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="Override run.out_dir.")
@click.option("--limit", type=int, default=None, help="Run only the first N records.")
def run(config_path: str, dataset: str | None, run_id: str | None,
        mode: str | None, out_dir: str | None, limit: int | None) -> None:
    """Execute a pipeline run described by a config file."""
    from dataclasses import replace

    cfg = _load(config_path)
    if dataset:
        cfg.run.dataset = dataset
    if run_id:
        cfg.run.run_id = run_id
    if out_dir:
        cfg.run.out_dir = out_dir
    if limit is not None:
        cfg.run.limit = limit
    if mode:
        cfg.pipeline = replace(cfg.pipeline, mode=mode)
    if not cfg.run.dataset:
        raise _fail("no dataset configured (set run.dataset or pass --dataset)")
    try:
        run_dir = execute_run(cfg)
    except Exception as exc:  # noqa: BLE001 - single fatal funnel for the CLI
        raise _fail(str(exc))
    meta = json.loads((run_dir / "run_meta.json").read_text())
    click.echo(f"run written to {run_dir}")
    click.echo(f"records: {meta['records']}  completed: {meta['completed']}  "
               f"skipped: {len(meta['skipped'])}")
    degraded = sum(
        bool(row.get("degraded_stages"))
        for row in read_jsonl(run_dir / "predictions.jsonl")
    )
    if degraded:
        click.echo(f"records with degraded stages: {degraded}")
    if meta["skipped"] or degraded:
        raise click.exceptions.Exit(EXIT_WARNINGS)


@main.command()
@click.argument("predictions", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--profile", type=click.Choice(sorted(PROFILES)), default=None,
              help="Weight profile (defaults to the config's metrics.profile).")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--label", default=None, help="Run label used in summaries and reports.")
def score(predictions: str, dataset: str, config_path: str | None,
          profile: str | None, out_dir: str, label: str | None) -> None:
    """Score PREDICTIONS (JSONL) against DATASET ground truth."""
    cfg = _load(config_path)
    profile_name = profile or cfg.metrics.profile
    try:
        result = score_predictions(predictions, dataset, profile_name, cfg)
    except Exception as exc:  # noqa: BLE001
        raise _fail(str(exc))
    scores_path, summary_path = write_scores(
        result, out_dir, label or Path(predictions).parent.name or "run"
    )
    means = result.summary.to_json()["means"]
    click.echo(f"scored {result.summary.count} records with profile {profile_name}")
    click.echo("  " + "  ".join(
        f"{k}={v}" for k, v in means.items() if v is not None
    ))
    click.echo(f"cards: {scores_path}\nsummary: {summary_path}")
    card_warnings = sum(bool(c.warnings) for c in result.cards)
    if result.skipped or card_warnings:
        click.echo(f"skipped: {len(result.skipped)}  cards with warnings: {card_warnings}")
        raise click.exceptions.Exit(EXIT_WARNINGS)


@main.command()
@click.argument("scores_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("scores_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--combos", default=None,
              help="Comma-separated combos, e.g. 'TS,GS,TS+GS'. Default: every "
                   "combo the runs support.")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--label-a", default="run_a")
@click.option("--label-b", default="run_b")
@click.option("--figures/--no-figures", default=True)
def compare(scores_a: str, scores_b: str, combos: str | None, out_dir: str,
            label_a: str, label_b: str, figures: bool) -> None:
    """Net error change between two scored runs, per benchmark combo."""
    cards_a = load_cards(scores_a)
    cards_b = load_cards(scores_b)
    if combos is not None:
        requested = tuple(
            tuple(part.split("+")) for part in combos.split(",") if part
        )
    else:
        events_scored = all(c.event_score is not None for c in cards_a + cards_b)
        requested = COMBOS if events_scored else tuple(
            c for c in COMBOS if "ES" not in c
        )
    try:
        row = compare_runs(cards_a, cards_b, requested)
    except Exception as exc:  # noqa: BLE001
        raise _fail(str(exc))
    for path in write_compare(row, out_dir, label_a, label_b, figures):
        click.echo(f"wrote {path}")


@main.command()
@click.argument("summaries", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--figures/--no-figures", default=True)
def report(summaries: tuple[str, ...], out_dir: str, figures: bool) -> None:
    """Render one or more summary.json files as tables and figures."""
    loaded = [json.loads(Path(p).read_text(encoding="utf-8")) for p in summaries]
    try:
        paths = write_report(loaded, out_dir, figures)
    except Exception as exc:  # noqa: BLE001
        raise _fail(str(exc))
    for path in paths:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    sys.exit(main())
