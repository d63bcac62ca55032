"""Dataset ingest, pipeline runs, scoring, and run comparison.

A run writes its artifacts under `<out_dir>/<run_id>/`:

    manifest.json          frozen, fully deterministic run description
    run_meta.json          wall-clock timestamps and failure accounting
    predictions.jsonl      one line per image: direct + final bundles
    images/<id>/...        per-stage artifacts (scene_graph.json, abstract.json,
                           prompts.json, direct/*.json, final/*.json)
    capture.jsonl          verbatim request/response log (live backend or
                           when capture is enabled)

Scoring reads predictions + dataset ground truth and writes scores.jsonl
(one card per line) and summary.json. All file writes go through a
write-temp-then-rename so partially written artifacts never survive.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .backend import Backend, CaptureLog, HttpBackend, MockBackend, RateLimitedBackend
from .config import Config, build_manifest
from .embedding import EmbeddingProvider, make_provider
from .gazetteer import Gazetteer, load_gazetteer
from .metrics import (
    PROFILES,
    RunSummary,
    ScoreCard,
    WeightProfile,
    aggregate_run,
    event_score,
    geo_score,
    net_error_change,
    overall_score,
    temporal_score,
    COMBOS,
)
from .pipeline import PipelineResult, run_pipeline
from .schema import (
    DatasetError,
    GroundTruth,
    ImageRecord,
    asg_to_wire,
    image_record_from_json,
    validate_payload,
)


class RunAborted(Exception):
    """Too many records hit an exhausted backend; the run was cut short."""


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def write_jsonl(path: Path, rows) -> None:
    atomic_write_text(
        path, "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in rows)
    )


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


# ---------------------------------------------------------------------------
# Ingest
# ---------------------------------------------------------------------------

@dataclass
class IngestReport:
    total: int = 0
    utilized: int = 0
    excluded: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    records: list[ImageRecord] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "excluded": len(self.excluded),
            "utilized": self.utilized,
            "exclusions": self.excluded,
            "warnings": self.warnings,
        }


def ingest_dataset(
    path: str | Path, require_ground_truth: bool = True, require_image: bool = True
) -> IngestReport:
    """Validate every dataset record; collect usable ones.

    A record is excluded when its image is unreadable, its id duplicates an
    earlier one, or (when ground truth is required) it lacks both temporal
    and geospatial labels. Scoring-only callers pass require_image=False
    since grading never touches image bytes.
    """
    path = Path(path)
    report = IngestReport()
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            report.total += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                report.excluded.append({"line": lineno, "reason": f"invalid json: {exc}"})
                continue
            warnings: list[str] = []
            try:
                record = image_record_from_json(obj, base_dir=path.parent, warnings=warnings)
            except DatasetError as exc:
                report.excluded.append({"line": lineno, "reason": str(exc)})
                continue
            report.warnings.extend(f"{record.id}: {w}" for w in warnings)
            if record.id in seen_ids:
                report.excluded.append({"id": record.id, "reason": "duplicate id"})
                continue
            seen_ids.add(record.id)
            if require_image and not Path(record.image_ref).is_file():
                report.excluded.append({"id": record.id, "reason": "unreadable image"})
                continue
            if require_ground_truth and (
                record.ground_truth is None or not record.ground_truth.has_any_label()
            ):
                report.excluded.append(
                    {"id": record.id, "reason": "no temporal or geospatial ground truth"}
                )
                continue
            report.records.append(record)
    report.utilized = len(report.records)
    return report


# ---------------------------------------------------------------------------
# Pipeline runs
# ---------------------------------------------------------------------------

def make_backend(cfg: Config) -> Backend:
    if cfg.backend.name == "mock":
        if not cfg.backend.fixtures:
            raise ValueError("mock backend requires backend.fixtures")
        return MockBackend.from_jsonl(cfg.backend.fixtures)
    if cfg.backend.name == "http":
        if not cfg.backend.url:
            raise ValueError("http backend requires backend.url")
        return HttpBackend(
            url=cfg.backend.url,
            model=cfg.backend.model,
            temperature=cfg.backend.temperature,
            timeout_s=cfg.backend.timeout_s,
            max_retries=cfg.backend.max_retries,
            backoff_s=cfg.backend.backoff_s,
        )
    raise ValueError(f"unknown backend {cfg.backend.name!r}")


def _write_image_artifacts(image_dir: Path, result: PipelineResult) -> None:
    write_json(image_dir / "scene_graph.json", asg_to_wire(result.scene_graph))
    write_json(
        image_dir / "abstract.json",
        {
            "abstract_idea": result.scene_graph.abstract_idea,
            "reasoning": result.scene_graph.abstract_reasoning,
        },
    )
    write_json(
        image_dir / "prompts.json",
        {
            role: {"prompt": spec.prompt, "reasoning": spec.reasoning}
            for role, spec in (
                ("event", result.prompts.event_prompt),
                ("temporal", result.prompts.temporal_prompt),
                ("geo", result.prompts.geo_prompt),
            )
        },
    )
    direct_wire = result.direct.to_json()
    final_wire = result.final.to_json()
    for role in ("event", "temporal", "geo"):
        write_json(image_dir / "direct" / f"{role}.json", direct_wire[role])
        write_json(image_dir / "final" / f"{role}.json", final_wire[role])


def execute_run(cfg: Config, records: list[ImageRecord] | None = None) -> Path:
    """Run the pipeline over a dataset and write all artifacts.

    Records failing with unrecoverable I/O are logged and skipped; the run
    aborts only when the fraction of records with an exhausted backend
    exceeds `run.abort_exhausted_fraction`.
    """
    if records is None:
        report = ingest_dataset(cfg.run.dataset, require_ground_truth=False)
        records = report.records
    if cfg.run.limit is not None:
        records = records[: cfg.run.limit]
    if not records:
        raise DatasetError("no usable records to run")

    run_dir = Path(cfg.run.out_dir) / cfg.run.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    write_json(run_dir / "manifest.json", build_manifest(cfg))

    capture = None
    if cfg.backend.capture or cfg.backend.name == "http":
        capture = CaptureLog(run_dir / "capture.jsonl")
    backend = RateLimitedBackend(make_backend(cfg), cfg.run.max_in_flight)

    started = time.time()
    skipped: list[dict] = []

    def process(record: ImageRecord) -> PipelineResult | None:
        try:
            return run_pipeline(record, cfg.pipeline, backend, capture)
        except OSError as exc:
            skipped.append({"id": record.id, "reason": f"unreadable image: {exc}"})
            return None

    with ThreadPoolExecutor(max_workers=cfg.run.max_in_flight) as pool:
        results = list(pool.map(process, records))

    predictions = []
    exhausted_records = 0
    for result in results:
        if result is None:
            continue
        if result.exhausted_stages:
            exhausted_records += 1
        _write_image_artifacts(run_dir / "images" / result.image_id, result)
        predictions.append(
            {
                "id": result.image_id,
                "direct": result.direct.to_json(),
                "final": result.final.to_json(),
                "degraded_stages": result.degraded_stages,
            }
        )

    done = len(predictions)
    if done and exhausted_records / len(records) > cfg.run.abort_exhausted_fraction:
        raise RunAborted(
            f"backend exhausted on {exhausted_records}/{len(records)} records"
        )

    write_jsonl(run_dir / "predictions.jsonl", predictions)
    write_json(
        run_dir / "run_meta.json",
        {
            "started_at": started,
            "finished_at": time.time(),
            "records": len(records),
            "completed": done,
            "skipped": skipped,
            "exhausted_records": exhausted_records,
        },
    )
    return run_dir


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

@dataclass
class ScoreResult:
    cards: list[ScoreCard]
    summary: RunSummary
    profile: WeightProfile
    skipped: list[dict] = field(default_factory=list)

    def summary_json(self, label: str, checksums: dict | None = None) -> dict:
        payload = self.summary.to_json()
        payload["label"] = label
        payload["profile"] = self.profile.name
        payload["skipped"] = self.skipped
        if checksums:
            payload["checksums"] = checksums
        return payload


def _score_one(
    final: dict,
    gt: GroundTruth,
    profile: WeightProfile,
    gz: Gazetteer,
    provider: EmbeddingProvider,
    cfg: Config,
    image_id: str,
) -> ScoreCard:
    warnings: list[str] = []
    event_pred, w = validate_payload(final.get("event", {}), "event")
    warnings.extend(w)
    temporal_pred, w = validate_payload(final.get("temporal", {}), "temporal")
    warnings.extend(w)
    geo_pred, w = validate_payload(final.get("geo", {}), "geo")
    warnings.extend(w)

    gs, geo_warnings = geo_score(geo_pred.value, gt.geo, gz, cfg.metrics.geo_config())
    warnings.extend(geo_warnings)

    if gt.temporal.is_empty():
        # Mirror of the geo rule: an absent label imposes no constraint.
        ts = 1.0
        warnings.append("temporal-gt-missing")
    else:
        ts = temporal_score(temporal_pred.value, gt.temporal, cfg.metrics.temporal_config())

    es = None
    if profile.scores_events:
        es = event_score(event_pred, gt.event or "", gt.background or "", provider)

    return ScoreCard(
        image_id=image_id,
        event_score=es,
        geo_score=gs,
        temporal_score=ts,
        overall=overall_score(es, gs, ts, profile),
        warnings=tuple(warnings),
    )


def score_predictions(
    predictions_path: str | Path,
    dataset_path: str | Path,
    profile_name: str,
    cfg: Config | None = None,
) -> ScoreResult:
    """Grade a predictions file against its dataset's ground truth.

    Predicted ids missing from the dataset, lacking ground truth entirely,
    or lacking event labels under an event-weighted profile are skipped
    with a reason and excluded from the means.
    """
    cfg = cfg or Config()
    if profile_name not in PROFILES:
        raise ValueError(f"unknown profile {profile_name!r}; expected one of {sorted(PROFILES)}")
    profile = PROFILES[profile_name]
    gz = load_gazetteer(cfg.resolved_gazetteer_path())
    provider = make_provider(cfg.embedding.provider, cfg.embedding.url, cfg.embedding.dim)

    ingest = ingest_dataset(dataset_path, require_ground_truth=False, require_image=False)
    truth = {r.id: r.ground_truth for r in ingest.records}

    cards: list[ScoreCard] = []
    skipped: list[dict] = []
    for row in read_jsonl(predictions_path):
        image_id = str(row["id"])
        if image_id not in truth:
            skipped.append({"id": image_id, "reason": "not in dataset"})
            continue
        gt = truth[image_id]
        if gt is None or not gt.has_any_label():
            skipped.append({"id": image_id, "reason": "no ground truth"})
            continue
        if profile.scores_events and not (gt.event or gt.background):
            skipped.append({"id": image_id, "reason": "no event ground truth"})
            continue
        cards.append(
            _score_one(row.get("final", {}), gt, profile, gz, provider, cfg, image_id)
        )
    if not cards:
        raise DatasetError("no predictions could be scored")
    return ScoreResult(cards=cards, summary=aggregate_run(cards), profile=profile, skipped=skipped)


def write_scores(result: ScoreResult, out_dir: str | Path, label: str) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    scores_path = out_dir / "scores.jsonl"
    summary_path = out_dir / "summary.json"
    write_jsonl(scores_path, (c.to_json() for c in result.cards))
    write_json(summary_path, result.summary_json(label))
    return scores_path, summary_path


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------

def load_cards(path: str | Path) -> list[ScoreCard]:
    return [ScoreCard.from_json(row) for row in read_jsonl(path)]


def compare_runs(
    cards_a: list[ScoreCard],
    cards_b: list[ScoreCard],
    combos: tuple[tuple[str, ...], ...] = COMBOS,
) -> dict[str, float]:
    """Net error change of run A over run B for each requested combo."""
    return {
        "+".join(combo): net_error_change(cards_a, cards_b, combo) for combo in combos
    }
