"""Shared fixtures: repo paths, gazetteers, and a synthetic offline corpus.

`build_synthetic_corpus` writes a small, fully deterministic dataset plus a
mock-backend fixture file covering every pipeline stage, so end-to-end runs
can execute (and re-execute, byte-identically) without any network access.
"""

from __future__ import annotations

import base64
import calendar
import json
from pathlib import Path

import pytest

from eventlens.gazetteer import Gazetteer, default_gazetteer_path, load_gazetteer

REPO_ROOT = Path(__file__).resolve().parent.parent
DEMO_DIR = REPO_ROOT / "demo"

# Smallest valid PNG; pipelines treat image bytes as opaque.
TINY_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNkYPhfDwAChwGA60e6kgAAAABJRU5ErkJggg=="
)

PIPELINE_STAGES = (
    "scene_graph", "abstract", "prompts",
    "event_direct", "temporal_direct", "geo_direct",
    "event_cross", "temporal_cross", "geo_cross",
)

# (country, state_or_province, city) triples present in the bundled gazetteer.
SYNTH_PLACES = [
    ("Indonesia", None, "Jakarta"),
    ("United States", "New York", "New York"),
    ("United Kingdom", None, "London"),
    ("France", None, "Paris"),
    ("Japan", None, "Tokyo"),
    ("Germany", None, "Berlin"),
    ("India", None, "Mumbai"),
    ("Australia", "New South Wales", "Sydney"),
    ("Egypt", None, "Cairo"),
    ("Brazil", None, "Rio de Janeiro"),
]


@pytest.fixture(scope="session")
def bundled_gazetteer() -> Gazetteer:
    return load_gazetteer(default_gazetteer_path())


def synth_ground_truth(i: int) -> dict:
    country, state, city = SYNTH_PLACES[i % len(SYNTH_PLACES)]
    year = 2010 + i
    geo = {"country": country, "city": city}
    if state:
        geo["state_or_province"] = state
    return {
        "temporal": {
            "century": 21,
            "decade": (year // 10) * 10,
            "year": year,
            "month": (i % 12) + 1,
            "day": (i * 3) % 28 + 1,
        },
        "geo": geo,
        "event": f"synthetic event number {i}",
        "background": f"background story for synthetic event number {i}",
    }


def _stage_payloads(i: int) -> dict[str, dict]:
    gt = synth_ground_truth(i)
    month_name = calendar.month_name[gt["temporal"]["month"]]
    return {
        "scene_graph": {
            "entities": [
                {"entity": "person", "attributes": [{"attribute": "wearing", "value": "suit"}]},
                {"entity": "crowd", "attributes": []},
            ],
            "relationships": [
                {"relationship": "near", "reasoning": "the person stands near the crowd"}
            ],
        },
        "abstract": {
            "abstract_idea": {
                "idea": f"a public gathering, variant {i}",
                "reasoning": "people assembled around a speaker",
            }
        },
        "prompts": {
            "global_event_specialist": {
                "prompt": f"Identify the public event in image {i}.",
                "reasoning": "event cues",
            },
            "spatial_specialist": {
                "prompt": f"Locate image {i} from signage and architecture.",
                "reasoning": "location cues",
            },
            "temporal_specialist": {
                "prompt": f"Date image {i} from technology and clothing.",
                "reasoning": "time cues",
            },
        },
        # Direct pass: coarse answers (country-level, decade-level).
        "event_direct": {
            "event": {"value": f"a gathering {i}", "reasoning": "crowd visible"},
            "background": {"value": "people in a public place", "reasoning": "setting"},
        },
        "temporal_direct": {
            "century": "21st",
            "decade": f"{gt['temporal']['decade']}s",
            "year": "NA",
            "month": "NA",
            "day": "NA",
            "time_of_day": "NA",
            "reasoning": "rough era from clothing",
        },
        "geo_direct": {
            "country": gt["geo"]["country"],
            "state_or_province": "NA",
            "city": "NA",
            "reasoning": "country-level guess",
        },
        # Cross pass: refined answers close to the ground truth.
        "event_cross": {
            "event": {"value": gt["event"], "reasoning": "combined evidence"},
            "background": {"value": gt["background"], "reasoning": "combined evidence"},
        },
        "temporal_cross": {
            "century": "21st",
            "decade": f"{gt['temporal']['decade']}s",
            "year": str(gt["temporal"]["year"]),
            "month": month_name,
            "day": f"{gt['temporal']['day']}th",
            "time_of_day": "Day",
            "reasoning": "event identification pins the date",
        },
        "geo_cross": {
            "country": gt["geo"]["country"],
            "state_or_province": gt["geo"].get("state_or_province", "NA"),
            "city": gt["geo"]["city"],
            "reasoning": "event identification pins the venue",
        },
    }


def render_response_text(payload: dict, image_id: str, variant: int) -> str:
    """Vary the wrapping the way real model output does."""
    body = json.dumps({"id": image_id, "response": payload}, indent=2)
    if variant % 3 == 1:
        return f"```json\n{body}\n```"
    if variant % 3 == 2:
        return f"Here is the JSON you asked for:\n{body}\nLet me know if you need more."
    return body


def build_synthetic_corpus(root: Path, n: int = 10) -> tuple[Path, Path]:
    """Write dataset.jsonl + fixtures.jsonl + images under `root`."""
    images = root / "images"
    images.mkdir(parents=True, exist_ok=True)
    dataset_path = root / "dataset.jsonl"
    fixtures_path = root / "fixtures.jsonl"
    with open(dataset_path, "w", encoding="utf-8") as ds, open(
        fixtures_path, "w", encoding="utf-8"
    ) as fx:
        for i in range(n):
            image_id = f"s{i:02d}"
            (images / f"{image_id}.png").write_bytes(TINY_PNG)
            ds.write(
                json.dumps(
                    {
                        "id": image_id,
                        "image": f"images/{image_id}.png",
                        "ground_truth": synth_ground_truth(i),
                    }
                )
                + "\n"
            )
            for j, (stage, payload) in enumerate(_stage_payloads(i).items()):
                fx.write(
                    json.dumps(
                        {
                            "stage": stage,
                            "image_id": image_id,
                            "response_text": render_response_text(payload, image_id, i + j),
                        }
                    )
                    + "\n"
                )
    return dataset_path, fixtures_path


@pytest.fixture()
def synthetic_corpus(tmp_path: Path) -> tuple[Path, Path]:
    return build_synthetic_corpus(tmp_path)
