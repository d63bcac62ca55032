"""Domain records, wire schemas, and tolerant parsing of model output.

Every agent in the pipeline must answer with a JSON object in a fixed shape.
Models frequently wrap that object in prose or markdown fences and emit "NA"
for fields they cannot infer, so parsing here is deliberately forgiving:
`extract_json_payload` digs the first balanced object out of raw text and
`validate_payload` maps it onto a typed record, normalizing sentinels and
filling missing fields with None rather than failing. A malformed payload
never aborts a run; the worst case is an all-absent record plus warnings.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

# Sentinel strings agents use for "no answer"; matched case-insensitively.
NA_SENTINELS = frozenset({"", "na", "null", "unknown", "none"})

TEMPORAL_UNITS = ("century", "decade", "year", "month", "day")

_MONTHS = {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5,
    "june": 6, "july": 7, "august": 8, "september": 9, "october": 10,
    "november": 11, "december": 12,
}
_MONTHS.update({name[:3]: number for name, number in _MONTHS.items()})

_ORDINAL_RE = re.compile(r"^(\d+)(?:st|nd|rd|th)$", re.IGNORECASE)
_DECADE_RE = re.compile(r"^(\d{1,4})s$", re.IGNORECASE)


class NoJsonFound(Exception):
    """Raised when raw model text contains no parseable JSON object."""


class SchemaMismatch(Exception):
    """Raised when a parsed payload is not a JSON object at the top level."""


# ---------------------------------------------------------------------------
# Domain records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TemporalValue:
    """A point in time at up to five granularities.

    `century` is the ordinal (21 for the 2000s), `decade` the decade's start
    year (2010 for "the 2010s"). Predictions are allowed to be internally
    inconsistent (e.g. year 2019 with decade 2000); consistency is only a
    warning at ingest, never an error.
    """

    century: int | None = None
    decade: int | None = None
    year: int | None = None
    month: int | None = None
    day: int | None = None

    def get(self, unit: str) -> int | None:
        return getattr(self, unit)

    def units_present(self) -> tuple[str, ...]:
        return tuple(u for u in TEMPORAL_UNITS if self.get(u) is not None)

    def is_empty(self) -> bool:
        return not self.units_present()


@dataclass(frozen=True)
class GeoName:
    """A hierarchical place name; any subset of levels may be present."""

    country: str | None = None
    state_or_province: str | None = None
    city: str | None = None

    def is_empty(self) -> bool:
        return self.country is None and self.state_or_province is None and self.city is None


@dataclass(frozen=True)
class EntityAttribute:
    attribute: str
    value: str


@dataclass(frozen=True)
class Entity:
    entity: str
    attributes: tuple[EntityAttribute, ...] = ()


@dataclass(frozen=True)
class Relationship:
    relationship: str
    reasoning: str


@dataclass(frozen=True)
class SceneGraph:
    """Entities, their attributes, and pairwise relationships in one image."""

    entities: tuple[Entity, ...] = ()
    relationships: tuple[Relationship, ...] = ()

    def is_empty(self) -> bool:
        return not self.entities and not self.relationships


@dataclass(frozen=True)
class AugmentedSceneGraph:
    """A scene graph plus the higher-level idea read out of the image."""

    graph: SceneGraph = SceneGraph()
    abstract_idea: str | None = None
    abstract_reasoning: str | None = None


@dataclass(frozen=True)
class PromptSpec:
    prompt: str = ""
    reasoning: str = ""


@dataclass(frozen=True)
class SpecialistPrompts:
    """Tailored instructions for the three extraction specialists."""

    event_prompt: PromptSpec = PromptSpec()
    temporal_prompt: PromptSpec = PromptSpec()
    geo_prompt: PromptSpec = PromptSpec()


@dataclass(frozen=True)
class TemporalPrediction:
    value: TemporalValue = TemporalValue()
    time_of_day: str | None = None
    reasoning: str = ""


@dataclass(frozen=True)
class GeoPrediction:
    value: GeoName = GeoName()
    reasoning: str = ""


@dataclass(frozen=True)
class LabeledValue:
    value: str = ""
    reasoning: str = ""


@dataclass(frozen=True)
class EventPrediction:
    event: LabeledValue = LabeledValue()
    background: LabeledValue = LabeledValue()


@dataclass(frozen=True)
class GroundTruth:
    temporal: TemporalValue = TemporalValue()
    geo: GeoName = GeoName()
    event: str | None = None
    background: str | None = None
    deductions: dict[str, str] = field(default_factory=dict)

    def has_any_label(self) -> bool:
        return not (self.temporal.is_empty() and self.geo.is_empty())


@dataclass(frozen=True)
class ImageRecord:
    """One dataset sample. The image is an opaque byte payload; nothing in
    this package decodes it."""

    id: str
    image_ref: str
    article_text: str | None = None
    public_figures: tuple[str, ...] = ()
    ground_truth: GroundTruth | None = None

    def load_image_bytes(self) -> bytes:
        return Path(self.image_ref).read_bytes()

    def image_media_type(self) -> str:
        suffix = Path(self.image_ref).suffix.lower()
        return {
            ".png": "image/png",
            ".jpg": "image/jpeg",
            ".jpeg": "image/jpeg",
            ".gif": "image/gif",
            ".webp": "image/webp",
        }.get(suffix, "application/octet-stream")


# ---------------------------------------------------------------------------
# Field normalization
# ---------------------------------------------------------------------------

def normalize_geo_field(raw: Any) -> str | None:
    """Trim a location string; NA-sentinel values collapse to None."""
    if raw is None:
        return None
    text = str(raw).strip()
    if text.casefold() in NA_SENTINELS:
        return None
    return text


def _parse_temporal_token(token: str, unit: str) -> int | None:
    token = token.strip()
    if not token or token.casefold() in NA_SENTINELS:
        return None
    value: int | None = None
    try:
        value = int(token)
    except ValueError:
        if (m := _ORDINAL_RE.match(token)) is not None:
            value = int(m.group(1))
        elif unit == "decade" and (m := _DECADE_RE.match(token)) is not None:
            value = int(m.group(1))
        elif unit == "month":
            value = _MONTHS.get(token.casefold())
    if value is None:
        return None
    if unit == "month" and not 1 <= value <= 12:
        return None
    if unit == "day" and not 1 <= value <= 31:
        return None
    return value


def normalize_temporal_field(
    raw: Any, unit: str, warnings: list[str] | None = None
) -> int | None:
    """Canonicalize one temporal field to an integer, or None.

    Accepts bare integers, ordinals ("21st" -> 21, "20th" -> 20), decade
    strings ("2010s" -> 2010), and English month names (full or 3-letter,
    any case). A comma-separated multi-value takes the first token that
    parses. Unparseable input yields None and a recorded warning; it never
    raises.
    """
    if unit not in TEMPORAL_UNITS:
        raise ValueError(f"unknown temporal unit {unit!r}")
    if raw is None:
        return None
    if isinstance(raw, bool):
        raw = str(raw)
    if isinstance(raw, int):
        value = _parse_temporal_token(str(raw), unit)
    elif isinstance(raw, float) and raw.is_integer():
        value = _parse_temporal_token(str(int(raw)), unit)
    else:
        text = str(raw).strip()
        if text.casefold() in NA_SENTINELS:
            return None
        value = None
        for token in text.split(","):
            value = _parse_temporal_token(token, unit)
            if value is not None:
                break
    if value is None and warnings is not None:
        warnings.append(f"unparseable-temporal:{unit}:{raw!r}")
    return value


# ---------------------------------------------------------------------------
# JSON payload extraction
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)


def _balanced_objects(text: str):
    """Yield top-level brace-balanced substrings, string-literal aware."""
    depth = 0
    start = None
    in_string = False
    escaped = False
    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0 and start is not None:
                yield text[start : i + 1]
                start = None


def extract_json_payload(raw_model_text: str) -> Any:
    """Return the first parseable JSON object embedded in model text.

    Markdown code fences are stripped first, then the text is scanned for
    balanced top-level objects; each candidate is parsed until one succeeds.
    Raises NoJsonFound when nothing parses.
    """
    text = _FENCE_RE.sub(lambda m: m.group(1), raw_model_text)
    for candidate in _balanced_objects(text):
        try:
            return json.loads(candidate)
        except json.JSONDecodeError:
            continue
    raise NoJsonFound("no balanced JSON object found in model text")


# ---------------------------------------------------------------------------
# Payload -> typed record mapping
# ---------------------------------------------------------------------------

PAYLOAD_SCHEMAS = (
    "scene_graph", "abstract", "prompts", "temporal", "geo", "event", "combined",
)


def _as_text(raw: Any) -> str:
    if raw is None:
        return ""
    if isinstance(raw, (dict, list)):
        return json.dumps(raw, ensure_ascii=False)
    return str(raw)


def _folded_lookup(payload: dict, *keys: str) -> Any:
    """Case-insensitive dict lookup trying each key in order."""
    folded = {str(k).casefold(): v for k, v in payload.items()}
    for key in keys:
        if (value := folded.get(key.casefold())) is not None:
            return value
    return None


def _na_text(raw: Any) -> str:
    """Text field where NA sentinels collapse to the empty string."""
    text = _as_text(raw).strip()
    return "" if text.casefold() in NA_SENTINELS else text


def _parse_scene_graph(payload: dict, warnings: list[str]) -> SceneGraph:
    raw_entities = payload.get("entities")
    if not isinstance(raw_entities, list):
        warnings.append("missing-field:entities")
        raw_entities = []
    raw_rels = payload.get("relationships")
    if not isinstance(raw_rels, list):
        warnings.append("missing-field:relationships")
        raw_rels = []
    entities = []
    for item in raw_entities:
        if not isinstance(item, dict):
            continue
        attrs = tuple(
            EntityAttribute(_as_text(a.get("attribute")), _as_text(a.get("value")))
            for a in item.get("attributes", [])
            if isinstance(a, dict)
        )
        entities.append(Entity(_as_text(item.get("entity")), attrs))
    relationships = []
    for item in raw_rels:
        if not isinstance(item, dict):
            continue
        relationships.append(
            Relationship(_as_text(item.get("relationship")), _as_text(item.get("reasoning")))
        )
    return SceneGraph(tuple(entities), tuple(relationships))


def _parse_abstract(payload: dict, warnings: list[str]) -> tuple[str | None, str | None]:
    inner = payload.get("abstract_idea", payload)
    if isinstance(inner, dict):
        idea = normalize_geo_field(inner.get("idea"))
        reasoning = normalize_geo_field(inner.get("reasoning"))
    else:
        idea = normalize_geo_field(inner)
        reasoning = normalize_geo_field(payload.get("reasoning"))
    if idea is None:
        warnings.append("missing-field:abstract_idea")
    return idea, reasoning


_PROMPT_ALIASES = {
    "event": ("global_event_specialist", "event_specialist", "event_prompt"),
    "temporal": ("temporal_specialist", "temporal_prompt"),
    "geo": ("spatial_specialist", "geospatial_specialist", "geo_prompt"),
}


def _parse_prompts(payload: dict, warnings: list[str]) -> SpecialistPrompts:
    specs: dict[str, PromptSpec] = {}
    for role, aliases in _PROMPT_ALIASES.items():
        raw = _folded_lookup(payload, *aliases)
        if isinstance(raw, dict):
            specs[role] = PromptSpec(_na_text(raw.get("prompt")), _na_text(raw.get("reasoning")))
        elif raw is not None:
            specs[role] = PromptSpec(_na_text(raw), "")
        else:
            warnings.append(f"missing-field:{aliases[0]}")
            specs[role] = PromptSpec()
    return SpecialistPrompts(
        event_prompt=specs["event"],
        temporal_prompt=specs["temporal"],
        geo_prompt=specs["geo"],
    )


def _parse_temporal(payload: dict, warnings: list[str]) -> TemporalPrediction:
    folded_keys = {str(k).casefold() for k in payload}
    values: dict[str, int | None] = {}
    for unit in TEMPORAL_UNITS:
        # "date" is a known wire-name variant for the day field.
        aliases = (unit, "date") if unit == "day" else (unit,)
        if not any(a in folded_keys for a in aliases):
            warnings.append(f"missing-field:{unit}")
        raw = _folded_lookup(payload, *aliases)
        values[unit] = normalize_temporal_field(raw, unit, warnings)
    time_of_day = normalize_geo_field(_folded_lookup(payload, "time_of_day"))
    reasoning = _na_text(_folded_lookup(payload, "reasoning"))
    return TemporalPrediction(TemporalValue(**values), time_of_day, reasoning)


def _parse_geo(payload: dict, warnings: list[str]) -> GeoPrediction:
    folded_keys = {str(k).casefold() for k in payload}
    values: dict[str, str | None] = {}
    for fld in ("country", "state_or_province", "city"):
        if fld not in folded_keys:
            warnings.append(f"missing-field:{fld}")
        values[fld] = normalize_geo_field(_folded_lookup(payload, fld))
    reasoning = _na_text(_folded_lookup(payload, "reasoning"))
    return GeoPrediction(GeoName(**values), reasoning)


def _labeled(raw: Any, fallback_reasoning: Any = None) -> LabeledValue:
    if isinstance(raw, dict):
        return LabeledValue(_na_text(raw.get("value")), _na_text(raw.get("reasoning")))
    return LabeledValue(_na_text(raw), _na_text(fallback_reasoning))


def _parse_event(payload: dict, warnings: list[str]) -> EventPrediction:
    folded_keys = {str(k).casefold() for k in payload}
    if "event" not in folded_keys:
        warnings.append("missing-field:event")
    if "background" not in folded_keys:
        warnings.append("missing-field:background")
    event = _labeled(_folded_lookup(payload, "event"), _folded_lookup(payload, "event_reasoning"))
    background = _labeled(
        _folded_lookup(payload, "background"), _folded_lookup(payload, "background_reasoning")
    )
    return EventPrediction(event, background)


def _parse_combined(payload: dict, warnings: list[str]):
    """Single-call baseline output: temporal + geo + event in one object."""
    flat = dict(payload)
    for key, value in payload.items():
        # Models nest sections like {"temporal information": {...}}; fold them in.
        if isinstance(value, dict) and "information" in str(key).casefold():
            flat.update(value)
    temporal = _parse_temporal(flat, warnings)
    geo = _parse_geo(flat, warnings)
    event = _parse_event(flat, warnings)
    return temporal, geo, event


def validate_payload(payload: Any, schema: str) -> tuple[Any, list[str]]:
    """Map a parsed JSON payload onto the typed record for `schema`.

    Returns (record, warnings). Unknown keys are ignored; missing required
    keys become None/empty plus a warning. A top-level "response" wrapper
    (as emitted by id-tagged agent output) is unwrapped transparently.
    Raises SchemaMismatch when the payload is not an object.
    """
    if schema not in PAYLOAD_SCHEMAS:
        raise ValueError(f"unknown payload schema {schema!r}")
    if not isinstance(payload, dict):
        raise SchemaMismatch(f"expected JSON object, got {type(payload).__name__}")
    if isinstance(payload.get("response"), dict):
        payload = payload["response"]
    warnings: list[str] = []
    parser = {
        "scene_graph": _parse_scene_graph,
        "abstract": _parse_abstract,
        "prompts": _parse_prompts,
        "temporal": _parse_temporal,
        "geo": _parse_geo,
        "event": _parse_event,
        "combined": _parse_combined,
    }[schema]
    return parser(payload, warnings), warnings


def degraded_record(schema: str) -> Any:
    """The all-absent record substituted when a stage permanently fails."""
    return {
        "scene_graph": SceneGraph(),
        "abstract": (None, None),
        "prompts": SpecialistPrompts(),
        "temporal": TemporalPrediction(reasoning="NA"),
        "geo": GeoPrediction(reasoning="NA"),
        "event": EventPrediction(LabeledValue("", "NA"), LabeledValue("", "NA")),
        "combined": (
            TemporalPrediction(reasoning="NA"),
            GeoPrediction(reasoning="NA"),
            EventPrediction(LabeledValue("", "NA"), LabeledValue("", "NA")),
        ),
    }[schema]


# ---------------------------------------------------------------------------
# Wire rendering (record -> JSON-ready dict, absent -> "NA")
# ---------------------------------------------------------------------------

def temporal_to_wire(pred: TemporalPrediction) -> dict:
    wire: dict[str, Any] = {
        unit: pred.value.get(unit) if pred.value.get(unit) is not None else "NA"
        for unit in TEMPORAL_UNITS
    }
    wire["time_of_day"] = pred.time_of_day if pred.time_of_day is not None else "NA"
    wire["reasoning"] = pred.reasoning or "NA"
    return wire


def geo_to_wire(pred: GeoPrediction) -> dict:
    return {
        "country": pred.value.country or "NA",
        "state_or_province": pred.value.state_or_province or "NA",
        "city": pred.value.city or "NA",
        "reasoning": pred.reasoning or "NA",
    }


def event_to_wire(pred: EventPrediction) -> dict:
    return {
        "event": {"value": pred.event.value or "NA", "reasoning": pred.event.reasoning or "NA"},
        "background": {
            "value": pred.background.value or "NA",
            "reasoning": pred.background.reasoning or "NA",
        },
    }


def scene_graph_to_wire(graph: SceneGraph) -> dict:
    return {
        "entities": [
            {
                "attributes": [
                    {"attribute": a.attribute, "value": a.value} for a in e.attributes
                ],
                "entity": e.entity,
            }
            for e in graph.entities
        ],
        "relationships": [
            {"reasoning": r.reasoning, "relationship": r.relationship}
            for r in graph.relationships
        ],
    }


def asg_to_wire(asg: AugmentedSceneGraph) -> dict:
    """Scene graph with the abstract idea merged in as a bare string field.

    The key is omitted entirely when the abstract stage was skipped or
    failed, so downstream serializations carry no placeholder for it.
    """
    wire = scene_graph_to_wire(asg.graph)
    if asg.abstract_idea is not None:
        wire["abstract_idea"] = asg.abstract_idea
    return wire


# ---------------------------------------------------------------------------
# Dataset ingest
# ---------------------------------------------------------------------------

class DatasetError(Exception):
    """Raised for unreadable or structurally invalid dataset files."""


def _ground_truth_from_json(obj: dict, warnings: list[str]) -> GroundTruth:
    raw_temporal = obj.get("temporal") or {}
    values = {
        unit: normalize_temporal_field(raw_temporal.get(unit), unit, warnings)
        for unit in TEMPORAL_UNITS
    }
    temporal = TemporalValue(**values)
    if (
        temporal.year is not None
        and temporal.decade is not None
        and temporal.decade != (temporal.year // 10) * 10
    ):
        warnings.append("inconsistent-temporal:decade-vs-year")
    raw_geo = obj.get("geo") or {}
    geo = GeoName(
        country=normalize_geo_field(raw_geo.get("country")),
        state_or_province=normalize_geo_field(raw_geo.get("state_or_province")),
        city=normalize_geo_field(raw_geo.get("city")),
    )
    deductions = {
        str(k): str(v) for k, v in (obj.get("deductions") or {}).items() if v is not None
    }
    return GroundTruth(
        temporal=temporal,
        geo=geo,
        event=normalize_geo_field(obj.get("event")),
        background=normalize_geo_field(obj.get("background")),
        deductions=deductions,
    )


def image_record_from_json(
    obj: dict, base_dir: Path | None = None, warnings: list[str] | None = None
) -> ImageRecord:
    """Build an ImageRecord from one dataset JSONL object.

    Relative image paths are resolved against `base_dir` (normally the
    dataset file's directory).
    """
    warnings = warnings if warnings is not None else []
    if "id" not in obj or "image" not in obj:
        raise DatasetError("record must carry 'id' and 'image' fields")
    image_ref = str(obj["image"])
    if base_dir is not None and not Path(image_ref).is_absolute():
        image_ref = str(base_dir / image_ref)
    ground_truth = None
    if isinstance(obj.get("ground_truth"), dict):
        ground_truth = _ground_truth_from_json(obj["ground_truth"], warnings)
    return ImageRecord(
        id=str(obj["id"]),
        image_ref=image_ref,
        article_text=obj.get("article"),
        public_figures=tuple(str(n) for n in obj.get("public_figures", []) if str(n).strip()),
        ground_truth=ground_truth,
    )
