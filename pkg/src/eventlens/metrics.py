"""Scoring: event similarity, geospatial distance, temporal tolerance, overall.

Per image the harness produces up to three component scores in [0, 1]:

* event -- shifted cosine similarity (CS + 1) / 2 between embeddings of the
  predicted and ground-truth "event + background" concatenations;
* geospatial -- max(0, 1 - d / D_max) where d is the Haversine great-circle
  distance between the resolved prediction and ground truth (D_max 1000 km);
  an empty ground truth defaults to 1, an unresolvable prediction to 0;
* temporal -- a weighted mean of per-unit scores over the units present in
  the ground truth; century scores exact-match, the finer units score
  max(0, 1 - |gt - pred| / tolerance) with tolerances 50 years (decade),
  5 years, 6 months, 15 days and weights 1 / 1 / 1.25 / 1.5 / 1.5.

The overall score is a weighted average of the components under a named
profile: 0.4 / 0.3 / 0.3 (event / geo / temporal) when events are labeled,
0.5 / 0.5 (geo / temporal) when they are not. Run-level aggregation and the
win/loss "net error change" comparison between two runs live here too.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from types import MappingProxyType
from typing import Mapping, Sequence

from .embedding import EmbeddingProvider, cosine_similarity
from .gazetteer import Gazetteer, GeoPoint, resolve
from .schema import EventPrediction, GeoName, TemporalValue

TEMPORAL_TOLERANCES = MappingProxyType(
    {"decade": 50.0, "year": 5.0, "month": 6.0, "day": 15.0}
)
TEMPORAL_WEIGHTS = MappingProxyType(
    {"century": 1.0, "decade": 1.0, "year": 1.25, "month": 1.5, "day": 1.5}
)

COMBOS: tuple[tuple[str, ...], ...] = (
    ("TS",), ("GS",), ("ES",),
    ("TS", "GS"), ("TS", "ES"), ("GS", "ES"),
    ("TS", "GS", "ES"),
)


class EmptyGroundTruth(Exception):
    """Temporal scoring was asked to grade against no populated units."""


class ProfileMismatch(Exception):
    """Event-score presence disagrees with the active weight profile."""


class EmptyRun(Exception):
    """Aggregation over zero score cards."""


class MisalignedRuns(Exception):
    """Two runs being compared do not cover the same image ids."""


@dataclass(frozen=True)
class TemporalConfig:
    tolerances: Mapping[str, float] = TEMPORAL_TOLERANCES
    weights: Mapping[str, float] = TEMPORAL_WEIGHTS


@dataclass(frozen=True)
class GeoConfig:
    d_max_km: float = 1000.0
    earth_radius_km: float = 6371.0


@dataclass(frozen=True)
class WeightProfile:
    name: str
    w_event: float
    w_geo: float
    w_temporal: float

    @property
    def scores_events(self) -> bool:
        return self.w_event > 0.0


PROFILES: Mapping[str, WeightProfile] = MappingProxyType({
    "tara": WeightProfile("tara", w_event=0.4, w_geo=0.3, w_temporal=0.3),
    "wikitilo": WeightProfile("wikitilo", w_event=0.0, w_geo=0.5, w_temporal=0.5),
})


def round_half_away(value: float, ndigits: int = 1) -> float:
    """Round with ties away from zero (not banker's rounding)."""
    quantum = Decimal(1).scaleb(-ndigits)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


# ---------------------------------------------------------------------------
# Component scores
# ---------------------------------------------------------------------------

def haversine_km(p1: GeoPoint, p2: GeoPoint, cfg: GeoConfig = GeoConfig()) -> float:
    """Great-circle distance on a sphere of the configured radius.

    d = 2 R asin(sqrt(sin^2(dphi/2) + cos(phi1) cos(phi2) sin^2(dlambda/2)))
    with latitudes/longitudes in radians.
    """
    phi1 = math.radians(p1.lat_deg)
    phi2 = math.radians(p2.lat_deg)
    dphi = math.radians(p2.lat_deg - p1.lat_deg)
    dlam = math.radians(p2.lon_deg - p1.lon_deg)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * cfg.earth_radius_km * math.asin(min(1.0, math.sqrt(a)))


def geo_score(
    pred: GeoName,
    gt: GeoName,
    gz: Gazetteer,
    cfg: GeoConfig = GeoConfig(),
) -> tuple[float, list[str]]:
    """Distance-based location score in [0, 1], plus any warnings.

    Empty ground truth scores 1 (location is irrelevant for the sample).
    A prediction that resolves to no coordinates scores 0. A populated but
    unresolvable ground truth also scores 0, with a "gt-unresolvable"
    warning -- the default-to-1 rule is reserved for truly absent labels.
    Each side resolves at its own deepest resolvable level.
    """
    if gt.is_empty():
        return 1.0, []
    gt_point = resolve(gt, gz)
    if gt_point is None:
        return 0.0, ["gt-unresolvable"]
    pred_point = resolve(pred, gz)
    if pred_point is None:
        return 0.0, []
    d = haversine_km(gt_point, pred_point, cfg)
    return max(0.0, 1.0 - d / cfg.d_max_km), []


def temporal_unit_score(
    unit: str, gt_u: int, pred_u: int | None, cfg: TemporalConfig = TemporalConfig()
) -> float:
    """Score one temporal unit; a missing prediction scores 0 and the
    century level is graded as an exact match."""
    if pred_u is None:
        return 0.0
    if unit == "century":
        return 1.0 if gt_u == pred_u else 0.0
    tolerance = cfg.tolerances[unit]
    return max(0.0, 1.0 - abs(gt_u - pred_u) / tolerance)


def temporal_score(
    pred: TemporalValue, gt: TemporalValue, cfg: TemporalConfig = TemporalConfig()
) -> float:
    """Weighted mean of unit scores over the units present in the ground
    truth; units absent from the ground truth are ignored entirely."""
    units = gt.units_present()
    if not units:
        raise EmptyGroundTruth("ground truth has no temporal units")
    total = sum(cfg.weights[u] * temporal_unit_score(u, gt.get(u), pred.get(u), cfg) for u in units)
    return total / sum(cfg.weights[u] for u in units)


def event_score(
    pred: EventPrediction,
    gt_event: str,
    gt_background: str,
    provider: EmbeddingProvider,
) -> float:
    """Shifted cosine similarity between the "event + background" texts.

    Prediction and ground truth are each concatenated with a single space,
    embedded, and scored as (CS + 1) / 2. Absent prediction values
    contribute empty strings.
    """
    pred_text = f"{pred.event.value} {pred.background.value}"
    gt_text = f"{gt_event} {gt_background}"
    pred_vec, gt_vec = provider.embed_many([pred_text, gt_text])
    cs = cosine_similarity(pred_vec, gt_vec)
    return (cs + 1.0) / 2.0


def overall_score(
    es: float | None, gs: float, ts: float, profile: WeightProfile
) -> float:
    """Profile-weighted average of the component scores."""
    if profile.scores_events and es is None:
        raise ProfileMismatch(f"profile {profile.name!r} weights events but no event score given")
    if not profile.scores_events and es is not None:
        raise ProfileMismatch(f"profile {profile.name!r} does not score events")
    return profile.w_event * (es or 0.0) + profile.w_geo * gs + profile.w_temporal * ts


# ---------------------------------------------------------------------------
# Per-image cards and run-level aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScoreCard:
    image_id: str
    event_score: float | None
    geo_score: float
    temporal_score: float
    overall: float
    warnings: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "image_id": self.image_id,
            "event_score": self.event_score,
            "geo_score": self.geo_score,
            "temporal_score": self.temporal_score,
            "overall": self.overall,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ScoreCard":
        return cls(
            image_id=str(obj["image_id"]),
            event_score=obj.get("event_score"),
            geo_score=float(obj["geo_score"]),
            temporal_score=float(obj["temporal_score"]),
            overall=float(obj["overall"]),
            warnings=tuple(obj.get("warnings", ())),
        )


@dataclass(frozen=True)
class RunSummary:
    """Component means as percentages at one decimal (ties away from zero)."""

    count: int
    event_mean: float | None
    geo_mean: float
    temporal_mean: float
    overall_mean: float
    warning_counts: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "means": {
                "event": self.event_mean,
                "geo": self.geo_mean,
                "temporal": self.temporal_mean,
                "overall": self.overall_mean,
            },
            "warning_counts": dict(sorted(self.warning_counts.items())),
        }


def _warning_kind(warning: str) -> str:
    return warning.split(":", 1)[0]


def aggregate_run(cards: Sequence[ScoreCard]) -> RunSummary:
    """Arithmetic means of each component, x100 at one decimal.

    The event mean is None (absent, not zero) when no card carries an
    event score; cards without one are excluded from that mean only.
    """
    if not cards:
        raise EmptyRun("no score cards to aggregate")
    event_values = [c.event_score for c in cards if c.event_score is not None]
    warning_counts = Counter(_warning_kind(w) for c in cards for w in c.warnings)
    mean = lambda xs: round_half_away(100.0 * sum(xs) / len(xs))
    return RunSummary(
        count=len(cards),
        event_mean=mean(event_values) if event_values else None,
        geo_mean=mean([c.geo_score for c in cards]),
        temporal_mean=mean([c.temporal_score for c in cards]),
        overall_mean=mean([c.overall for c in cards]),
        warning_counts=dict(warning_counts),
    )


# ---------------------------------------------------------------------------
# Cross-run comparison
# ---------------------------------------------------------------------------

_COMBO_FIELDS = {"TS": "temporal_score", "GS": "geo_score", "ES": "event_score"}


def _combo_value(card: ScoreCard, combo: Sequence[str]) -> float:
    values = []
    for component in combo:
        value = getattr(card, _COMBO_FIELDS[component])
        if value is None:
            raise ProfileMismatch(
                f"combo includes ES but card {card.image_id!r} has no event score"
            )
        values.append(value)
    return sum(values) / len(values)


def net_error_change(
    run_a: Sequence[ScoreCard], run_b: Sequence[ScoreCard], combo: Sequence[str]
) -> float:
    """Net win percentage (f1 - f2) / N x 100 of run A over run B.

    Per aligned sample the combo value is the unweighted mean of the
    selected component scores; f1 counts samples where A is strictly
    higher, f2 where B is, and exact ties count toward neither side.
    """
    combo = tuple(combo)
    if not combo or any(c not in _COMBO_FIELDS for c in combo):
        raise ValueError(f"combo must be a non-empty subset of TS/GS/ES, got {combo!r}")
    by_id_a = {c.image_id: c for c in run_a}
    by_id_b = {c.image_id: c for c in run_b}
    if set(by_id_a) != set(by_id_b) or len(by_id_a) != len(run_a) or len(by_id_b) != len(run_b):
        raise MisalignedRuns("runs do not cover the same image ids")
    if not by_id_a:
        raise EmptyRun("cannot compare empty runs")
    f1 = f2 = 0
    for image_id, card_a in by_id_a.items():
        va = _combo_value(card_a, combo)
        vb = _combo_value(by_id_b[image_id], combo)
        if va > vb:
            f1 += 1
        elif vb > va:
            f2 += 1
    return (f1 - f2) / len(by_id_a) * 100.0
