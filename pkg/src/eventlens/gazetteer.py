"""Offline place-name resolution for the geospatial score.

A gazetteer is a CSV of (country, state_or_province, city, lat, lon) rows.
Rows with empty state and city act as country-level entries, and so on down
the hierarchy. Lookups are exact after case-folding and trimming; there is
deliberately no fuzzy matching, so resolution is deterministic and easy to
reason about in tests. A bundled ~60-row file covering the demo locations
ships with the package (see `default_gazetteer_path`).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from .schema import GeoName

LEVELS = ("none", "country", "state", "city")


@dataclass(frozen=True)
class GeoPoint:
    lat_deg: float
    lon_deg: float


@dataclass(frozen=True)
class GazetteerEntry:
    country: str
    state_or_province: str | None
    city: str | None
    point: GeoPoint


def _fold(name: str | None) -> str:
    return (name or "").strip().casefold()


class Gazetteer:
    """Immutable index from case-folded name triples to coordinates."""

    def __init__(self, entries: Iterable[GazetteerEntry], warnings: list[str] | None = None):
        self.warnings: list[str] = list(warnings or [])
        self._index: dict[tuple[str, str, str], GazetteerEntry] = {}
        for entry in entries:
            key = (_fold(entry.country), _fold(entry.state_or_province), _fold(entry.city))
            if key in self._index:
                self.warnings.append(f"duplicate-key:{'/'.join(key)}")
            self._index[key] = entry  # last wins

    def __len__(self) -> int:
        return len(self._index)

    def lookup(self, country: str | None, state: str | None, city: str | None) -> GeoPoint | None:
        entry = self._index.get((_fold(country), _fold(state), _fold(city)))
        return entry.point if entry is not None else None


def load_gazetteer(source: str | Path | io.TextIOBase | Iterable[str]) -> Gazetteer:
    """Load a gazetteer from a CSV path, open text stream, or line iterable.

    Expected columns: country, state_or_province, city, lat, lon. A header
    row and lines starting with '#' are skipped. Malformed rows and rows
    with out-of-range coordinates are dropped with a warning; duplicate
    keys keep the last row seen.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as handle:
            return load_gazetteer(handle)

    warnings: list[str] = []
    entries: list[GazetteerEntry] = []
    for lineno, row in enumerate(csv.reader(source), start=1):
        if not row or (row[0].strip().startswith("#")):
            continue
        if lineno == 1 and row[0].strip().casefold() == "country":
            continue
        if len(row) < 5:
            warnings.append(f"malformed-row:{lineno}")
            continue
        country = row[0].strip()
        if not country:
            warnings.append(f"malformed-row:{lineno}")
            continue
        try:
            lat, lon = float(row[3]), float(row[4])
        except ValueError:
            warnings.append(f"malformed-row:{lineno}")
            continue
        if not (-90.0 <= lat <= 90.0) or not (-180.0 < lon <= 180.0):
            warnings.append(f"out-of-range-row:{lineno}")
            continue
        entries.append(
            GazetteerEntry(
                country=country,
                state_or_province=row[1].strip() or None,
                city=row[2].strip() or None,
                point=GeoPoint(lat, lon),
            )
        )
    return Gazetteer(entries, warnings)


def default_gazetteer_path() -> Path:
    """Path of the gazetteer CSV bundled with the package."""
    with resources.as_file(resources.files("eventlens").joinpath("data/gazetteer.csv")) as p:
        return Path(p)


def deepest_level(name: GeoName) -> str:
    """The finest populated level of a place name: city > state > country."""
    if name.city is not None:
        return "city"
    if name.state_or_province is not None:
        return "state"
    if name.country is not None:
        return "country"
    return "none"


def resolve(name: GeoName, gz: Gazetteer) -> GeoPoint | None:
    """Resolve a place name to coordinates at its deepest matchable level.

    Lookup order: exact (country, state, city); then the same with the
    state relaxed (model output often pairs country+city with an NA state);
    then (country, state); then (country). Returns None when nothing
    matches -- a legal outcome the metric treats as "no valid prediction".
    """
    level = deepest_level(name)
    if level == "none":
        return None
    candidates: list[tuple[str | None, str | None, str | None]] = []
    if level == "city":
        candidates.append((name.country, name.state_or_province, name.city))
        if name.state_or_province is not None:
            candidates.append((name.country, None, name.city))
    if level in ("city", "state") and name.state_or_province is not None:
        candidates.append((name.country, name.state_or_province, None))
    if name.country is not None:
        candidates.append((name.country, None, None))
    for country, state, city in candidates:
        point = gz.lookup(country, state, city)
        if point is not None:
            return point
    return None
