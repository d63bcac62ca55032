"""Run configuration: TOML file + CLI overrides -> one frozen manifest.

The manifest written into a run directory contains everything that
determines a mock-backend run -- dataset path, pipeline flags, backend
parameters (never secrets), metric constants, and content checksums for the
instruction templates and the gazetteer -- so re-running the same manifest
reproduces the same artifacts byte for byte. Wall-clock timestamps are kept
out of the manifest on purpose; they live in the run_meta sidecar.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .gazetteer import default_gazetteer_path
from .metrics import GeoConfig, TemporalConfig, TEMPORAL_TOLERANCES, TEMPORAL_WEIGHTS
from .pipeline import PipelineConfig
from .prompts import template_checksums


@dataclass
class BackendConfig:
    name: str = "mock"  # mock | http
    fixtures: str | None = None
    url: str | None = None
    model: str = ""
    temperature: float = 0.0
    timeout_s: float = 120.0
    max_retries: int = 3
    backoff_s: float = 1.0
    capture: bool = False


@dataclass
class EmbeddingConfig:
    provider: str = "stub"  # stub | remote
    url: str | None = None
    dim: int = 256


@dataclass
class RunConfig:
    run_id: str = "run"
    dataset: str = ""
    out_dir: str = "runs"
    limit: int | None = None
    max_in_flight: int = 8
    abort_exhausted_fraction: float = 0.5


@dataclass
class MetricsConfig:
    profile: str = "tara"
    d_max_km: float = 1000.0
    earth_radius_km: float = 6371.0
    temporal_tolerances: dict[str, float] = field(
        default_factory=lambda: dict(TEMPORAL_TOLERANCES)
    )
    temporal_weights: dict[str, float] = field(default_factory=lambda: dict(TEMPORAL_WEIGHTS))

    def geo_config(self) -> GeoConfig:
        return GeoConfig(d_max_km=self.d_max_km, earth_radius_km=self.earth_radius_km)

    def temporal_config(self) -> TemporalConfig:
        return TemporalConfig(
            tolerances=dict(self.temporal_tolerances), weights=dict(self.temporal_weights)
        )


@dataclass
class Config:
    run: RunConfig = field(default_factory=RunConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    gazetteer_path: str | None = None

    def resolved_gazetteer_path(self) -> Path:
        return Path(self.gazetteer_path) if self.gazetteer_path else default_gazetteer_path()


def _apply_section(target: Any, values: dict) -> Any:
    known = {f: getattr(target, f) for f in target.__dataclass_fields__}
    unknown = set(values) - set(known)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    known.update(values)
    return type(target)(**known)


def load_config(path: str | Path | None = None, base_dir: Path | None = None) -> Config:
    """Load a TOML config file; missing sections keep their defaults.

    Relative paths inside the file (dataset, fixtures, gazetteer) are
    resolved against the config file's own directory.
    """
    cfg = Config()
    if path is None:
        return cfg
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    base = base_dir or path.parent
    cfg.run = _apply_section(cfg.run, data.get("run", {}))
    cfg.backend = _apply_section(cfg.backend, data.get("backend", {}))
    cfg.embedding = _apply_section(cfg.embedding, data.get("embedding", {}))
    cfg.metrics = _apply_section(cfg.metrics, data.get("metrics", {}))
    cfg.pipeline = _apply_section(cfg.pipeline, data.get("pipeline", {}))
    cfg.gazetteer_path = data.get("gazetteer", {}).get("path")
    for attr, value in (("dataset", cfg.run.dataset), ("out_dir", cfg.run.out_dir)):
        if value and not Path(value).is_absolute():
            setattr(cfg.run, attr, str(base / value))
    if cfg.backend.fixtures and not Path(cfg.backend.fixtures).is_absolute():
        cfg.backend.fixtures = str(base / cfg.backend.fixtures)
    if cfg.gazetteer_path and not Path(cfg.gazetteer_path).is_absolute():
        cfg.gazetteer_path = str(base / cfg.gazetteer_path)
    return cfg


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def build_manifest(cfg: Config) -> dict:
    """The frozen, secret-free description of a run."""
    backend_params = asdict(cfg.backend)
    return {
        "run_id": cfg.run.run_id,
        "dataset_path": cfg.run.dataset,
        "dataset_limit": cfg.run.limit,
        "profile": cfg.metrics.profile,
        "pipeline": asdict(cfg.pipeline),
        "backend": backend_params,
        "embedding": asdict(cfg.embedding),
        "metrics": {
            "d_max_km": cfg.metrics.d_max_km,
            "earth_radius_km": cfg.metrics.earth_radius_km,
            "temporal_tolerances": cfg.metrics.temporal_tolerances,
            "temporal_weights": cfg.metrics.temporal_weights,
        },
        "max_in_flight": cfg.run.max_in_flight,
        "checksums": {
            "package_version": __version__,
            "templates": template_checksums(),
            "gazetteer": _sha256_file(cfg.resolved_gazetteer_path()),
            "dataset": _sha256_file(Path(cfg.run.dataset)) if cfg.run.dataset else None,
        },
    }
