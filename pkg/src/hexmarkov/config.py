"""Pipeline configuration: a versioned YAML file validated into :class:`PipelineConfig`."""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .aggregate import DEFAULT_KNOTS, QuantizationConfig
from .hexgrid import DEFAULT_EDGE_M, BoundingBox, GridConfig
from .ingest import ALL, CATEGORIES, WINDOW_PRESETS, AisSchema, TimeWindow, WindowError, check_windows
from .trajectory import DEFAULT_DT, DEFAULT_MAX_GAP, DEFAULT_WINDOW

CONFIG_VERSION = 1
OUT_ENV = "HEXMARKOV_OUT"

KNOWN_KEYS = {
    "config_version", "inputs", "schema", "grid", "dt", "segment_window", "max_gap", "windows",
    "categories", "quantization", "output_dir", "workers", "seed", "max_reject_fraction",
    "exclude_nav_status", "include_terminal_dwell", "modularity_weighting",
}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (CLI exit status 2)."""


@dataclass
class PipelineConfig:
    inputs: list
    grid: GridConfig
    dt: int = DEFAULT_DT
    segment_window: int = DEFAULT_WINDOW
    max_gap: int = DEFAULT_MAX_GAP
    windows: tuple = WINDOW_PRESETS["covid"]
    categories: tuple = CATEGORIES + (ALL,)
    quantization: QuantizationConfig = field(default_factory=QuantizationConfig)
    output_dir: Path = Path("out")
    workers: int = 1
    seed: int | None = 0
    max_reject_fraction: float = 0.25
    schema: AisSchema = field(default_factory=AisSchema)
    exclude_nav_status: tuple = ()
    include_terminal_dwell: bool = False
    modularity_weighting: str = "probability"
    source_hash: str = ""

    def validate(self) -> "PipelineConfig":
        if self.dt <= 0 or self.segment_window <= 0:
            raise ConfigError("dt and segment_window must be positive")
        if self.segment_window % self.dt:
            raise ConfigError(f"dt={self.dt} does not divide segment_window={self.segment_window}")
        if self.max_gap <= 0:
            raise ConfigError("max_gap must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.max_reject_fraction <= 1:
            raise ConfigError("max_reject_fraction must lie in [0, 1]")
        if self.modularity_weighting not in ("probability", "count"):
            raise ConfigError("modularity_weighting must be 'probability' or 'count'")
        unknown = [c for c in self.categories if c not in CATEGORIES + (ALL,)]
        if unknown:
            raise ConfigError(f"unknown categories: {unknown}")
        try:
            check_windows(self.windows)
        except WindowError as exc:
            raise ConfigError(str(exc)) from None
        if not self.inputs:
            raise ConfigError("no input files configured")
        missing = [str(p) for p in self.inputs if not Path(p).is_file()]
        if missing:
            raise ConfigError(f"input files not found: {missing}")
        return self


def _windows(spec):
    if isinstance(spec, str):
        if spec not in WINDOW_PRESETS:
            raise ConfigError(f"unknown window preset {spec!r}")
        return WINDOW_PRESETS[spec]
    out = []
    for w in spec:
        try:
            out.append(TimeWindow(str(w["label"]), _as_date(w["start"]), _as_date(w["end"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad window entry {w!r}: {exc}") from None
    return tuple(out)


def _as_date(v):
    import datetime as dt

    return v if isinstance(v, dt.date) else dt.date.fromisoformat(str(v))


def _grid(spec: dict) -> GridConfig:
    try:
        bbox = BoundingBox(**spec["bbox"])
        origin = spec.get("origin")
        return GridConfig(
            bbox,
            float(spec.get("edge_length_m", DEFAULT_EDGE_M)),
            origin=tuple(origin) if origin is not None else None,
            target_area_km2=spec.get("target_area_km2", 36.0),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid section: {exc}") from None


def config_from_dict(data: dict, base_dir: Path = Path("."), source_hash: str = "") -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    version = data.get("config_version")
    if version != CONFIG_VERSION:
        raise ConfigError(f"config_version must be {CONFIG_VERSION}, got {version!r}")
    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {unknown}")
    if "grid" not in data:
        raise ConfigError("configuration needs a grid section")
    inputs = data.get("inputs", [])
    if isinstance(inputs, str):
        inputs = [inputs]
    schema = data.get("schema", {}) or {}
    q = data.get("quantization", {}) or {}
    try:
        quant = QuantizationConfig(float(q.get("low", 1.0)), float(q.get("high", 98.0)),
                                   tuple(tuple(k) for k in q.get("knots", DEFAULT_KNOTS)))
        cfg = PipelineConfig(
            inputs=[(base_dir / p).resolve() for p in inputs],
            grid=_grid(data["grid"]),
            dt=int(data.get("dt", DEFAULT_DT)),
            segment_window=int(data.get("segment_window", DEFAULT_WINDOW)),
            max_gap=int(data.get("max_gap", DEFAULT_MAX_GAP)),
            windows=_windows(data.get("windows", "covid")),
            categories=tuple(data.get("categories", CATEGORIES + (ALL,))),
            quantization=quant,
            output_dir=(base_dir / data.get("output_dir", "out")).resolve(),
            workers=int(data.get("workers", 1)),
            seed=data.get("seed", 0),
            max_reject_fraction=float(data.get("max_reject_fraction", 0.25)),
            schema=AisSchema(schema.get("delimiter", ","), dict(schema.get("rename", {}))),
            exclude_nav_status=tuple(int(s) for s in data.get("exclude_nav_status", ())),
            include_terminal_dwell=bool(data.get("include_terminal_dwell", False)),
            modularity_weighting=str(data.get("modularity_weighting", "probability")),
            source_hash=source_hash,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path, out_dir=None, workers=None) -> PipelineConfig:
    """Read and validate a config file.

    The output directory resolves as ``out_dir`` argument, then the
    ``HEXMARKOV_OUT`` environment variable, then the file's ``output_dir``.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    cfg = config_from_dict(data, path.parent, hashlib.sha256(raw).hexdigest())
    override = out_dir or os.environ.get(OUT_ENV)
    if override:
        cfg.output_dir = Path(override).resolve()
    if workers is not None:
        cfg.workers = int(workers)
    return cfg.validate()
