"""Pipeline configuration with validated dotted keys.

Defaults are the experiment-setup hyperparameters (window 30/20, lambda 0.3,
phi 7, kappa 0.2 m). ``PRESETS`` adds the ablation-table window settings.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .errors import ConfigError
from .windows import WindowConfig


@dataclass
class SVTrackSection:
    iou_min: float = 0.3
    max_age: int = 10
    min_hits: int = 2
    use_labels: bool = False


@dataclass
class AssocSection:
    lam: float = 0.3
    mode: str = "box"


@dataclass
class CMMTSection:
    phi: int = 7
    kappa: float = 0.2
    method: str = "cmmt"


@dataclass
class LinkerSection:
    gate: Optional[float] = None  # 0.5 m for box mode, 0.3 m for pose mode
    max_window_misses: int = 1


@dataclass
class MetricsSection:
    threshold: float = 0.5
    pcp_alpha: float = 0.5
    limbs: Optional[str] = None


@dataclass
class IOSection:
    calibration: Optional[str] = None
    detections: Optional[str] = None
    ground_truth: Optional[str] = None
    output: Optional[str] = None
    diagnostics: Optional[str] = None


@dataclass
class PipelineConfig:
    window: WindowConfig = field(default_factory=WindowConfig)
    svtrack: SVTrackSection = field(default_factory=SVTrackSection)
    assoc: AssocSection = field(default_factory=AssocSection)
    cmmt: CMMTSection = field(default_factory=CMMTSection)
    linker: LinkerSection = field(default_factory=LinkerSection)
    metrics: MetricsSection = field(default_factory=MetricsSection)
    io: IOSection = field(default_factory=IOSection)
    debug: bool = False

    @property
    def gate(self) -> float:
        if self.linker.gate is not None:
            return self.linker.gate
        return 0.3 if self.assoc.mode == "pose" else 0.5

    def validate(self):
        if self.assoc.mode not in ("box", "pose"):
            raise ConfigError(f"assoc.mode must be 'box' or 'pose', got {self.assoc.mode!r}")
        if self.cmmt.method not in ("cmmt", "ransac", "plain"):
            raise ConfigError(f"cmmt.method must be cmmt, ransac or plain, got {self.cmmt.method!r}")
        if not self.assoc.lam > 0:
            raise ConfigError("assoc.lambda must be positive")
        if self.cmmt.phi < 1:
            raise ConfigError("cmmt.phi must be >= 1")
        if not self.cmmt.kappa > 0:
            raise ConfigError("cmmt.kappa must be positive")
        if self.linker.gate is not None and not self.linker.gate > 0:
            raise ConfigError("linker.gate must be positive")
        if self.linker.max_window_misses < 1:
            raise ConfigError("linker.max_window_misses must be >= 1")
        if not self.metrics.threshold > 0:
            raise ConfigError("metrics.threshold must be positive")
        return self

    def with_overrides(self, overrides: dict[str, Any]) -> "PipelineConfig":
        flat = self.to_flat()
        for key, value in overrides.items():
            if key not in flat:
                raise ConfigError(f"unknown config key {key!r}")
            flat[key] = value
        return from_flat(flat)

    def to_flat(self) -> dict[str, Any]:
        out = {}
        for section, attrs in _SECTIONS.items():
            obj = getattr(self, section)
            for attr, key in attrs.items():
                out[f"{section}.{key}"] = getattr(obj, attr)
        out["debug"] = self.debug
        return out


# attribute name -> external key, per section
_SECTIONS = {
    "window": {"size": "size", "step": "step"},
    "svtrack": {f.name: f.name for f in dataclasses.fields(SVTrackSection)},
    "assoc": {"lam": "lambda", "mode": "mode"},
    "cmmt": {f.name: f.name for f in dataclasses.fields(CMMTSection)},
    "linker": {f.name: f.name for f in dataclasses.fields(LinkerSection)},
    "metrics": {f.name: f.name for f in dataclasses.fields(MetricsSection)},
    "io": {f.name: f.name for f in dataclasses.fields(IOSection)},
}
_CLASSES = {
    "svtrack": SVTrackSection,
    "assoc": AssocSection,
    "cmmt": CMMTSection,
    "linker": LinkerSection,
    "metrics": MetricsSection,
    "io": IOSection,
}
_TYPES = {
    "window.size": int, "window.step": int,
    "svtrack.iou_min": float, "svtrack.max_age": int, "svtrack.min_hits": int, "svtrack.use_labels": bool,
    "assoc.lambda": float, "assoc.mode": str,
    "cmmt.phi": int, "cmmt.kappa": float, "cmmt.method": str,
    "linker.gate": float, "linker.max_window_misses": int,
    "metrics.threshold": float, "metrics.pcp_alpha": float, "metrics.limbs": str,
    "io.calibration": str, "io.detections": str, "io.ground_truth": str, "io.output": str,
    "io.diagnostics": str, "debug": bool,
}


def _coerce(key, value):
    if value is None:
        return None
    typ = _TYPES[key]
    if typ is bool and isinstance(value, str):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: cannot read {value!r} as a boolean")
    try:
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def from_flat(flat: dict[str, Any]) -> PipelineConfig:
    defaults = PipelineConfig().to_flat()
    unknown = set(flat) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = {**defaults, **{k: _coerce(k, v) for k, v in flat.items()}}
    kwargs = {}
    for section, attrs in _SECTIONS.items():
        values = {attr: merged[f"{section}.{key}"] for attr, key in attrs.items()}
        if section == "window":
            try:
                kwargs["window"] = WindowConfig(**values)
            except ConfigError:
                raise
        else:
            kwargs[section] = _CLASSES[section](**values)
    return PipelineConfig(**kwargs, debug=bool(merged["debug"])).validate()


def from_mapping(data: dict) -> PipelineConfig:
    """Build from nested ``{section: {key: value}}`` mappings (YAML layout)."""
    flat = {}
    for section, body in (data or {}).items():
        if isinstance(body, dict):
            for key, value in body.items():
                flat[f"{section}.{key}"] = value
        else:
            flat[section] = body
    return from_flat(flat)


def load_config(path) -> PipelineConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return from_mapping(data)


PRESETS = {
    "setup": {"window.size": 30, "window.step": 20, "assoc.lambda": 0.3},
    "ablation-default": {"window.size": 50, "window.step": 30, "assoc.lambda": 0.3},
    "ablation-short": {"window.size": 30, "window.step": 20, "assoc.lambda": 0.3},
    "ablation-long": {"window.size": 70, "window.step": 50, "assoc.lambda": 0.3},
    "ablation-lambda-0.1": {"window.size": 50, "window.step": 30, "assoc.lambda": 0.1},
    "ablation-lambda-0.6": {"window.size": 50, "window.step": 30, "assoc.lambda": 0.6},
}


def preset(name) -> PipelineConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    return PipelineConfig().with_overrides(PRESETS[name])
