"""Run configuration for the command line tool, read from one JSON document."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from .candidates import MatchConfig, normalize_variant
from .errors import ConfigError
from .scoring import MODIFIED

# keys naming input files that must exist when the config is validated
_INPUT_PATHS = ("nodes", "edges", "trajectories", "training_trajectories", "evaluation_trajectories",
                "polygon", "edge_scores", "results_a", "results_b", "reference")


@dataclass
class RunConfig:
    nodes: Optional[Path] = None
    edges: Optional[Path] = None
    trajectories: Optional[Path] = None
    training_trajectories: Optional[Path] = None
    evaluation_trajectories: Optional[Path] = None
    polygon: Optional[Path] = None
    edge_scores: Optional[Path] = None
    output_dir: Path = Path("output")
    mode: str = "planar"
    cell_size_m: float = 100.0
    n_min: int = 10
    v_min_kmh: float = 6.0
    min_interval_s: float = 120.0
    sample_size: Optional[int] = None
    train_size: Optional[int] = None
    seed: int = 0
    workers: int = 1
    variant: str = MODIFIED
    geojson: bool = False
    paired: bool = False
    accumulation_mode: str = "candidates"
    # compare inputs: result directories written by ``match``
    results_a: Optional[Path] = None
    results_b: Optional[Path] = None
    reference: Optional[Path] = None
    label_a: Optional[str] = None
    label_b: Optional[str] = None
    # highway class -> km/h, used when imputation finds no known limit for a class
    speed_defaults: Optional[dict[str, float]] = None
    matchers: dict[str, MatchConfig] = field(default_factory=dict)

    def match_config(self, variant: Optional[str] = None) -> MatchConfig:
        v = normalize_variant(variant or self.variant)
        return self.matchers.get(v) or MatchConfig(variant=v)

    def header_lines(self) -> list[str]:
        return [f"seed={self.seed}"]


def _path(base: Path, value) -> Optional[Path]:
    if value is None or value == "":
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def from_dict(data: dict[str, Any], base_dir: Path = Path(".")) -> RunConfig:
    """Build a config; relative paths resolve against ``base_dir``."""
    data = dict(data)
    known = {f for f in RunConfig.__dataclass_fields__}
    matchers_raw = data.pop("match", {}) or {}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _INPUT_PATHS or key == "output_dir":
            kwargs[key] = _path(base_dir, value)
        else:
            kwargs[key] = value
    if kwargs.get("output_dir") is None:
        kwargs["output_dir"] = base_dir / "output"
    matchers = {}
    if not isinstance(matchers_raw, dict):
        raise ConfigError("'match' must map variant names to matcher settings")
    for name, settings in matchers_raw.items():
        v = normalize_variant(name)
        matchers[v] = MatchConfig.from_dict({**(settings or {}), "variant": v})
    cfg = RunConfig(**kwargs, matchers=matchers)
    _check_values(cfg)
    return cfg


def _check_values(cfg: RunConfig) -> None:
    if cfg.mode not in ("planar", "geographic"):
        raise ConfigError(f"mode must be 'planar' or 'geographic', got {cfg.mode!r}")
    cfg.variant = normalize_variant(cfg.variant)
    if not isinstance(cfg.seed, int):
        raise ConfigError("seed must be an integer")
    if not isinstance(cfg.workers, int) or cfg.workers < 1:
        raise ConfigError("workers must be a positive integer")
    for name in ("sample_size", "train_size"):
        v = getattr(cfg, name)
        if v is not None and (not isinstance(v, int) or v < 1):
            raise ConfigError(f"{name} must be a positive integer")
    if cfg.n_min < 2:
        raise ConfigError("n_min must be at least 2")
    if cfg.v_min_kmh < 0 or cfg.min_interval_s <= 0 or cfg.cell_size_m <= 0:
        raise ConfigError("thresholds must be positive")
    if cfg.speed_defaults is not None:
        if not isinstance(cfg.speed_defaults, dict) or not all(
                isinstance(v, (int, float)) and v > 0 for v in cfg.speed_defaults.values()):
            raise ConfigError("speed_defaults must map highway classes to positive km/h values")
    if cfg.accumulation_mode not in ("candidates", "matched"):
        raise ConfigError("accumulation_mode must be 'candidates' or 'matched'")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return from_dict(data, path.parent)


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Apply command line flags; None means "not given"."""
    given = {k: v for k, v in overrides.items() if v is not None}
    if "output_dir" in given:
        given["output_dir"] = Path(given["output_dir"])
    out = replace(cfg, **given)
    _check_values(out)
    return out


def validate_inputs(cfg: RunConfig, required: tuple[str, ...] = ()) -> None:
    """Every referenced input must exist; ``required`` ones must also be set."""
    for key in required:
        if getattr(cfg, key) is None:
            raise ConfigError(f"config value {key!r} is required for this command")
    for key in _INPUT_PATHS:
        p = getattr(cfg, key)
        if p is not None and not p.exists():
            raise ConfigError(f"{key}: path does not exist: {p}")

