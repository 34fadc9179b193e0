"""Matcher configuration and candidate preparation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional

from .errors import ConfigError
from .network import OnEdgePosition, RoadNetwork
from .scoring import MODIFIED, ST, STB, VARIANTS
from .trajectory import GpsPoint

VARIANT_ALIASES = {"st": ST, "modified": MODIFIED, "modifiedst": MODIFIED, "stb": STB}


def normalize_variant(name: str) -> str:
    if name in VARIANTS:
        return name
    try:
        return VARIANT_ALIASES[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown variant {name!r}; expected one of st, modified, stb") from None


@dataclass(frozen=True)
class MatchConfig:
    """Parameters for one matcher variant.

    ``ST`` searches a fixed radius with a candidate cap and fixed sigma;
    ``ModifiedST`` and ``STB`` grow a buffer from each point's uncertainty
    and derive sigma from it.
    """

    variant: str = ST
    fixed_radius_m: float = 50.0
    sigma_m: float = 20.0
    max_candidates: int = 5
    r_max_m: float = 50.0
    buffer_step_m: float = 2.0
    sigma_min_m: float = 5.0
    sigma_max_m: float = 50.0
    dynamic_max_candidates: Optional[int] = None
    observation_normalization: str = "printed"
    dispersion: str = "std"
    # "avg_speed": estimated time = network distance / observed average speed
    # "speed_limit": estimated time = network distance / mean speed limit of the path
    travel_time_estimate: str = "avg_speed"

    def __post_init__(self):
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        for name in ("fixed_radius_m", "sigma_m", "r_max_m", "buffer_step_m", "sigma_min_m", "sigma_max_m"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.sigma_min_m > self.sigma_max_m:
            raise ConfigError("sigma_min_m must not exceed sigma_max_m")
        if self.max_candidates < 1:
            raise ConfigError("max_candidates must be at least 1")
        if self.dynamic_max_candidates is not None and self.dynamic_max_candidates < 1:
            raise ConfigError("dynamic_max_candidates must be at least 1")
        if self.observation_normalization not in ("printed", "gaussian"):
            raise ConfigError("observation_normalization must be 'printed' or 'gaussian'")
        if self.dispersion not in ("std", "variance"):
            raise ConfigError("dispersion must be 'std' or 'variance'")
        if self.travel_time_estimate not in ("avg_speed", "speed_limit"):
            raise ConfigError("travel_time_estimate must be 'avg_speed' or 'speed_limit'")

    @property
    def dynamic(self) -> bool:
        return self.variant != ST

    @classmethod
    def from_dict(cls, data: dict) -> "MatchConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown matcher settings: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Candidate:
    position: OnEdgePosition
    dist_to_gps_m: float

    @property
    def edge_id(self) -> str:
        return self.position.edge_id


@dataclass(frozen=True)
class CandidateLayer:
    """Candidates of one GPS point, nearest first. Empty means no road was found."""

    gps_index: int
    candidates: tuple[Candidate, ...]
    sigma_used_m: float
    radius_used_m: float

    def __len__(self):
        return len(self.candidates)


def _collect(network: RoadNetwork, point: GpsPoint, r: float, cap: Optional[int]) -> tuple[Candidate, ...]:
    found = network.candidates_within(point.xy, r)
    if cap is not None:
        found = found[:cap]
    return tuple(Candidate(pos, d) for d, _, pos in found)


def prepare_candidates_fixed(point: GpsPoint, network: RoadNetwork, r: float, m_max: int, sigma_m: float = 20.0,
                             gps_index: int = 0) -> CandidateLayer:
    """Project ``point`` onto every edge within ``r`` and keep the ``m_max`` nearest."""
    if r <= 0 or m_max < 1:
        raise ConfigError("need r > 0 and m_max >= 1")
    return CandidateLayer(gps_index, _collect(network, point, r, m_max), sigma_m, r)


def dynamic_sigma(uncertainty_m: float, cfg: MatchConfig) -> float:
    return min(max(uncertainty_m, cfg.sigma_min_m), cfg.sigma_max_m)


def prepare_candidates_dynamic(point: GpsPoint, network: RoadNetwork, cfg: MatchConfig,
                               gps_index: int = 0) -> CandidateLayer:
    """Search from the point's uncertainty radius, widening by ``buffer_step_m``.

    The radius starts at ``min(uncertainty, r_max)``; the last attempt is made
    at exactly ``r_max``.
    """
    r = min(point.uncertainty_m, cfg.r_max_m)
    while True:
        cands = _collect(network, point, r, cfg.dynamic_max_candidates)
        if cands or r >= cfg.r_max_m:
            break
        r = min(r + cfg.buffer_step_m, cfg.r_max_m)
    return CandidateLayer(gps_index, cands, dynamic_sigma(point.uncertainty_m, cfg), r)


def prepare_candidates(point: GpsPoint, network: RoadNetwork, cfg: MatchConfig, gps_index: int = 0) -> CandidateLayer:
    if cfg.dynamic:
        return prepare_candidates_dynamic(point, network, cfg, gps_index)
    return prepare_candidates_fixed(point, network, cfg.fixed_radius_m, cfg.max_candidates, cfg.sigma_m, gps_index)
