"""Map matching of GPS trajectories with ST-Matching and its variants."""

from .candidates import MatchConfig
from .evaluation import compute_metrics
from .matcher import match_trajectory
from .network import RoadNetwork, load_network
from .trajectory import GpsPoint, Trajectory, load_trajectories

__all__ = [
    "GpsPoint",
    "MatchConfig",
    "RoadNetwork",
    "Trajectory",
    "compute_metrics",
    "load_network",
    "load_trajectories",
    "match_trajectory",
]

__version__ = "0.1.0"
