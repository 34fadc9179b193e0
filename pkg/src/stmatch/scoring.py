"""Transition scoring for the three matcher variants.

All functions are scalar and side-effect free so they can be checked one by
one against hand-computed values.
"""

from __future__ import annotations

import math
from typing import Sequence

from .errors import ConfigError, ContractError

ST = "ST"
MODIFIED = "ModifiedST"
STB = "STB"
VARIANTS = (ST, MODIFIED, STB)


def observation_probability(dist_m: float, sigma_m: float, normalization: str = "printed") -> float:
    """Gaussian-shaped likelihood of a candidate at ``dist_m`` from its GPS point.

    ``normalization="printed"`` uses the constant 1/sqrt(2*pi*sigma);
    ``"gaussian"`` uses the textbook density constant 1/(sqrt(2*pi)*sigma).
    """
    if sigma_m <= 0 or dist_m < 0:
        raise ContractError("need sigma > 0 and dist >= 0")
    if normalization == "printed":
        norm = 1.0 / math.sqrt(2.0 * math.pi * sigma_m)
    elif normalization == "gaussian":
        norm = 1.0 / (math.sqrt(2.0 * math.pi) * sigma_m)
    else:
        raise ConfigError(f"unknown normalization {normalization!r}")
    return norm * math.exp(-(dist_m * dist_m) / (2.0 * sigma_m * sigma_m))


def transmission_score(euclid_pp_m: float, network_dist_m: float) -> float:
    """Straight-line over network distance, clamped to at most 1."""
    if euclid_pp_m < 0 or network_dist_m < 0:
        raise ContractError("distances must be nonnegative")
    if network_dist_m <= 0:
        return 1.0
    return min(1.0, euclid_pp_m / network_dist_m)


def temporal_cosine(speed_limits_kmh: Sequence[float], v_avg_kmh: float) -> float:
    """Cosine similarity of the limits vector and a constant ``v_avg`` vector."""
    k = len(speed_limits_kmh)
    if k == 0:
        return 1.0
    if v_avg_kmh <= 0 or any(v <= 0 for v in speed_limits_kmh):
        raise ContractError("speeds must be positive")
    num = sum(v * v_avg_kmh for v in speed_limits_kmh)
    den = math.sqrt(sum(v * v for v in speed_limits_kmh)) * math.sqrt(k * v_avg_kmh * v_avg_kmh)
    return min(1.0, num / den)


def _log_ratio_penalty(a: float, b: float) -> float:
    return math.exp(-math.log(a / b) ** 2)


def travel_time_penalty(dt_obs_s: float, dt_est_s: float) -> float:
    """1 when estimated and observed travel times agree, decaying in the log ratio."""
    if dt_obs_s <= 0 or dt_est_s <= 0:
        raise ContractError("travel times must be positive")
    return _log_ratio_penalty(dt_est_s, dt_obs_s)


def speed_penalty(v_avg_kmh: float, v_lim_kmh: float) -> float:
    """Penalize only average speeds above the path's mean limit."""
    if v_avg_kmh <= 0 or v_lim_kmh <= 0:
        raise ContractError("speeds must be positive")
    if v_avg_kmh <= v_lim_kmh:
        return 1.0
    return _log_ratio_penalty(v_avg_kmh, v_lim_kmh)


def mean_speed_limit(speed_limits_kmh: Sequence[float]) -> float:
    return sum(speed_limits_kmh) / len(speed_limits_kmh)


def speed_variation_penalty(speed_limits_kmh: Sequence[float], dispersion: str = "std") -> float:
    """1 / (1 + dispersion/mean) over the limits along a path.

    ``dispersion="std"`` uses the population standard deviation,
    ``"variance"`` the mean squared deviation.
    """
    k = len(speed_limits_kmh)
    if k == 0:
        return 1.0
    if any(v <= 0 for v in speed_limits_kmh):
        raise ContractError("speed limits must be positive")
    mu = sum(speed_limits_kmh) / k
    var = sum((v - mu) ** 2 for v in speed_limits_kmh) / k
    if dispersion == "std":
        spread = math.sqrt(var)
    elif dispersion == "variance":
        spread = var
    else:
        raise ConfigError(f"unknown dispersion {dispersion!r}")
    return 1.0 / (1.0 + spread / mu)


def temporal_score_modified(p_tt: float, p_s: float, p_sv: float) -> float:
    return p_tt * p_s * p_sv


def transition_score(variant: str, observation: float, transmission: float, *, cosine: float = 1.0,
                     p_tt: float = 1.0, p_s: float = 1.0, p_sv: float = 1.0,
                     behavioral: float | None = None) -> float:
    """Combine sub-scores into the transition weight for ``variant``."""
    spatial = observation * transmission
    if variant == ST:
        return spatial * cosine
    if variant == MODIFIED:
        return spatial * temporal_score_modified(p_tt, p_s, p_sv)
    if variant == STB:
        if behavioral is None:
            raise ConfigError("STB scoring needs a behavioral score")
        return spatial * temporal_score_modified(p_tt, p_s, p_sv) * behavioral
    raise ConfigError(f"unknown variant {variant!r}")
