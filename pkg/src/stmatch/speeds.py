"""Fill in missing or non-numeric edge speed limits."""

from __future__ import annotations

import re
from collections import Counter, defaultdict
from typing import Mapping, Optional

from .errors import ImputationError
from .network import RoadNetwork

MPH_TO_KMH = 1.609344

# Implicit limits for common OSM zone codes (maxspeed=<country>:<zone>).
ZONE_CODES_KMH = {
    "it:urban": 50.0,
    "it:rural": 90.0,
    "it:trunk": 110.0,
    "it:motorway": 130.0,
    "fr:urban": 50.0,
    "fr:rural": 80.0,
    "fr:motorway": 130.0,
    "de:urban": 50.0,
    "de:rural": 100.0,
    "ch:urban": 50.0,
    "ch:rural": 80.0,
    "ch:motorway": 120.0,
    "at:urban": 50.0,
    "at:rural": 100.0,
    "gb:nsl_single": 60 * MPH_TO_KMH,
    "gb:nsl_dual": 70 * MPH_TO_KMH,
    "walk": 6.0,
    "living_street": 20.0,
}

DEFAULT_CLASS_SPEEDS_KMH = {
    "motorway": 130.0,
    "motorway_link": 80.0,
    "trunk": 110.0,
    "trunk_link": 60.0,
    "primary": 50.0,
    "primary_link": 50.0,
    "secondary": 50.0,
    "secondary_link": 50.0,
    "tertiary": 50.0,
    "tertiary_link": 50.0,
    "unclassified": 50.0,
    "residential": 30.0,
    "living_street": 20.0,
    "service": 20.0,
    "*": 50.0,
}

_SPLIT_RE = re.compile(r"[;|,]")
_NUM_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(km/h|kmh|kph|mph)?\s*$", re.IGNORECASE)


def parse_speed(token: str, zone_codes: Mapping[str, float] = ZONE_CODES_KMH) -> Optional[float]:
    """One maxspeed token to km/h, or None when it carries no usable value."""
    token = token.strip().strip("'\"").strip()
    if not token:
        return None
    m = _NUM_RE.match(token)
    if m:
        value = float(m.group(1))
        if m.group(2) and m.group(2).lower() == "mph":
            value *= MPH_TO_KMH
        return value if value > 0 else None
    return zone_codes.get(token.lower())


def parse_maxspeed(raw: str, zone_codes: Mapping[str, float] = ZONE_CODES_KMH) -> tuple[Optional[float], bool]:
    """Parse a raw maxspeed value; lists keep their greatest entry.

    Returns ``(km/h or None, was_multi_valued)``.
    """
    raw = (raw or "").strip().lstrip("[").rstrip("]")
    parts = [p for p in _SPLIT_RE.split(raw) if p.strip()]
    values = [v for v in (parse_speed(p, zone_codes) for p in parts) if v is not None]
    if not values:
        return None, False
    return max(values), len(parts) > 1


def _mode(values: Counter) -> float:
    # ties go to the larger limit
    return max(values.items(), key=lambda kv: (kv[1], kv[0]))[0]


def impute_speed_limits(network: RoadNetwork, class_defaults: Optional[Mapping[str, float]] = None,
                        zone_codes: Mapping[str, float] = ZONE_CODES_KMH) -> dict[str, int]:
    """Give every edge a positive ``speed_limit_kmh``; returns counts per rule.

    Rules, in order: numeric parse, greatest of a multi-value list, mode of
    the same street's known limits, mode of the highway class's known
    limits, then ``class_defaults`` (key ``"*"`` is the global fallback).
    Known limits are those present before imputation, so the outcome does
    not depend on edge order and re-running changes nothing.
    """
    defaults = DEFAULT_CLASS_SPEEDS_KMH if class_defaults is None else class_defaults
    report = Counter(already_set=0, parsed=0, multi_value=0, street_name=0, highway_mode=0, class_default=0)
    missing = []
    for e in network.edges.values():
        if e.speed_limit_kmh is not None and e.speed_limit_kmh > 0:
            report["already_set"] += 1
            continue
        value, multi = parse_maxspeed(e.maxspeed_raw, zone_codes)
        if value is None:
            missing.append(e)
            continue
        e.speed_limit_kmh = value
        report["multi_value" if multi else "parsed"] += 1

    missing_ids = {e.id for e in missing}
    by_street: dict[str, Counter] = defaultdict(Counter)
    by_class: dict[str, Counter] = defaultdict(Counter)
    for e in network.edges.values():
        if e.id in missing_ids:
            continue
        if e.street_name:
            by_street[e.street_name][e.speed_limit_kmh] += 1
        by_class[e.highway_class][e.speed_limit_kmh] += 1

    unresolved = []
    for e in missing:
        if e.street_name and by_street.get(e.street_name):
            e.speed_limit_kmh = _mode(by_street[e.street_name])
            report["street_name"] += 1
        elif by_class.get(e.highway_class):
            e.speed_limit_kmh = _mode(by_class[e.highway_class])
            report["highway_mode"] += 1
        elif e.highway_class in defaults or "*" in defaults:
            e.speed_limit_kmh = float(defaults.get(e.highway_class, defaults.get("*")))
            report["class_default"] += 1
        else:
            unresolved.append(e.id)
        if e.speed_limit_kmh is not None and e.speed_limit_kmh <= 0:
            e.speed_limit_kmh = None
            unresolved.append(e.id)
    if unresolved:
        raise ImputationError(unresolved)
    return dict(report)
