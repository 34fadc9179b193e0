"""Planar geometry helpers: projection, polylines, WKT, point-in-polygon."""

from __future__ import annotations

import math
import re
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Sequence

Point = tuple[float, float]

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class LocalProjection:
    """Equirectangular projection about a reference latitude/longitude.

    Accurate to well under a meter over a city-sized extent, which is all the
    matcher needs. ``x`` grows east, ``y`` grows north, both in meters.
    """

    lat0: float
    lon0: float

    @classmethod
    def about_centroid(cls, latlons: Iterable[tuple[float, float]]) -> "LocalProjection":
        n = 0
        slat = slon = 0.0
        for lat, lon in latlons:
            slat += lat
            slon += lon
            n += 1
        if n == 0:
            raise ValueError("cannot build a projection from zero coordinates")
        return cls(slat / n, slon / n)

    def forward(self, lat: float, lon: float) -> Point:
        x = EARTH_RADIUS_M * math.radians(lon - self.lon0) * math.cos(math.radians(self.lat0))
        y = EARTH_RADIUS_M * math.radians(lat - self.lat0)
        return x, y

    def inverse(self, x: float, y: float) -> tuple[float, float]:
        lat = self.lat0 + math.degrees(y / EARTH_RADIUS_M)
        lon = self.lon0 + math.degrees(x / (EARTH_RADIUS_M * math.cos(math.radians(self.lat0))))
        return lat, lon


def distance(a: Point, b: Point) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def cumulative_lengths(coords: Sequence[Point]) -> list[float]:
    cum = [0.0]
    for a, b in zip(coords, coords[1:]):
        cum.append(cum[-1] + distance(a, b))
    return cum


def project_to_segment(p: Point, a: Point, b: Point) -> tuple[float, Point, float]:
    """Closest point of segment ``ab`` to ``p``.

    Returns ``(u, q, d)`` with ``u`` the clamped segment parameter in [0, 1],
    ``q`` the closest point and ``d`` its distance to ``p``.
    """
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return 0.0, a, distance(p, a)
    u = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / seg2
    if u <= 0.0:
        u, q = 0.0, a
    elif u >= 1.0:
        u, q = 1.0, b
    else:
        q = (a[0] + u * dx, a[1] + u * dy)
    return u, q, distance(p, q)


def project_to_polyline(p: Point, coords: Sequence[Point], cum: Sequence[float]) -> tuple[float, Point, float]:
    """Nearest point of a polyline: ``(offset along the line, point, distance)``.

    Ties between segments go to the earliest segment.
    """
    best = None
    for k in range(len(coords) - 1):
        u, q, d = project_to_segment(p, coords[k], coords[k + 1])
        if best is None or d < best[2]:
            best = (cum[k] + u * (cum[k + 1] - cum[k]), q, d)
    assert best is not None
    return best


def point_at_offset(coords: Sequence[Point], cum: Sequence[float], offset: float) -> Point:
    if offset <= 0.0:
        return coords[0]
    if offset >= cum[-1]:
        return coords[-1]
    k = bisect_right(cum, offset) - 1
    seg = cum[k + 1] - cum[k]
    u = (offset - cum[k]) / seg
    a, b = coords[k], coords[k + 1]
    return a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])


def segment_bbox_distance(p: Point, bbox: tuple[float, float, float, float]) -> float:
    """Distance from ``p`` to an axis-aligned box (0 when inside)."""
    minx, miny, maxx, maxy = bbox
    dx = max(minx - p[0], 0.0, p[0] - maxx)
    dy = max(miny - p[1], 0.0, p[1] - maxy)
    return math.hypot(dx, dy)


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_LINESTRING_RE = re.compile(r"^\s*LINESTRING\s*\((.*)\)\s*$", re.IGNORECASE | re.DOTALL)
_POLYGON_RE = re.compile(r"^\s*POLYGON\s*\((.*)\)\s*$", re.IGNORECASE | re.DOTALL)
_RING_RE = re.compile(r"\(([^()]*)\)")


def _parse_coord_list(body: str) -> list[Point]:
    coords = []
    for chunk in body.split(","):
        parts = chunk.split()
        if len(parts) < 2:
            raise ValueError(f"bad coordinate {chunk.strip()!r}")
        x, y = float(parts[0]), float(parts[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"non-finite coordinate {chunk.strip()!r}")
        coords.append((x, y))
    return coords


def parse_linestring(wkt: str) -> list[Point]:
    """Parse ``LINESTRING(x1 y1, x2 y2, ...)``; raises ValueError when malformed."""
    m = _LINESTRING_RE.match(wkt)
    if not m:
        raise ValueError(f"not a LINESTRING: {wkt[:40]!r}")
    body = m.group(1).strip()
    if not body:
        return []
    return _parse_coord_list(body)


def parse_polygon(wkt: str) -> list[list[Point]]:
    """Parse ``POLYGON((...), (...))`` into rings; the first is the shell."""
    m = _POLYGON_RE.match(wkt)
    if not m:
        raise ValueError(f"not a POLYGON: {wkt[:40]!r}")
    rings = [_parse_coord_list(r) for r in _RING_RE.findall(m.group(1))]
    if not rings:
        raise ValueError("POLYGON has no rings")
    return rings


def linestring_wkt(coords: Iterable[Point], precision: int = 3) -> str:
    return "LINESTRING(" + ", ".join(f"{x:.{precision}f} {y:.{precision}f}" for x, y in coords) + ")"


def _in_ring(p: Point, ring: Sequence[Point]) -> bool:
    # even-odd ray casting toward +x
    x, y = p
    inside = False
    n = len(ring)
    j = n - 1
    for i in range(n):
        xi, yi = ring[i]
        xj, yj = ring[j]
        if (yi > y) != (yj > y):
            x_cross = xi + (y - yi) * (xj - xi) / (yj - yi)
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def point_in_polygon(p: Point, rings: Sequence[Sequence[Point]]) -> bool:
    if not _in_ring(p, rings[0]):
        return False
    return not any(_in_ring(p, hole) for hole in rings[1:])
