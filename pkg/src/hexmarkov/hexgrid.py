"""Hexagonal state space: a flat-top axial lattice on a local projection.

Coordinates are projected with an equirectangular projection about the grid
origin (longitude scaled by ``cos(lat0)``) and binned into flat-top hexagons
of edge length ``a`` metres.  Cells are addressed by axial ``(q, r)``.

Inside the vectorized pipeline a cell travels as a single ``int64`` key
(see :func:`pack`); keys order exactly like ``(q, r)`` tuples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels

EARTH_RADIUS_M = 6_371_008.8
DEFAULT_EDGE_M = 3722.0

_KEY_OFFSET = 1 << 20
_KEY_SHIFT = 21

# axial offsets of the six neighbours
AXIAL_DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))


class OutOfDomainError(ValueError):
    """A coordinate or cell lies outside the study bounding box."""


class CellId(NamedTuple):
    q: int
    r: int

    def __str__(self):
        return f"{self.q}:{self.r}"

    @classmethod
    def parse(cls, text: str) -> "CellId":
        q, r = text.split(":")
        return cls(int(q), int(r))


@dataclass(frozen=True)
class BoundingBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not (-90 <= self.lat_min < self.lat_max <= 90):
            raise ValueError(f"degenerate latitude range [{self.lat_min}, {self.lat_max}]")
        if not (-180 <= self.lon_min < self.lon_max <= 180):
            raise ValueError(f"degenerate longitude range [{self.lon_min}, {self.lon_max}]")

    def contains(self, lat, lon):
        lat = np.asarray(lat)
        lon = np.asarray(lon)
        return ((lat >= self.lat_min) & (lat <= self.lat_max)
                & (lon >= self.lon_min) & (lon <= self.lon_max))

    @property
    def centroid(self) -> tuple[float, float]:
        return ((self.lat_min + self.lat_max) / 2, (self.lon_min + self.lon_max) / 2)


@dataclass(frozen=True)
class GridConfig:
    """Immutable description of the hexagonal lattice.

    ``origin`` defaults to the bounding-box centroid.  When
    ``target_area_km2`` is set, the hexagon area implied by
    ``edge_length_m`` must match it within 0.1 %.
    """

    bbox: BoundingBox
    edge_length_m: float = DEFAULT_EDGE_M
    origin: tuple[float, float] | None = None
    target_area_km2: float | None = 36.0
    orientation: str = "flat"
    _cos_lat0: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.edge_length_m > 0:
            raise ValueError("edge length must be positive")
        if self.orientation != "flat":
            raise ValueError("only flat-top orientation is supported")
        if self.origin is None:
            object.__setattr__(self, "origin", self.bbox.centroid)
        if self.target_area_km2 is not None:
            area = self.cell_area_km2
            if abs(area - self.target_area_km2) > 1e-3 * self.target_area_km2:
                raise ValueError(
                    f"hexagon area {area:.4f} km^2 differs from target "
                    f"{self.target_area_km2} km^2 by more than 0.1%")
        object.__setattr__(self, "_cos_lat0", math.cos(math.radians(self.origin[0])))

    @property
    def cell_area_km2(self) -> float:
        return 1.5 * math.sqrt(3.0) * self.edge_length_m ** 2 / 1e6

    def project(self, lat, lon):
        """Degrees -> local metres (x east, y north)."""
        lat0, lon0 = self.origin
        x = np.radians(np.asarray(lon, dtype=np.float64) - lon0) * (EARTH_RADIUS_M * self._cos_lat0)
        y = np.radians(np.asarray(lat, dtype=np.float64) - lat0) * EARTH_RADIUS_M
        return x, y

    def unproject(self, x, y):
        lat0, lon0 = self.origin
        lon = lon0 + np.degrees(np.asarray(x, dtype=np.float64) / (EARTH_RADIUS_M * self._cos_lat0))
        lat = lat0 + np.degrees(np.asarray(y, dtype=np.float64) / EARTH_RADIUS_M)
        return lat, lon


def pack(q, r):
    """Pack axial coordinates into sortable int64 keys."""
    return ((np.asarray(q, dtype=np.int64) + _KEY_OFFSET) << _KEY_SHIFT) | (
        np.asarray(r, dtype=np.int64) + _KEY_OFFSET)


def unpack(key):
    key = np.asarray(key, dtype=np.int64)
    return (key >> _KEY_SHIFT) - _KEY_OFFSET, (key & ((1 << _KEY_SHIFT) - 1)) - _KEY_OFFSET


def key_to_cell(key: int) -> CellId:
    key = int(key)
    return CellId((key >> _KEY_SHIFT) - _KEY_OFFSET, (key & ((1 << _KEY_SHIFT) - 1)) - _KEY_OFFSET)


def cells_of(lat, lon, cfg: GridConfig):
    """Vectorized axial cells ``(q, r)`` of many points; no domain check."""
    x, y = cfg.project(lat, lon)
    return kernels.hex_round(np.atleast_1d(x), np.atleast_1d(y), cfg.edge_length_m)


def cell_of(lat: float, lon: float, cfg: GridConfig) -> CellId:
    if not cfg.bbox.contains(lat, lon):
        raise OutOfDomainError(f"({lat}, {lon}) is outside the study bounding box")
    q, r = cells_of([lat], [lon], cfg)
    return CellId(int(q[0]), int(r[0]))


def _center_xy(q, r, a):
    q = np.asarray(q, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    return a * 1.5 * q, a * math.sqrt(3.0) * (r + q / 2.0)


def center_of(cell: CellId, cfg: GridConfig) -> tuple[float, float]:
    """(lat, lon) of a cell centre."""
    x, y = _center_xy(cell[0], cell[1], cfg.edge_length_m)
    lat, lon = cfg.unproject(x, y)
    return float(lat), float(lon)


def hexagon_xy(cell: CellId, cfg: GridConfig) -> np.ndarray:
    """Six projected vertices, counter-clockwise from the east vertex."""
    cx, cy = _center_xy(cell[0], cell[1], cfg.edge_length_m)
    ang = np.radians(np.arange(6) * 60.0)
    return np.column_stack([cx + cfg.edge_length_m * np.cos(ang),
                            cy + cfg.edge_length_m * np.sin(ang)])


def polygon(cell: CellId, cfg: GridConfig) -> list[list[float]]:
    """Closed 7-point [lon, lat] ring (GeoJSON order, counter-clockwise)."""
    xy = hexagon_xy(cell, cfg)
    lat, lon = cfg.unproject(xy[:, 0], xy[:, 1])
    ring = [[float(lo), float(la)] for la, lo in zip(lat, lon)]
    ring.append(ring[0])
    return ring


def geojson_polygon(cell: CellId, cfg: GridConfig) -> dict:
    return {"type": "Polygon", "coordinates": [polygon(cell, cfg)]}


def intersects_bbox(cell: CellId, cfg: GridConfig) -> bool:
    """Closed hexagon/box intersection by separating axes in the projected plane."""
    bb = cfg.bbox
    bx, by = cfg.project([bb.lat_min, bb.lat_max], [bb.lon_min, bb.lon_max])
    rect = np.array([[bx[0], by[0]], [bx[1], by[0]], [bx[1], by[1]], [bx[0], by[1]]])
    hexa = hexagon_xy(cell, cfg)
    eps = 1e-9 * cfg.edge_length_m
    for deg in (0.0, 90.0, 30.0, 150.0):
        axis = np.array([math.cos(math.radians(deg)), math.sin(math.radians(deg))])
        a = rect @ axis
        h = hexa @ axis
        if a.max() < h.min() - eps or h.max() < a.min() - eps:
            return False
    return True


def neighbors(cell: CellId, cfg: GridConfig) -> set[CellId]:
    """Geometric neighbours of ``cell`` that intersect the bounding box."""
    out = set()
    for dq, dr in AXIAL_DIRECTIONS:
        c = CellId(cell[0] + dq, cell[1] + dr)
        if intersects_bbox(c, cfg):
            out.add(c)
    return out


def hex_distance(a: CellId, b: CellId) -> int:
    dq = a[0] - b[0]
    dr = a[1] - b[1]
    return (abs(dq) + abs(dr) + abs(dq + dr)) // 2


def hex_disk(center: CellId, radius: int) -> list[CellId]:
    """All cells within ``radius`` steps of ``center``, sorted by (q, r)."""
    out = []
    for dq in range(-radius, radius + 1):
        for dr in range(max(-radius, -dq - radius), min(radius, -dq + radius) + 1):
            out.append(CellId(center[0] + dq, center[1] + dr))
    return sorted(out)


@dataclass
class StateSequence:
    """Cells visited at a fixed cadence: element k is at ``start + k*dt``."""

    vessel_id: int
    start: int
    dt: int
    cells: list[CellId]

    @property
    def times(self) -> np.ndarray:
        return self.start + self.dt * np.arange(len(self.cells), dtype=np.int64)

    def __len__(self):
        return len(self.cells)


def discretize(rt, cfg: GridConfig) -> tuple[list[StateSequence], int]:
    """Map a resampled trajectory onto cells.

    Samples outside the bounding box are dropped and split the sequence.
    Returns the resulting sequences and the number of dropped samples.
    """
    n = len(rt.lat)
    if n == 0:
        return [], 0
    inside = cfg.bbox.contains(rt.lat, rt.lon)
    q, r = cells_of(rt.lat, rt.lon, cfg)
    out = []
    k = 0
    while k < n:
        if not inside[k]:
            k += 1
            continue
        j = k
        while j < n and inside[j]:
            j += 1
        cells = [CellId(int(a), int(b)) for a, b in zip(q[k:j], r[k:j])]
        out.append(StateSequence(rt.vessel_id, rt.start + k * rt.dt, rt.dt, cells))
        k = j
    return out, int(n - inside.sum())
