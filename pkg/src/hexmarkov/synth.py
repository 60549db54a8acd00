"""Seeded synthetic AIS fleets with known ground truth.

Three behaviour primitives are supported:

``corridor``
    vessels run end to end along a polyline at constant speed, alternating
    direction, a fixed number of trips per day; silent between trips.
``loiter``
    fishing-style station keeping: each vessel sits near-stationary at a
    station (a cell centre of the zone) for ``dwell_minutes``, then moves to
    a neighbouring zone cell at ``transit_knots``; its schedule restarts at
    every UTC midnight.
``shuttle``
    ferries between two endpoints, silent while docked and on every day
    outside their ``active`` date ranges.

Geometry is computed in the grid's local projection, which is affine in
lat/lon, so constant-velocity legs are straight lines in degrees.
"""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import yaml

from .hexgrid import (DEFAULT_EDGE_M, BoundingBox, CellId, GridConfig, cell_of, cells_of,
                      hex_disk, hex_distance, intersects_bbox, _center_xy)

KNOT = 1852.0 / 3600.0
DAY = 86400
SCENARIO_VERSION = 1

DEFAULT_SHIP_TYPES = {"corridor": 70, "loiter": 30, "shuttle": 60}


class ScenarioError(ValueError):
    pass


def _date(v):
    return v if isinstance(v, dt.date) else dt.date.fromisoformat(str(v))


@dataclass
class Corridor:
    polyline: list
    vessels: int = 1
    speed_knots: float = 10.0
    trips_per_day: int = 1
    ship_type: int = DEFAULT_SHIP_TYPES["corridor"]
    kind: str = "corridor"


@dataclass
class LoiterZone:
    center: tuple
    vessels: int = 1
    dwell_minutes: float = 120.0
    radius_cells: int = 0
    speed_knots: float = 0.2
    transit_knots: float = 8.0
    sits_per_day: int | None = None
    ship_type: int = DEFAULT_SHIP_TYPES["loiter"]
    kind: str = "loiter"


@dataclass
class Shuttle:
    endpoints: list
    vessels: int = 1
    round_trips_per_day: int = 2
    speed_knots: float = 15.0
    active: list = field(default_factory=list)
    ship_type: int = DEFAULT_SHIP_TYPES["shuttle"]
    kind: str = "shuttle"

    def active_on(self, day: dt.date) -> bool:
        if not self.active:
            return True
        return any(_date(a) <= day <= _date(b) for a, b in self.active)


@dataclass
class Scenario:
    seed: int
    bbox: BoundingBox
    periods: list
    primitives: list
    jitter_m: float = 0.0
    dropout: float = 0.0
    report_interval_s: int = 60
    edge_length_m: float = DEFAULT_EDGE_M
    first_vessel_id: int = 316_000_001

    def __post_init__(self):
        if not self.periods:
            raise ScenarioError("scenario needs at least one simulated period")
        if not 0 <= self.dropout < 1:
            raise ScenarioError("dropout probability must be in [0, 1)")
        if self.jitter_m < 0 or self.report_interval_s <= 0:
            raise ScenarioError("jitter must be >= 0 and report interval > 0")
        for p in self.primitives:
            for lat, lon in _anchor_points(p):
                if not self.bbox.contains(lat, lon):
                    raise ScenarioError(f"{p.kind} geometry ({lat}, {lon}) lies outside the bounding box")

    @property
    def grid(self) -> GridConfig:
        return GridConfig(self.bbox, self.edge_length_m, target_area_km2=None)

    def days(self) -> list:
        out = []
        for a, b in self.periods:
            d = _date(a)
            while d <= _date(b):
                out.append(d)
                d += dt.timedelta(days=1)
        return out


def _anchor_points(p):
    if p.kind == "corridor":
        return [tuple(x) for x in p.polyline]
    if p.kind == "loiter":
        return [tuple(p.center)]
    return [tuple(x) for x in p.endpoints]


def _day_start(day: dt.date) -> int:
    return int(dt.datetime.combine(day, dt.time(), dt.timezone.utc).timestamp())


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict) or data.get("scenario_version") != SCENARIO_VERSION:
        raise ScenarioError(f"scenario_version must be {SCENARIO_VERSION}")
    kinds = {"corridor": Corridor, "loiter": LoiterZone, "shuttle": Shuttle}
    prims = []
    for raw in data.get("primitives", []):
        raw = dict(raw)
        kind = raw.get("kind")
        if kind not in kinds:
            raise ScenarioError(f"unknown primitive kind {kind!r}")
        try:
            prims.append(kinds[kind](**raw))
        except TypeError as exc:
            raise ScenarioError(f"bad {kind} primitive: {exc}") from None
    noise = data.get("noise", {})
    try:
        return Scenario(
            seed=int(data.get("seed", 0)),
            bbox=BoundingBox(**data["bbox"]),
            periods=[tuple(p) for p in data["periods"]],
            primitives=prims,
            jitter_m=float(noise.get("jitter_m", 0.0)),
            dropout=float(noise.get("dropout", 0.0)),
            report_interval_s=int(data.get("report_interval_s", 60)),
            edge_length_m=float(data.get("edge_length_m", DEFAULT_EDGE_M)),
        )
    except KeyError as exc:
        raise ScenarioError(f"scenario is missing {exc.args[0]!r}") from None


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(yaml.safe_load(fh))


# --- track construction ------------------------------------------------------

class _Track:
    """Collects (t, x, y, sog, cog) pieces for one vessel."""

    def __init__(self):
        self.parts = []

    def add(self, t, x, y, sog, cog):
        if len(t):
            n = len(t)
            self.parts.append((np.asarray(t, dtype=np.int64), np.asarray(x, dtype=np.float64),
                               np.asarray(y, dtype=np.float64), np.full(n, float(sog)),
                               np.broadcast_to(np.asarray(cog, dtype=np.float64), (n,)).copy()))

    def arrays(self):
        if not self.parts:
            e = np.empty(0)
            return np.empty(0, dtype=np.int64), e, e, e, e
        return tuple(np.concatenate(c) for c in zip(*self.parts))


def _heading(dx, dy):
    return (np.degrees(np.arctan2(dx, dy)) + 360.0) % 360.0


def _polyline(grid, points):
    lat = [p[0] for p in points]
    lon = [p[1] for p in points]
    x, y = grid.project(lat, lon)
    seg = np.hypot(np.diff(x), np.diff(y))
    return x, y, np.concatenate([[0.0], np.cumsum(seg)])


def _along(x, y, cum, dist):
    dist = np.clip(dist, 0.0, cum[-1])
    k = np.clip(np.searchsorted(cum, dist, side="right") - 1, 0, len(cum) - 2)
    f = (dist - cum[k]) / (cum[k + 1] - cum[k])
    px = x[k] + (x[k + 1] - x[k]) * f
    py = y[k] + (y[k + 1] - y[k]) * f
    return px, py, _heading(x[k + 1] - x[k], y[k + 1] - y[k])


def _corridor_tracks(p: Corridor, s: Scenario, grid):
    x, y, cum = _polyline(grid, p.polyline)
    length = cum[-1]
    speed = p.speed_knots * KNOT
    duration = length / speed
    spacing = DAY // p.trips_per_day
    if duration > spacing:
        raise ScenarioError("corridor trips overlap: trip time exceeds trip spacing")
    step = s.report_interval_s
    for v in range(p.vessels):
        tr = _Track()
        # offsets spread over the slack that keeps the last trip inside the day
        offset = (v * int(spacing - duration) // p.vessels) // 60 * 60
        for day in s.days():
            for k in range(p.trips_per_day):
                t0 = _day_start(day) + offset + k * spacing
                rel = np.arange(0, int(duration) + 1, step, dtype=np.int64)
                dist = rel * speed
                if (k + v) % 2:
                    dist = length - dist
                px, py, hd = _along(x, y, cum, dist)
                if (k + v) % 2:
                    hd = (hd + 180.0) % 360.0
                tr.add(t0 + rel, px, py, p.speed_knots, hd)
        yield tr


def zone_cells(p: LoiterZone, grid) -> list:
    center = cell_of(p.center[0], p.center[1], grid)
    return [c for c in hex_disk(center, p.radius_cells) if intersects_bbox(c, grid)]


def _loiter_tracks(p: LoiterZone, s: Scenario, grid, rngs):
    zone = zone_cells(p, grid)
    cx, cy = _center_xy([c.q for c in zone], [c.r for c in zone], grid.edge_length_m)
    drift = p.speed_knots * KNOT
    # upper bound on a hop: neighbour spacing plus the drift of a full sit
    hop = (math.sqrt(3.0) * grid.edge_length_m + drift * p.dwell_minutes * 60) / (p.transit_knots * KNOT)
    step = s.report_interval_s
    for v in range(p.vessels):
        rng = rngs(v)
        tr = _Track()
        at = int(rng.integers(len(zone)))
        for day in s.days():
            t = _day_start(day)
            day_end = t + DAY
            sits = 0
            px, py = cx[at], cy[at]
            while t < day_end:
                sits += 1
                last = p.sits_per_day is not None and sits >= p.sits_per_day
                sit_end = t + int(p.dwell_minutes * 60)
                nbrs = [k for k, c in enumerate(zone) if hex_distance(c, zone[at]) == 1]
                can_hop = bool(nbrs) and not last and sit_end + hop + step < day_end
                if not can_hop and not last:
                    sit_end = day_end
                theta = rng.uniform(0.0, 2.0 * math.pi)
                rel = np.arange(0, sit_end - t + (1 if last else 0), step, dtype=np.int64)
                rel = rel[t + rel < day_end]
                tr.add(t + rel, px + drift * rel * math.sin(theta), py + drift * rel * math.cos(theta),
                       p.speed_knots, math.degrees(theta))
                if last or not can_hop:
                    break
                sx = px + drift * (sit_end - t) * math.sin(theta)
                sy = py + drift * (sit_end - t) * math.cos(theta)
                nxt = nbrs[int(rng.integers(len(nbrs)))]
                dx, dy = cx[nxt] - sx, cy[nxt] - sy
                leg = math.hypot(dx, dy) / (p.transit_knots * KNOT)
                rel = np.arange(0, int(leg) + 1, step, dtype=np.int64)
                f = rel / leg
                tr.add(sit_end + rel, sx + dx * f, sy + dy * f, p.transit_knots, _heading(dx, dy))
                at = nxt
                px, py = cx[at], cy[at]
                t = sit_end + (int(leg) // step + 1) * step
        yield tr


def _shuttle_tracks(p: Shuttle, s: Scenario, grid):
    x, y, cum = _polyline(grid, p.endpoints)
    length = cum[-1]
    speed = p.speed_knots * KNOT
    duration = length / speed
    spacing = DAY // p.round_trips_per_day
    if 2 * duration > spacing:
        raise ScenarioError("shuttle round trips overlap")
    step = s.report_interval_s
    for v in range(p.vessels):
        tr = _Track()
        offset = (v * max(0, int(spacing // 2 // 60 * 60 - duration)) // p.vessels) // 60 * 60
        for day in s.days():
            if not p.active_on(day):
                continue
            for k in range(p.round_trips_per_day):
                for leg in range(2):
                    t0 = _day_start(day) + offset + k * spacing + leg * (spacing // 2 // 60 * 60)
                    rel = np.arange(0, int(duration) + 1, step, dtype=np.int64)
                    dist = rel * speed if leg == 0 else length - rel * speed
                    px, py, hd = _along(x, y, cum, dist)
                    tr.add(t0 + rel, px, py, p.speed_knots, hd if leg == 0 else (hd + 180.0) % 360.0)
        yield tr


NAV_STATUS = {"corridor": 0, "loiter": 7, "shuttle": 0}


def _vessel_tracks(s: Scenario, grid):
    """Yield ``(primitive index, primitive, vessel rng, noise-free track)``."""
    for pi, p in enumerate(s.primitives):
        def rngs(v, pi=pi):
            return np.random.default_rng([s.seed, pi, v, 0])

        if p.kind == "corridor":
            tracks = _corridor_tracks(p, s, grid)
        elif p.kind == "loiter":
            tracks = _loiter_tracks(p, s, grid, rngs)
        else:
            tracks = _shuttle_tracks(p, s, grid)
        for v, tr in enumerate(tracks):
            yield pi, p, np.random.default_rng([s.seed, pi, v, 1]), tr


def generate(s: Scenario) -> pd.DataFrame:
    """Records of the whole fleet, sorted by (vessel_id, timestamp)."""
    grid = s.grid
    frames = []
    vid = s.first_vessel_id
    for _, p, noise_rng, tr in _vessel_tracks(s, grid):
        t, x, y, sog, cog = tr.arrays()
        order = np.argsort(t, kind="stable")
        t, x, y, sog, cog = t[order], x[order], y[order], sog[order], cog[order]
        if s.jitter_m > 0:
            x = x + noise_rng.normal(0.0, s.jitter_m, len(x))
            y = y + noise_rng.normal(0.0, s.jitter_m, len(y))
        keep = noise_rng.random(len(t)) >= s.dropout if s.dropout > 0 else np.ones(len(t), dtype=bool)
        lat, lon = grid.unproject(x[keep], y[keep])
        n = int(keep.sum())
        frames.append(pd.DataFrame({
            "vessel_id": np.full(n, vid, dtype=np.int64),
            "timestamp": t[keep],
            "lat": np.round(lat, 7),
            "lon": np.round(lon, 7),
            "sog": np.round(sog[keep], 1),
            "cog": np.round(cog[keep], 1) % 360.0,
            "nav_status": pd.array(np.full(n, NAV_STATUS[p.kind]), dtype="Int64"),
            "ship_type": pd.array(np.full(n, p.ship_type), dtype="Int64"),
        }))
        vid += 1
    frame = pd.concat(frames, ignore_index=True) if frames else None
    if frame is None:
        from .ingest import empty_frame
        return empty_frame()
    return frame.sort_values(["vessel_id", "timestamp"], kind="stable").reset_index(drop=True)


def write_csv(s: Scenario, path) -> int:
    """Generate and write the fleet; returns the number of records."""
    from .ingest import write_ais_csv

    frame = generate(s)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_ais_csv(frame, fh)
    return len(frame)


def expected_cells(s: Scenario, grid: GridConfig | None = None) -> set:
    """Cells occupied by the noise-free report positions of every primitive.

    Evaluated from the primitive geometry alone, without the ingest,
    segmentation or resampling stages; equals the pipeline's occupied-cell
    set for zero-noise scenarios reported on the resampling cadence.
    """
    grid = s.grid if grid is None else grid
    out = set()
    for _, _, _, tr in _vessel_tracks(s, grid):
        _, x, y, _, _ = tr.arrays()
        lat, lon = grid.unproject(x, y)
        lat, lon = np.round(lat, 7), np.round(lon, 7)
        inside = grid.bbox.contains(lat, lon)
        q, r = cells_of(lat[inside], lon[inside], grid)
        out.update(CellId(int(a), int(b)) for a, b in zip(q, r))
    return out


def primitive_cells(s: Scenario, index: int, grid: GridConfig | None = None) -> set:
    """Noise-free occupied cells of one primitive."""
    grid = s.grid if grid is None else grid
    out = set()
    for pi, _, _, tr in _vessel_tracks(s, grid):
        if pi != index:
            continue
        _, x, y, _, _ = tr.arrays()
        lat, lon = grid.unproject(x, y)
        lat, lon = np.round(lat, 7), np.round(lon, 7)
        inside = grid.bbox.contains(lat, lon)
        q, r = cells_of(lat[inside], lon[inside], grid)
        out.update(CellId(int(a), int(b)) for a, b in zip(q, r))
    return out
