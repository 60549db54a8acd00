"""Trajectory segmentation and uniform resampling.

A vessel's reports are cut into segments that never cross an aligned
wall-clock bin (3 h by default, bins start at UTC midnight), never span a
silence longer than the interpolation gap cap, and never jump across the
antimeridian.  Each segment is then linearly interpolated in raw lat/lon
degrees at instants that are multiples of ``dt``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

DEFAULT_DT = 60
DEFAULT_WINDOW = 3 * 3600
DEFAULT_MAX_GAP = 15 * 60


@dataclass
class RawSegment:
    vessel_id: int
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray

    def __len__(self):
        return len(self.t)


@dataclass
class ResampledTrajectory:
    vessel_id: int
    start: int
    dt: int
    lat: np.ndarray
    lon: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.start + self.dt * np.arange(len(self.lat), dtype=np.int64)

    def __len__(self):
        return len(self.lat)


def segment_breaks(vessel, t, lon, window=DEFAULT_WINDOW, max_gap=DEFAULT_MAX_GAP):
    """Boolean mask marking the first point of every segment.

    Inputs are parallel arrays sorted by ``(vessel, t)``; this is the
    vectorized form used by the pipeline.
    """
    vessel = np.asarray(vessel)
    t = np.asarray(t, dtype=np.int64)
    lon = np.asarray(lon, dtype=np.float64)
    n = len(t)
    start = np.ones(n, dtype=bool)
    if n > 1:
        bins = np.floor_divide(t, window)
        start[1:] = ((vessel[1:] != vessel[:-1])
                     | (bins[1:] != bins[:-1])
                     | (np.diff(t) > max_gap)
                     | (np.abs(np.diff(lon)) > 180.0))
    return start


def segment_bounds(vessel, t, lon, window=DEFAULT_WINDOW, max_gap=DEFAULT_MAX_GAP):
    """``(starts, ends)`` index arrays of the segments of a sorted stream."""
    starts = np.flatnonzero(segment_breaks(vessel, t, lon, window, max_gap))
    ends = np.append(starts[1:], len(t)).astype(np.int64)
    return starts.astype(np.int64), ends


def segment_stream(vessel_id, t, lat, lon, window=DEFAULT_WINDOW, max_gap=DEFAULT_MAX_GAP):
    """Split one vessel's time-sorted reports into :class:`RawSegment` objects."""
    t = np.asarray(t, dtype=np.int64)
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    starts, ends = segment_bounds(np.zeros(len(t)), t, lon, window, max_gap)
    return [RawSegment(vessel_id, t[s:e], lat[s:e], lon[s:e]) for s, e in zip(starts, ends)]


def resample_segment(seg: RawSegment, dt: int = DEFAULT_DT) -> ResampledTrajectory:
    """Linear interpolation at ``ceil(t1/dt)*dt, +dt, ...`` up to the last report.

    Single-point segments (and segments containing no aligned instant) give
    an empty trajectory.
    """
    t = np.asarray(seg.t, dtype=np.int64)
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    empty = ResampledTrajectory(seg.vessel_id, 0, dt, np.empty(0), np.empty(0))
    if len(t) < 2:
        return empty
    _, ts, lat, lon = kernels.resample(t, seg.lat, seg.lon, np.array([0]), np.array([len(t)]), dt)
    if len(ts) == 0:
        return empty
    return ResampledTrajectory(seg.vessel_id, int(ts[0]), dt, lat, lon)


def resample_stream(t, lat, lon, starts, ends, dt=DEFAULT_DT):
    """Resample every segment of a stream at once.

    Segments that yield no aligned sample (in particular single-point
    segments) are represented by their first raw report so they still
    contribute residence to the state statistics.  Returns
    ``(segment, t_sample, lat_sample, lon_sample)`` ordered by segment.
    """
    seg, ts, la, lo = kernels.resample(t, lat, lon, starts, ends, dt)
    counts = np.bincount(seg, minlength=len(starts))
    lonely = np.flatnonzero(counts == 0)
    if len(lonely) == 0:
        return seg, ts, la, lo
    first = starts[lonely]
    seg = np.concatenate([seg, lonely])
    ts = np.concatenate([ts, np.asarray(t)[first]])
    la = np.concatenate([la, np.asarray(lat)[first]])
    lo = np.concatenate([lo, np.asarray(lon)[first]])
    order = np.argsort(seg, kind="stable")
    return seg[order], ts[order], la[order], lo[order]


def write_debug_dump(path, vessel_ids, t, lat, lon):
    """Dump resampled points as ``vessel_id,timestamp,lat,lon`` text."""
    import pandas as pd

    stamps = pd.to_datetime(np.asarray(t), unit="s", utc=True).strftime("%Y-%m-%dT%H:%M:%SZ")
    frame = pd.DataFrame({"vessel_id": vessel_ids, "timestamp": stamps,
                          "lat": [repr(float(v)) for v in lat], "lon": [repr(float(v)) for v in lon]})
    frame.to_csv(path, index=False)
