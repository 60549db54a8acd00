"""AIS CSV parsing, vessel categorization and (category x window) partitioning.

Records are held column-wise in a :class:`pandas.DataFrame` sorted by
``(vessel_id, timestamp)``; timestamps are integer UTC epoch seconds.
Row-level problems never abort a parse: each bad row is logged with its
line number and a reason.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterator

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

MANDATORY = ("vessel_id", "timestamp", "lat", "lon")
OPTIONAL = ("sog", "cog", "nav_status", "ship_type")
COLUMNS = MANDATORY + OPTIONAL

CATEGORIES = ("Commercial", "Fishing", "Passenger", "Other")
ALL = "All"


class SchemaError(ValueError):
    """The input cannot be parsed at all (e.g. a mandatory column is missing)."""


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class AisSchema:
    """Input layout: delimiter and optional header renames (canonical -> header)."""

    delimiter: str = ","
    rename: dict = field(default_factory=dict)

    def header_for(self, name: str) -> str:
        return self.rename.get(name, name)


@dataclass(frozen=True)
class AisRecord:
    vessel_id: int
    timestamp: int
    lat: float
    lon: float
    sog: float | None = None
    cog: float | None = None
    nav_status: int | None = None
    ship_type: int | None = None

    @property
    def time(self) -> dt.datetime:
        return dt.datetime.fromtimestamp(self.timestamp, tz=dt.timezone.utc)


@dataclass
class Rejection:
    row: int
    reason: str


@dataclass
class ParseResult:
    records: pd.DataFrame
    rejections: list
    n_parsed: int

    @property
    def n_emitted(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[AisRecord]:
        return iter_records(self.records)

    def __len__(self):
        return len(self.records)


def empty_frame() -> pd.DataFrame:
    return pd.DataFrame({
        "vessel_id": np.empty(0, dtype=np.int64),
        "timestamp": np.empty(0, dtype=np.int64),
        "lat": np.empty(0, dtype=np.float64),
        "lon": np.empty(0, dtype=np.float64),
        "sog": np.empty(0, dtype=np.float64),
        "cog": np.empty(0, dtype=np.float64),
        "nav_status": pd.array([], dtype="Int64"),
        "ship_type": pd.array([], dtype="Int64"),
    })


def iter_records(frame: pd.DataFrame) -> Iterator[AisRecord]:
    def opt(v, cast):
        return None if pd.isna(v) else cast(v)

    for row in frame.itertuples(index=False):
        yield AisRecord(int(row.vessel_id), int(row.timestamp), float(row.lat), float(row.lon),
                        opt(row.sog, float), opt(row.cog, float),
                        opt(row.nav_status, int), opt(row.ship_type, int))


def _numeric(values) -> np.ndarray:
    """Float parse of text values; unparseable or non-finite entries become NaN."""
    arr = np.asarray(values, dtype=object)
    try:
        out = arr.astype(np.float64)
    except ValueError:
        # to_numeric finds the parseable entries; its own float parse is not
        # always correctly rounded, so those entries are converted again exactly
        rough = pd.to_numeric(pd.Series(arr), errors="coerce").to_numpy(dtype=np.float64)
        ok = ~np.isnan(rough)
        out = np.full(len(arr), np.nan)
        try:
            out[ok] = arr[ok].astype(np.float64)
        except ValueError:
            out = rough
    out[~np.isfinite(out)] = np.nan
    return out


def _blank(values, candidates) -> np.ndarray:
    """Mask of blank (empty or whitespace) entries, checked only at ``candidates``."""
    mask = np.zeros(len(values), dtype=bool)
    if len(candidates):
        picked = pd.Series(np.asarray(values, dtype=object)[candidates], dtype=object)
        mask[candidates] = picked.astype(str).str.strip().eq("").to_numpy()
    return mask


def _integral(values, blank_ok):
    """Parse integer text; returns (values as float with NaN for blank, bad mask)."""
    num = _numeric(values)
    blank = _blank(values, np.flatnonzero(np.isnan(num)))
    bad = (np.isnan(num) & ~(blank & blank_ok)) | (np.isfinite(num) & (num != np.floor(num)))
    return num, bad


def _rows_csv(text, delimiter, width):
    """General path: the csv module, which understands quoting."""
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    next(reader)
    rows, lines, rejections = [], [], []
    for fields in reader:
        line = reader.line_num
        if len(fields) != width:
            if len(fields) == 0:
                continue
            rejections.append(Rejection(line, f"expected {width} fields, found {len(fields)}"))
            continue
        rows.append(fields)
        lines.append(line)
    cols = [np.asarray(c, dtype=object) for c in zip(*rows)] if rows else []
    return cols, np.asarray(lines, dtype=np.int64), rejections


def _rows_fast(text, delimiter, width):
    """Unquoted input: count delimiters per line and let pandas split the good lines."""
    lines = pd.Series(text.split("\n")[1:], dtype=object)
    if len(lines) and lines.iloc[-1] == "":
        lines = lines.iloc[:-1]
    line_no = np.arange(2, len(lines) + 2, dtype=np.int64)
    empty = lines.str.len().to_numpy() == 0
    if len(delimiter) == 1 and delimiter.isascii() and text.isascii():
        # delimiter count per line from byte positions
        raw = np.frombuffer(text.encode("ascii"), dtype=np.uint8)
        breaks = np.flatnonzero(raw == 10)
        hits = np.flatnonzero(raw == ord(delimiter))
        per_line = np.bincount(np.searchsorted(breaks, hits), minlength=len(breaks) + 1)
        fields = per_line[1:len(lines) + 1] + 1
    else:
        fields = lines.str.count(re.escape(delimiter)).to_numpy() + 1
    wrong = (fields != width) & ~empty
    rejections = [Rejection(int(ln), f"expected {width} fields, found {int(f)}")
                  for ln, f in zip(line_no[wrong], fields[wrong])]
    good = ~wrong & ~empty
    if not good.any():
        return [], np.empty(0, dtype=np.int64), rejections
    body = "\n".join(lines[good].tolist())
    frame = pd.read_csv(io.StringIO(body), sep=delimiter, header=None, dtype=str, na_filter=False,
                        quoting=csv.QUOTE_NONE, engine="c")
    cols = [frame[c].to_numpy(dtype=object) for c in frame.columns]
    return cols, line_no[good], rejections


def parse_ais_csv(stream, schema: AisSchema = AisSchema()) -> ParseResult:
    """Parse delimiter-separated AIS text (str or bytes stream, or a path)."""
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        with open(stream, "r", encoding="utf-8", newline="") as fh:
            return parse_ais_csv(fh, schema)
    if isinstance(stream, (io.BufferedIOBase, io.RawIOBase)) or "b" in getattr(stream, "mode", ""):
        stream = io.TextIOWrapper(stream, encoding="utf-8", newline="")

    text = stream.read()
    try:
        header = [h.strip() for h in next(csv.reader(io.StringIO(text), delimiter=schema.delimiter))]
    except StopIteration:
        raise SchemaError("input has no header row") from None
    missing = [c for c in MANDATORY if schema.header_for(c) not in header]
    if missing:
        raise SchemaError(f"missing mandatory column(s): {', '.join(missing)}")
    pos = {c: header.index(schema.header_for(c)) for c in COLUMNS if schema.header_for(c) in header}
    width = len(header)

    if '"' in text or "\r" in text:
        cols, line_no, rejections = _rows_csv(text, schema.delimiter, width)
    else:
        cols, line_no, rejections = _rows_fast(text, schema.delimiter, width)
    n = len(line_no)
    n_parsed = n + len(rejections)
    if n == 0:
        return ParseResult(empty_frame(), sorted(rejections, key=lambda r: r.row), n_parsed)

    def column(name):
        return cols[pos[name]] if name in pos else np.full(n, "", dtype=object)

    reason = np.full(n, "", dtype=object)
    bad = np.zeros(n, dtype=bool)

    def flag(mask, text):
        hit = mask & ~bad
        reason[hit] = text
        bad[hit] = True

    vid, vid_bad = _integral(column("vessel_id"), blank_ok=False)
    flag(vid_bad | np.isnan(vid), "invalid vessel_id")
    flag(vid <= 0, "vessel_id must be positive")

    ts = pd.to_datetime(pd.Series(column("timestamp"), dtype=object), format="ISO8601",
                        utc=True, errors="coerce")
    flag(ts.isna().to_numpy(), "unparseable timestamp")
    ns = ts.dt.tz_localize(None).to_numpy(dtype="datetime64[ns]").astype(np.int64)
    # fractional seconds are floored to the second
    stamp = np.where(ts.isna().to_numpy(), 0, np.floor_divide(ns, 10**9))

    lat = _numeric(column("lat"))
    flag(np.isnan(lat), "invalid latitude")
    flag((lat < -90) | (lat > 90), "latitude out of range")
    lon = _numeric(column("lon"))
    flag(np.isnan(lon), "invalid longitude")
    flag((lon < -180) | (lon > 180), "longitude out of range")

    def optional_float(name):
        raw = column(name)
        val = _numeric(raw)
        blank = _blank(raw, np.flatnonzero(np.isnan(val)))
        flag(np.isnan(val) & ~blank, f"invalid {name}")
        return val

    sog = optional_float("sog")
    flag(sog < 0, "negative sog")
    cog = optional_float("cog")
    flag((cog < 0) | (cog >= 360), "cog out of range")
    nav, nav_bad = _integral(column("nav_status"), blank_ok=True)
    flag(nav_bad, "invalid nav_status")
    stype, stype_bad = _integral(column("ship_type"), blank_ok=True)
    flag(stype_bad, "invalid ship_type")

    ok = ~bad
    for ln, why in zip(line_no[~ok].tolist(), reason[~ok].tolist()):
        rejections.append(Rejection(ln, why))

    frame = pd.DataFrame({
        "vessel_id": vid[ok].astype(np.int64),
        "timestamp": stamp[ok],
        "lat": lat[ok],
        "lon": lon[ok],
        "sog": sog[ok],
        "cog": cog[ok],
        "nav_status": pd.array(np.where(np.isnan(nav[ok]), 0, nav[ok]).astype(np.int64), dtype="Int64"),
        "ship_type": pd.array(np.where(np.isnan(stype[ok]), 0, stype[ok]).astype(np.int64), dtype="Int64"),
    })
    frame.loc[np.isnan(nav[ok]), "nav_status"] = pd.NA
    frame.loc[np.isnan(stype[ok]), "ship_type"] = pd.NA
    frame["_line"] = line_no[ok]

    # stable sort keeps the first occurrence of duplicate (vessel, timestamp) first
    frame = frame.sort_values(["vessel_id", "timestamp", "_line"], kind="stable")
    dup = frame.duplicated(["vessel_id", "timestamp"], keep="first").to_numpy()
    for ln in frame["_line"].to_numpy()[dup].tolist():
        rejections.append(Rejection(ln, "duplicate (vessel_id, timestamp)"))
    frame = frame.loc[~dup].drop(columns="_line").reset_index(drop=True)

    rejections.sort(key=lambda r: r.row)
    if rejections:
        logger.info("rejected %d of %d rows", len(rejections), n_parsed)
    return ParseResult(frame, rejections, n_parsed)


def _format_float(values) -> list:
    return ["" if np.isnan(v) else repr(v) for v in values.tolist()]


def write_ais_csv(frame: pd.DataFrame, stream) -> None:
    """Serialize records in the canonical schema (round-trips bit-exactly)."""
    stamps = np.datetime_as_string(frame["timestamp"].to_numpy(dtype=np.int64).astype("datetime64[s]"),
                                   unit="s")

    def ints(col):
        return ["" if pd.isna(v) else str(int(v)) for v in frame[col].tolist()]

    cols = [
        [str(v) for v in frame["vessel_id"].tolist()],
        [s + "Z" for s in stamps.tolist()],
        [repr(v) for v in frame["lat"].tolist()],
        [repr(v) for v in frame["lon"].tolist()],
        _format_float(frame["sog"].to_numpy(dtype=np.float64)),
        _format_float(frame["cog"].to_numpy(dtype=np.float64)),
        ints("nav_status"),
        ints("ship_type"),
    ]
    stream.write(",".join(COLUMNS) + "\n")
    stream.write("".join(",".join(row) + "\n" for row in zip(*cols)))


def write_rejections(rejections, stream) -> None:
    """Tab-separated ``row<TAB>reason`` lines."""
    for r in rejections:
        stream.write(f"{r.row}\t{r.reason}\n")


# --- categories ------------------------------------------------------------

def load_type_table(path=None) -> list:
    """``[(code_min, code_max, category), ...]`` from the versioned fixture."""
    if path is None:
        text = resources.files("hexmarkov").joinpath("data/ship_types.csv").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    table = []
    for row in csv.DictReader(lines):
        cat = row["category"].strip()
        if cat not in CATEGORIES:
            raise ValueError(f"unknown category {cat!r} in type table")
        table.append((int(row["code_min"]), int(row["code_max"]), cat))
    return table


_TYPE_TABLE = None


def _table():
    global _TYPE_TABLE
    if _TYPE_TABLE is None:
        _TYPE_TABLE = load_type_table()
    return _TYPE_TABLE


def categorize_vessel(ship_type: int | None) -> str:
    if ship_type is None or pd.isna(ship_type):
        return "Other"
    for lo, hi, cat in _table():
        if lo <= int(ship_type) <= hi:
            return cat
    return "Other"


def categorize_frame(frame: pd.DataFrame) -> np.ndarray:
    codes = frame["ship_type"].to_numpy(dtype=np.float64, na_value=np.nan)
    out = np.full(len(codes), "Other", dtype=object)
    for lo, hi, cat in _table():
        out[(codes >= lo) & (codes <= hi)] = cat
    return out


# --- windows ---------------------------------------------------------------

@dataclass(frozen=True)
class TimeWindow:
    label: str
    start: dt.date
    end: dt.date

    def __post_init__(self):
        if self.start > self.end:
            raise WindowError(f"window {self.label!r} starts after it ends")

    @property
    def start_s(self) -> int:
        return int(dt.datetime.combine(self.start, dt.time(), dt.timezone.utc).timestamp())

    @property
    def end_s(self) -> int:
        """Exclusive upper bound: midnight after the inclusive end day."""
        return int(dt.datetime.combine(self.end + dt.timedelta(days=1), dt.time(),
                                       dt.timezone.utc).timestamp())


def _d(text):
    return dt.date.fromisoformat(text)


WINDOW_PRESETS = {
    "covid": (
        TimeWindow("pre", _d("2019-01-01"), _d("2019-12-31")),
        TimeWindow("pandemic_P1", _d("2020-01-01"), _d("2020-12-31")),
        TimeWindow("pandemic_P2", _d("2021-01-01"), _d("2021-12-31")),
        TimeWindow("post", _d("2022-01-01"), _d("2022-12-31")),
    ),
}


def check_windows(windows) -> None:
    labels = [w.label for w in windows]
    if len(set(labels)) != len(labels):
        raise WindowError("window labels must be unique")
    ordered = sorted(windows, key=lambda w: w.start)
    for a, b in zip(ordered, ordered[1:]):
        if b.start <= a.end:
            raise WindowError(f"windows {a.label!r} and {b.label!r} overlap")


def window_of(frame: pd.DataFrame, windows) -> np.ndarray:
    """Window label per record (``None`` outside every window)."""
    check_windows(windows)
    t = frame["timestamp"].to_numpy(dtype=np.int64)
    out = np.full(len(t), None, dtype=object)
    for w in windows:
        out[(t >= w.start_s) & (t < w.end_s)] = w.label
    return out


def partition_records(frame: pd.DataFrame, windows, categories=CATEGORIES + (ALL,)) -> dict:
    """``{(category, window label): records}`` for every requested pair.

    Each record lands in at most one window, and in its own category stream
    plus the ``All`` stream.
    """
    labels = window_of(frame, windows)
    cats = categorize_frame(frame)
    out = {}
    for w in windows:
        in_w = labels == w.label
        for cat in categories:
            mask = in_w if cat == ALL else in_w & (cats == cat)
            out[(cat, w.label)] = frame.loc[mask].reset_index(drop=True)
    return out
