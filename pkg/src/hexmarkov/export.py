"""Artifact writers and readers.

Floats are written with ``repr`` so values round-trip exactly, rows are in
(q, r) order, and every file is written to a temporary sibling and renamed
into place.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .hexgrid import CellId, polygon

MODEL_HEADER = ("i_cell", "j_cell", "N", "dwell_sum", "p", "w", "lambda", "q")
STATIONARY_HEADER = ("cell", "pi")
METRICS_HEADER = ("cell_q", "cell_r", "MM", "DTM_seconds", "C_raw", "C_normalized", "community")


def atomic_write(path, data) -> str:
    """Write ``data`` (str or bytes) atomically; returns its sha256."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(blob).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _fmt(v) -> str:
    v = float(v)
    return repr(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def model_csv(model) -> str:
    if model is None:
        return _csv(MODEL_HEADER, [])
    st = model.states
    rows = (
        (str(st[a]), str(st[b]), int(n), int(d), _fmt(p), _fmt(w), _fmt(lam), _fmt(q))
        for a, b, n, d, p, w, lam, q in zip(model.src.tolist(), model.dst.tolist(), model.count.tolist(),
                                            model.dwell.tolist(), model.p.tolist(), model.w.tolist(),
                                            model.hazard.tolist(), model.q.tolist())
    )
    return _csv(MODEL_HEADER, rows)


def stationary_csv(model) -> str:
    if model is None:
        return _csv(STATIONARY_HEADER, [])
    pi = model.pi if model.pi is not None else np.full(model.n_states, np.nan)
    return _csv(STATIONARY_HEADER, ((str(c), _fmt(v)) for c, v in zip(model.states, pi.tolist())))


def metrics_csv(states, mm, dtm, c_raw, c_norm, community) -> str:
    rows = ((c.q, c.r, int(a), int(b), _fmt(x), _fmt(y), int(k))
            for c, a, b, x, y, k in zip(states, mm, dtm, c_raw, c_norm, community))
    return _csv(METRICS_HEADER, rows)


def heatmap_geojson(states, grid, raw: dict, quantized: dict) -> str:
    """FeatureCollection of cell polygons carrying raw and quantized metrics.

    ``raw`` maps MM / DTM_s / C to per-cell arrays and ``quantized`` maps
    MM_q / DTM_q / C_q likewise (values may be ``None`` when unavailable).
    """
    features = []
    for k, cell in enumerate(states):
        props = {"cell": str(cell)}
        for name, values in list(raw.items()) + list(quantized.items()):
            props[name] = None if values is None else _json_num(values[k])
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [polygon(cell, grid)]},
            "properties": props,
        })
    return json.dumps({"type": "FeatureCollection", "features": features}, sort_keys=True) + "\n"


def _json_num(v):
    if isinstance(v, (np.integer, int)):
        return int(v)
    return float(v)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# --- readers ---------------------------------------------------------------

def read_model(path) -> dict:
    """Model CSV as column lists: cells as :class:`CellId`, numbers typed."""
    out = {k: [] for k in MODEL_HEADER}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out["i_cell"].append(CellId.parse(row["i_cell"]))
            out["j_cell"].append(CellId.parse(row["j_cell"]))
            out["N"].append(int(row["N"]))
            out["dwell_sum"].append(int(row["dwell_sum"]))
            for k in ("p", "w", "lambda", "q"):
                out[k].append(float(row[k]))
    return out


def read_stationary(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        return {CellId.parse(r["cell"]): float(r["pi"]) for r in csv.DictReader(fh)}


def read_metrics(path) -> list:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            rows.append({
                "cell": CellId(int(r["cell_q"]), int(r["cell_r"])),
                "MM": int(r["MM"]),
                "DTM_seconds": int(r["DTM_seconds"]),
                "C_raw": float(r["C_raw"]),
                "C_normalized": float(r["C_normalized"]),
                "community": int(r["community"]),
            })
    return rows
