"""Flat result records and their JSON / CSV serialisation."""

import csv
import io
import json
import math

import numpy as np

FIELDS = ("name", "x", "y", "mean", "std_error", "n", "analytic_reference", "z_score", "passed")
META_FIELDS = ("tool_version", "chain_digest", "seed", "n_paths")


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else str(v)


def mc_row(name, x, y, est, reference, k=3.0):
    z = est.z_score(reference)
    return {
        "name": name,
        "x": x,
        "y": y,
        "mean": _num(est.mean),
        "std_error": _num(est.std_error),
        "n": int(est.n),
        "analytic_reference": _num(reference),
        "z_score": _num(z),
        "passed": bool(abs(z) <= k),
    }


def exact_row(name, x, y, value, reference, tol):
    return {
        "name": name,
        "x": x,
        "y": y,
        "mean": _num(value),
        "std_error": 0.0,
        "n": 0,
        "analytic_reference": _num(reference),
        "z_score": None,
        "passed": bool(abs(float(value) - float(reference)) <= tol),
    }


def value_row(name, x, y, value):
    return {
        "name": name,
        "x": x,
        "y": y,
        "mean": _num(value),
        "std_error": None,
        "n": None,
        "analytic_reference": None,
        "z_score": None,
        "passed": None,
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return _num(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def render_json(meta, rows, payload=None):
    doc = {"meta": meta, "rows": rows}
    if payload is not None:
        doc["result"] = payload
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def render_csv(meta, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELDS + META_FIELDS)
    for row in rows:
        writer.writerow([_cell(row.get(f)) for f in FIELDS] + [_cell(meta.get(f)) for f in META_FIELDS])
    return buf.getvalue()
