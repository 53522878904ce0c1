"""JSON/CSV report emission.

Reports are key-sorted JSON with a ``schema_version`` field; complex numbers
become ``[re, im]`` pairs and histories become earliest-first id strings, so
output is byte-identical for a fixed scenario and seed.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from pathlib import Path

import numpy as np

from .histories import BranchTree, history_id

SCHEMA_VERSION = 1


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (frozenset, set)):
        return sorted(jsonable(v) for v in obj)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_float(obj.real), _float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if not f.name.startswith("_")}
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _float(x):
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return str(x)
    return x


def dumps(report: dict) -> str:
    return json.dumps(jsonable({"schema_version": SCHEMA_VERSION, **report}),
                      sort_keys=True, indent=2) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def write_report(out_dir, name: str, report: dict, table=None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{name}.json"]
    paths[0].write_text(dumps(report))
    if table is not None:
        paths.append(out / f"{name}.csv")
        paths[1].write_text(csv_text(*table))
    return paths


def tree_to_dict(tree: BranchTree, h=()) -> dict:
    """Nested node dictionaries, children in cell order."""
    node = tree.nodes[tuple(h)]
    sp = tree.space
    return {
        "id": history_id(node.history),
        "cells": list(reversed(node.history)),
        "labels": sp.labels_of(node.history) if node.history else [],
        "weight": node.weight,
        "amplitude": math.sqrt(max(node.weight, 0.0)),
        "pruned_weight": node.pruned_weight,
        "children": [tree_to_dict(tree, c) for c in node.children],
    }
