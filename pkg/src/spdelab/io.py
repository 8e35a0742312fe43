"""Output writers: CSV and JSON with a provenance header, raw float64 state dumps."""

from __future__ import annotations

import json
import os

import numpy as np

from . import __version__


def header(cfg_hash: str, seed: int, command: str = "") -> dict:
    out = {"artifact": "spdelab", "version": __version__, "config_hash": cfg_hash, "seed": int(seed)}
    if command:
        out["command"] = command
    return out


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, columns, rows, head: dict) -> None:
    """Comment lines ``# key: value`` for the header, then the column row and data."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        for k, v in head.items():
            fh.write(f"# {k}: {v}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path):
    """(header dict, column names, float array) of a file written by ``write_csv``."""
    head, lines = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# "):
                k, _, v = line[2:].rstrip("\n").partition(": ")
                head[k] = v
            else:
                lines.append(line.rstrip("\n"))
    cols = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:] if ln], dtype=float)
    return head, cols, data


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    return obj


def write_json(path, payload: dict, head: dict, config: dict | None = None) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    doc = {"header": head}
    if config is not None:
        doc["config"] = config
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=False)
        fh.write("\n")


def write_states(path, states, head: dict) -> None:
    """Raw little-endian float64, one row per step; shape and header go to ``path + '.json'``."""
    arr = np.ascontiguousarray(states, dtype="<f8")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    arr.tofile(path)
    write_json(path + ".json", {"shape": list(arr.shape), "dtype": "<f8", "order": "C"}, head)


def read_states(path) -> np.ndarray:
    with open(path + ".json") as fh:
        meta = json.load(fh)
    return np.fromfile(path, dtype="<f8").reshape(meta["shape"])
