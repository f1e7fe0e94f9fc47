"""File emission: CSV/JSON writers with atomic replace and checksums."""
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def fmt(x):
    """Fixed 17-significant-digit representation; round-trips doubles exactly."""
    return f"{float(x):.16e}"


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def csv_text(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(path, header, rows):
    return atomic_write_text(path, csv_text(header, rows))


def json_text(payload):
    return json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n"


def write_json(path, payload):
    return atomic_write_text(path, json_text(payload))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# -- domain serializers --------------------------------------------------

def spectrum_csv(spectrum):
    return csv_text(["re", "im"], [(v.real, v.imag) for v in spectrum])


def sweep_csv(grid):
    """1-D grids: ``theta,min_eig_gamma`` rows.

    2-D grids: the header row lists the second free agent's angles, each
    following row starts with the first free agent's angle.
    """
    if len(grid.axes) == 1:
        return csv_text(["theta_rad", "min_eig_gamma"], zip(grid.axes[0], grid.values))
    a, b = (i + 1 for i in grid.free_agents)
    header = [f"theta_{a}_rad\\theta_{b}_rad"] + [fmt(t) for t in grid.axes[1]]
    rows = [[theta, *row] for theta, row in zip(grid.axes[0], grid.values)]
    return csv_text(header, rows)


def trace_csv(trace, d):
    axes = "xyz"[:d]
    n = trace.states.shape[1] // d
    header = ["t"] + [f"z_{i + 1}{c}" for i in range(n) for c in axes] + ["delta"]
    rows = (
        [t, *z, e] for t, z, e in zip(trace.times, trace.states, trace.errors)
    )
    return csv_text(header, rows)


def read_sweep_csv(path):
    """Inverse of :func:`sweep_csv`: ``(axes, values)``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if lines[0].startswith("theta_rad,"):
        data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
        return [data[:, 0]], data[:, 1]
    cols = np.array([float(v) for v in lines[0].split(",")[1:]])
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return [data[:, 0], cols], data[:, 1:]
