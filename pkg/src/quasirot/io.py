"""CSV and JSON artifacts.

Every CSV has a one-line header and renders floats with 17 significant
digits, which round-trips IEEE doubles exactly. Column sets:

    n,phi                 angle observations
    n,x,y                 planar observations
    n,delta,m,delta_hat   lifted increments
    N,rate                convergence curve
    t,q1,q2,p1,p2,H       three-body trajectory
"""

import csv
import json
import math
from pathlib import Path

import mpmath
import numpy as np

from .birkhoff import EXTENDED_DPS
from .errors import DataFormatError, UsageError

__all__ = ["FLOAT_FORMAT", "write_columns", "read_columns", "read_observations", "write_json"]

FLOAT_FORMAT = "%.17g"

ANGLE_COLUMNS = ("n", "phi")
PLANAR_COLUMNS = ("n", "x", "y")
LIFT_COLUMNS = ("n", "delta", "m", "delta_hat")
CONVERGENCE_COLUMNS = ("N", "rate")
TRAJECTORY_COLUMNS = ("t", "q1", "q2", "p1", "p2", "H")


def write_columns(path, header, columns):
    """Write equal-length columns under ``header``; integer columns stay integers."""
    cols = [np.asarray(c) for c in columns]
    if len(cols) != len(header) or len({len(c) for c in cols}) > 1:
        raise UsageError("header and columns do not match")
    fmt = ["%d" if np.issubdtype(c.dtype, np.integer) else FLOAT_FORMAT for c in cols]
    data = np.column_stack([c.astype(float) if f != "%d" else c for c, f in zip(cols, fmt)]) if cols else []
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, data, fmt=fmt, delimiter=",", header=",".join(header), comments="")
    return path


def read_columns(path):
    """Parse a headered numeric CSV into (header, float array of shape (rows, cols))."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(x.strip() for x in r)]
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"{path} is not a text file") from exc
    if not rows:
        raise UsageError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    try:
        [float(h) for h in header]
    except ValueError:
        body = rows[1:]
    else:
        header, body = None, rows
    if not body:
        raise UsageError(f"{path} has a header but no data")
    width = len(body[0])
    for r in body:
        if len(r) != width:
            raise DataFormatError(f"{path}: ragged row {r!r}")
    try:
        data = np.array([[float(x) for x in r] for r in body])
    except ValueError as exc:
        raise DataFormatError(f"{path}: non-numeric entry ({exc})") from exc
    if header is not None and len(header) != width:
        raise DataFormatError(f"{path}: header has {len(header)} columns, data has {width}")
    if not np.all(np.isfinite(data)):
        raise DataFormatError(f"{path}: non-finite values")
    return header, data


def read_observations(path):
    """Observations from a CSV: returns ("angle", phi) or ("planar", (N, 2) points).

    A leading integer column named ``n`` is dropped. One remaining column is
    an angle series in [0, 1); two are planar points.
    """
    header, data = read_columns(path)
    named_index = header is not None and header[0] == "n"
    bare_index = header is None and data.shape[1] in (2, 3) and _is_index(data[:, 0])
    if named_index or bare_index:
        data = data[:, 1:]
    if data.shape[1] == 1:
        phi = data[:, 0]
        if np.any((phi < 0) | (phi >= 1)):
            raise DataFormatError(f"{path}: angle observations must lie in [0, 1)")
        return "angle", phi
    if data.shape[1] == 2:
        return "planar", data
    raise DataFormatError(f"{path}: expected 1 angle column or 2 planar columns, found {data.shape[1]}")


def _is_index(col):
    return len(col) > 1 and np.array_equal(col, np.arange(col[0], col[0] + len(col)))


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, mpmath.mpf):
        with mpmath.workdps(EXTENDED_DPS):
            return str(v)  # extended-precision numbers keep all digits as text
    return v


def write_json(path, record):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(record), indent=2, sort_keys=False) + "\n")
    return path
