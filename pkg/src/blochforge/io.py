"""Serialisation: trajectory and grid CSV/JSON, Bloch projection SVG.

Floats are written as their shortest round-trip decimal (``repr``), so
files are lossless and byte-stable. Every write goes to a temporary file in
the target directory and is renamed into place.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__

_UMASK = os.umask(0)
os.umask(_UMASK)

TRAJECTORY_COLUMNS = ("t", "re_c0", "im_c0", "re_c1", "im_c1", "bloch_x", "bloch_y", "bloch_z", "power")


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _clean(obj):
    # JSON has no inf/nan; write them as strings
    if isinstance(obj, float) and not math.isfinite(obj):
        return fmt(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return _clean(obj.item())
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default) + "\n"


@contextmanager
def atomic_open(path):
    """Text handle whose contents appear at ``path`` only after a clean close."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        # mkstemp creates 0600; give the result ordinary umask permissions
        os.chmod(tmp, 0o666 & ~_UMASK)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def atomic_write_text(path, text: str) -> None:
    with atomic_open(path) as fh:
        fh.write(text)


# ---------------------------------------------------------------- trajectories


def trajectory_rows(traj):
    s = traj.states
    for i in range(len(traj)):
        yield (
            traj.t[i], s[i, 0].real, s[i, 0].imag, s[i, 1].real, s[i, 1].imag,
            traj.bloch[i, 0], traj.bloch[i, 1], traj.bloch[i, 2], traj.power[i],
        )


def trajectory_csv(traj, extra_columns=None) -> str:
    """``extra_columns`` is an ordered mapping of leading columns to constant values."""
    extra = dict(extra_columns or {})
    lines = [",".join(list(extra) + list(TRAJECTORY_COLUMNS))]
    prefix = [fmt(v) for v in extra.values()]
    for row in trajectory_rows(traj):
        lines.append(",".join(prefix + [fmt(v) for v in row]))
    return "\n".join(lines) + "\n"


def trajectory_dict(traj) -> dict:
    cols = list(zip(*trajectory_rows(traj)))
    return {name: [float(v) for v in col] for name, col in zip(TRAJECTORY_COLUMNS, cols)}


def read_trajectory_csv(path) -> dict:
    """Column name -> float array."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}


# ---------------------------------------------------------------- grids


def grid_csv(row_name, row_axis, col_name, col_axis, values) -> str:
    lines = [f"{row_name},{col_name}", "," + ",".join(fmt(c) for c in col_axis)]
    for r, row in zip(row_axis, values):
        lines.append(",".join([fmt(r)] + [fmt(v) for v in row]))
    return "\n".join(lines) + "\n"


def grid_json(row_name, row_axis, col_name, col_axis, values, meta) -> str:
    obj = {
        "row_axis": {"name": row_name, "values": np.asarray(row_axis, dtype=float)},
        "col_axis": {"name": col_name, "values": np.asarray(col_axis, dtype=float)},
        "values": np.asarray(values, dtype=float),
        "meta": dict(meta, version=__version__),
    }
    return dumps_json(obj)


def read_grid_csv(path):
    """Returns ``(row_name, row_axis, col_name, col_axis, values)``."""
    with open(path, encoding="utf-8") as fh:
        row_name, col_name = fh.readline().strip().split(",")
        col_axis = np.array([float(v) for v in fh.readline().strip().split(",")[1:]])
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return row_name, data[:, 0], col_name, col_axis, data[:, 1:]


def emit_grid(result, path, fmt_name="csv", meta=None) -> None:
    """Write a ``ScanResult`` or ``PhaseDiagramGrid``."""
    if hasattr(result, "row_axis"):
        parts = (result.row_name, result.row_axis, result.col_name, result.col_axis, result.values)
    else:
        parts = ("dgamma_hz", result.dgamma_axis, "period_s", result.period_axis, result.values)
    if fmt_name == "csv":
        atomic_write_text(path, grid_csv(*parts))
    elif fmt_name == "json":
        atomic_write_text(path, grid_json(*parts, meta or {}))
    else:
        raise ValueError(f"unknown format {fmt_name!r}")


# ---------------------------------------------------------------- SVG


def bloch_svg(traj, size: int = 240) -> str:
    """Orthographic projections of the Bloch trajectory onto the x-z and y-z planes."""
    r = size * 0.42
    pad = size / 2
    panels = []
    for k, (label, col) in enumerate((("x-z", 0), ("y-z", 1))):
        cx = pad + k * size
        cy = pad
        pts = " ".join(
            f"{cx + r * p[col]:.3f},{cy - r * p[2]:.3f}" for p in traj.bloch
        )
        panels.append(
            f'<g><circle cx="{cx:.1f}" cy="{cy:.1f}" r="{r:.1f}" fill="none" stroke="#888"/>'
            f'<line x1="{cx - r:.1f}" y1="{cy:.1f}" x2="{cx + r:.1f}" y2="{cy:.1f}" stroke="#ccc"/>'
            f'<line x1="{cx:.1f}" y1="{cy - r:.1f}" x2="{cx:.1f}" y2="{cy + r:.1f}" stroke="#ccc"/>'
            f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1"/>'
            f'<text x="{cx - r:.1f}" y="{size - 6}" font-size="12">{label}</text></g>'
        )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * size}" height="{size}" '
        f'viewBox="0 0 {2 * size} {size}">' + "".join(panels) + "</svg>\n"
    )
