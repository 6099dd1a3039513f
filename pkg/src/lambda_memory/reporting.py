"""Deterministic CSV and JSON emission for scenario runs.

All floats are written with a fixed 12-digit scientific format so repeated
runs with the same inputs produce byte-identical files; nothing time- or
host-dependent is ever written.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .core import Envelope, SpinWave

__all__ = [
    "fmt",
    "write_timeseries_csv",
    "write_spin_csv",
    "write_json",
    "write_table_csv",
]

_FMT = "{:.12e}"


def fmt(x: float) -> str:
    return _FMT.format(float(x))


def _ensure_dir(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def write_timeseries_csv(
    path: str | Path,
    control: Envelope,
    e_in: Optional[Envelope] = None,
    e_out: Optional[Envelope] = None,
) -> Path:
    """Stage time series: t, signal in/out (re, im), control (re, im).

    Envelopes that are absent are written as zeros so the column layout is
    fixed: t, re_e_in, im_e_in, re_e_out, im_e_out, re_omega, im_omega.
    """
    path = Path(path)
    _ensure_dir(path)
    g = control.grid
    t = g.times()
    zeros = np.zeros(g.n_points, dtype=complex)
    a = e_in.samples if e_in is not None else zeros
    b = e_out.samples if e_out is not None else zeros
    w = control.samples
    lines = ["t,re_e_in,im_e_in,re_e_out,im_e_out,re_omega,im_omega"]
    for k in range(g.n_points):
        lines.append(
            ",".join(
                fmt(v)
                for v in (t[k], a[k].real, a[k].imag, b[k].real, b[k].imag, w[k].real, w[k].imag)
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_spin_csv(path: str | Path, spin: SpinWave) -> Path:
    """Spin-wave snapshot: z, re_s, im_s."""
    path = Path(path)
    _ensure_dir(path)
    z = spin.grid.points()
    s = spin.samples
    lines = ["z,re_s,im_s"]
    for k in range(spin.grid.n_z):
        lines.append(",".join(fmt(v) for v in (z[k], s[k].real, s[k].imag)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    _ensure_dir(path)
    path.write_text(
        json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


def write_table_csv(path: str | Path, header: Iterable[str], rows: Iterable[Iterable]) -> Path:
    """Generic summary table; numeric cells get the fixed float format."""
    path = Path(path)
    _ensure_dir(path)
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (bool, np.bool_)):
                cells.append(str(bool(v)).lower())
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            elif isinstance(v, (float, np.floating)):
                cells.append(fmt(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
