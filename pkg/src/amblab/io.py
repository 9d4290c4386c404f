"""CSV/JSON file formats.

* Signal: CSV ``t,re,im``, one row per sample.
* TFArray: CSV ``x,omega,re,im,abs``, row-major over ``(k, l)``.
* Mask: CSV of 0/1 values, ``n`` rows of ``n`` entries.

Every CSV carries a sidecar ``<stem>.json`` with ``{"n": ..., "dx": ...}``.
Floats are written with 17 significant digits so files round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .tf import Signal, TFArray, TimeGrid

FLOAT_FMT = "%.17g"


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_sidecar(path, grid: TimeGrid) -> None:
    sidecar_path(path).write_text(json.dumps(grid.to_json(), sort_keys=True) + "\n")


def read_sidecar(path) -> TimeGrid:
    if not Path(path).exists():
        raise FileNotFoundError(f"no such file: {path}")
    side = sidecar_path(path)
    try:
        meta = json.loads(side.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{side}: invalid JSON ({exc})") from exc
    try:
        return TimeGrid(int(meta["n"]), float(meta["dx"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{side}: grid metadata needs positive even 'n' and positive 'dx' ({exc})") from exc


def _read_rows(path, header: list[str]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [h.strip() for h in first] != header:
            raise SchemaError(f"{path}:1: expected header {','.join(header)!r}, got {first!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                yield lineno, [float(v) for v in row]
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc


def write_signal(path, f: Signal) -> None:
    path = Path(path)
    data = np.column_stack([f.grid.t, f.samples.real, f.samples.imag])
    np.savetxt(path, data, delimiter=",", header="t,re,im", comments="", fmt=FLOAT_FMT)
    write_sidecar(path, f.grid)


def read_signal(path) -> Signal:
    grid = read_sidecar(path)
    rows = list(_read_rows(path, ["t", "re", "im"]))
    if len(rows) != grid.n:
        raise SchemaError(f"{path}: sidecar declares n={grid.n} but file has {len(rows)} samples")
    t = grid.t
    vals = np.empty(grid.n, dtype=np.complex128)
    for k, (lineno, (tk, re, im)) in enumerate(rows):
        if abs(tk - t[k]) > 1e-9 * max(1.0, abs(t[k])):
            raise SchemaError(f"{path}:{lineno}: time {tk!r} does not match grid point {t[k]!r}")
        vals[k] = complex(re, im)
    return Signal(grid, vals)


def write_tfarray(path, F: TFArray) -> None:
    path = Path(path)
    X, W = np.meshgrid(F.x, F.omega, indexing="ij")
    v = F.values.ravel()
    data = np.column_stack([X.ravel(), W.ravel(), v.real, v.imag, np.abs(v)])
    np.savetxt(path, data, delimiter=",", header="x,omega,re,im,abs", comments="", fmt=FLOAT_FMT)
    write_sidecar(path, F.grid)


def read_tfarray(path) -> TFArray:
    grid = read_sidecar(path)
    rows = list(_read_rows(path, ["x", "omega", "re", "im", "abs"]))
    if len(rows) != grid.n ** 2:
        raise SchemaError(f"{path}: expected {grid.n ** 2} rows, got {len(rows)}")
    arr = np.array([r for _, r in rows])
    vals = (arr[:, 2] + 1j * arr[:, 3]).reshape(grid.n, grid.n)
    return TFArray(grid, vals)


def write_mask(path, mask) -> None:
    path = Path(path)
    np.savetxt(path, mask.mask.astype(int), delimiter=",", fmt="%d")
    write_sidecar(path, mask.grid)


def read_mask(path):
    from .domains import DomainMask

    grid = read_sidecar(path)
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != grid.n or any(v.strip() not in ("0", "1") for v in row):
                raise SchemaError(f"{path}:{lineno}: expected {grid.n} comma-separated 0/1 values")
            rows.append([v.strip() == "1" for v in row])
    if len(rows) != grid.n:
        raise SchemaError(f"{path}: expected {grid.n} rows, got {len(rows)}")
    return DomainMask(grid, np.array(rows, dtype=bool))
