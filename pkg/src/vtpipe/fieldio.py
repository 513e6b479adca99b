"""Text serialization for gridded fields.

Layout: one header line

    # t0=<v> dt=<v> nt=<n> x0=<v> dx=<v> nx=<n> cwave=<v> kind=<kind>

followed by nt rows of nx comma-separated values (row-major, time-major).
Empty cells are written as ``nan``. Floats use repr, so writing the same
field twice produces byte-identical files.

Kinds: ``ttt``/``ttd`` for MacroField accumulators, ``speed``/``density``/
``flow`` for the raw Edie arrays, ``smoothed``/``weight`` for the adaptive
smoother's output.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pandas as pd

from .edie import GridSpec
from .errors import FieldFormatError, GridMismatchError

FIELD_KINDS = ("ttt", "ttd", "speed", "density", "flow", "smoothed", "weight")
_HEADER_KEYS = ("t0", "dt", "nt", "x0", "dx", "nx", "cwave", "kind")


def format_header(grid: GridSpec, kind: str) -> str:
    return (
        f"# t0={grid.t0!r} dt={grid.dt!r} nt={grid.nt} "
        f"x0={grid.x0!r} dx={grid.dx!r} nx={grid.nx} "
        f"cwave={grid.c_wave!r} kind={kind}"
    )


def write_field(path, grid: GridSpec, values: np.ndarray, kind: str) -> None:
    """Write one nt-by-nx array in the field format (atomically)."""
    if kind not in FIELD_KINDS:
        raise ValueError(f"unknown field kind {kind!r}")
    values = np.asarray(values, dtype=np.float64)
    if values.shape != grid.shape:
        raise ValueError(f"values shape {values.shape} does not match grid {grid.shape}")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_header(grid, kind) + "\n")
        for row in values:
            f.write(",".join(map(repr, row.tolist())) + "\n")
    os.replace(tmp, path)


def read_header(path) -> tuple[GridSpec, str]:
    """Parse the header of a field file without loading the values."""
    with open(path, "r", encoding="utf-8") as f:
        tokens: list[str] = []
        for line in f:
            if not line.startswith("#"):
                break
            tokens.extend(line[1:].split())
    keys = [tok.split("=", 1)[0] for tok in tokens if "=" in tok]
    if tuple(keys) != _HEADER_KEYS:
        raise FieldFormatError(f"{path}: bad field header (keys {keys})")
    kv = dict(tok.split("=", 1) for tok in tokens)
    try:
        grid = GridSpec(
            t0=float(kv["t0"]),
            dt=float(kv["dt"]),
            nt=int(kv["nt"]),
            x0=float(kv["x0"]),
            dx=float(kv["dx"]),
            nx=int(kv["nx"]),
            c_wave=float(kv["cwave"]),
        )
    except ValueError as exc:
        raise FieldFormatError(f"{path}: bad field header ({exc})") from None
    kind = kv["kind"]
    if kind not in FIELD_KINDS:
        raise FieldFormatError(f"{path}: unknown field kind {kind!r}")
    return grid, kind


def read_field(path, expect_kind: str | None = None) -> tuple[GridSpec, np.ndarray, str]:
    """Read a field file back into (grid, values, kind)."""
    grid, kind = read_header(path)
    if expect_kind is not None and kind != expect_kind:
        raise FieldFormatError(f"{path}: expected kind={expect_kind}, found {kind}")
    try:
        frame = pd.read_csv(
            path, comment="#", header=None, dtype=np.float64, float_precision="round_trip"
        )
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise FieldFormatError(f"{path}: unreadable field body ({exc})") from None
    values = frame.to_numpy(np.float64)
    if values.shape != grid.shape:
        raise FieldFormatError(
            f"{path}: body shape {values.shape} does not match header {grid.shape}"
        )
    return grid, values, kind


def check_grid_compatible(path, grid: GridSpec) -> None:
    """Raise GridMismatchError if an existing field file disagrees with grid."""
    existing, _ = read_header(path)
    if existing != grid:
        raise GridMismatchError(
            f"{path} was written for grid {existing}, which does not match {grid}; "
            "remove the file or change the flags"
        )
