"""Generalized (Edie) traffic measurements on sheared space-time cells.

Every consecutive pair of samples in a fragment is a straight segment in
(t, x). Each segment is split exactly at cell boundaries and contributes
its real elapsed time to the cell's total travel time (TTT) and its real
signed displacement to the total travel distance (TTD). Density, flow and
speed follow as

    rho = TTT / (dx * dt),   q = TTD / (dx * dt),   v = q / rho.

Cells are parallelograms in (t, x): the spatial edges are slanted along a
configurable wave speed ``c_wave`` so that backward-moving congestion waves
stay within one cell column. In the sheared coordinate

    x' = x - c_wave * (t - t0)

the cells form a regular rectangular lattice, which is what the arrays
index. Accumulation is a single streaming pass with O(nt*nx) memory;
per-shard partial grids merge by summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import GridMismatchError
from .trajio import Fragment
from .units import METERS_PER_MILE, mph_to_mps

# Paper-style defaults: 0.02 mi x 4 s boxes, conventional -12 mph wave slope.
DEFAULT_DT = 4.0
DEFAULT_DX = 0.02 * METERS_PER_MILE  # 32.18688 m
DEFAULT_C_WAVE = mph_to_mps(-12.0)
DEFAULT_MIN_TTT = 0.5

_CHUNK_PIECES = 1 << 17


@dataclass(frozen=True)
class GridSpec:
    """Sheared space-time discretization.

    ``x0`` and ``dx`` live in the sheared coordinate x'; with c_wave = 0 the
    cells are plain rectangles and x' == x.
    """

    t0: float
    dt: float
    nt: int
    x0: float
    dx: float
    nx: int
    c_wave: float = 0.0

    def __post_init__(self):
        if not all(map(math.isfinite, (self.t0, self.dt, self.x0, self.dx, self.c_wave))):
            raise ValueError("grid parameters must be finite")
        if self.dt <= 0 or self.dx <= 0:
            raise ValueError("dt and dx must be positive")
        if self.nt < 1 or self.nx < 1:
            raise ValueError("nt and nx must be >= 1")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nt, self.nx)

    @property
    def t_end(self) -> float:
        return self.t0 + self.nt * self.dt

    @property
    def x_end(self) -> float:
        return self.x0 + self.nx * self.dx

    @property
    def cell_area(self) -> float:
        return self.dt * self.dx

    def t_centers(self) -> np.ndarray:
        return self.t0 + (np.arange(self.nt) + 0.5) * self.dt

    def x_centers(self) -> np.ndarray:
        """Cell centers in the sheared coordinate."""
        return self.x0 + (np.arange(self.nx) + 0.5) * self.dx


def shear_coordinate(t, x, grid: GridSpec):
    """Map real (t, x) to the sheared spatial coordinate x'.

    Points moving along a characteristic x(t) = a + c_wave * t keep a
    constant x'. Accepts scalars or arrays.
    """
    return x - grid.c_wave * (t - grid.t0)


@dataclass
class MacroField:
    """Per-cell TTT (seconds) and TTD (meters) accumulators."""

    grid: GridSpec
    ttt: np.ndarray
    ttd: np.ndarray

    def __post_init__(self):
        self.ttt = np.asarray(self.ttt, dtype=np.float64)
        self.ttd = np.asarray(self.ttd, dtype=np.float64)
        if self.ttt.shape != self.grid.shape or self.ttd.shape != self.grid.shape:
            raise ValueError("accumulator shapes must match the grid")
        if not (np.isfinite(self.ttt).all() and np.isfinite(self.ttd).all()):
            raise ValueError("non-finite accumulator entries")
        if (self.ttt < 0).any():
            raise ValueError("negative TTT")
        # TTD may dip microscopically below zero on noisy (reverse-rolling)
        # data; speed_field clamps it.

    @classmethod
    def zeros(cls, grid: GridSpec) -> "MacroField":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))


@dataclass
class RawSpeedField:
    """Edie density/flow/speed arrays; cells below the TTT floor are NaN."""

    grid: GridSpec
    v: np.ndarray
    rho: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        for name in ("v", "rho", "q"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != self.grid.shape:
                raise ValueError(f"{name} shape must match the grid")
            setattr(self, name, arr)

    @property
    def occupied(self) -> np.ndarray:
        return np.isfinite(self.v)

    @property
    def data_weight(self) -> np.ndarray:
        """Per-cell TTT recovered from density; 0 at empty cells."""
        w = self.rho * self.grid.cell_area
        return np.where(np.isfinite(w), w, 0.0)


def clip_segment(p1, p2, grid: GridSpec) -> list[tuple[tuple[int, int], float, float]]:
    """Split one trajectory segment at every cell boundary it crosses.

    Returns ``[((it, ix), dt_in, dx_in), ...]`` for the pieces inside the
    grid; dt_in is real elapsed time and dx_in real signed displacement, so
    over a segment fully inside the grid they sum to the segment's duration
    and displacement exactly (to float round-off). Pieces outside the grid
    are dropped. A zero-duration segment yields no pieces.
    """
    t1, x1 = float(p1[0]), float(p1[1])
    t2, x2 = float(p2[0]), float(p2[1])
    if t2 < t1:
        raise ValueError("segment must advance in time")
    if t2 == t1:
        return []
    big_t = t2 - t1
    big_x = x2 - x1
    xs1 = x1 - grid.c_wave * (t1 - grid.t0)
    xs2 = x2 - grid.c_wave * (t2 - grid.t0)
    big_xs = xs2 - xs1

    cuts = [0.0, 1.0]
    k1 = math.floor((t1 - grid.t0) / grid.dt)
    k2 = math.floor((t2 - grid.t0) / grid.dt)
    for k in range(max(k1 + 1, 0), min(k2, grid.nt) + 1):
        s = (grid.t0 + k * grid.dt - t1) / big_t
        if 0.0 < s < 1.0:
            cuts.append(s)
    if big_xs != 0.0:
        j1 = math.floor((xs1 - grid.x0) / grid.dx)
        j2 = math.floor((xs2 - grid.x0) / grid.dx)
        lo, hi = min(j1, j2), max(j1, j2)
        for j in range(max(lo + 1, 0), min(hi, grid.nx) + 1):
            s = (grid.x0 + j * grid.dx - xs1) / big_xs
            if 0.0 < s < 1.0:
                cuts.append(s)
    cuts.sort()

    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        it = math.floor((t1 + mid * big_t - grid.t0) / grid.dt)
        ix = math.floor((xs1 + mid * big_xs - grid.x0) / grid.dx)
        if 0 <= it < grid.nt and 0 <= ix < grid.nx:
            out.append(((it, ix), (b - a) * big_t, (b - a) * big_x))
    return out


def segment_pieces(t: np.ndarray, x: np.ndarray, grid: GridSpec):
    """Vectorized cell decomposition of one fragment's segments.

    Returns flat arrays ``(it, ix, dt_in, dx_in)`` over all in-grid pieces.
    Segments crossing zero or one boundary (the overwhelming share of
    fine-sampled data) are handled with array arithmetic; rarer
    multi-crossing segments fall back to clip_segment.
    """
    t1, t2 = t[:-1], t[1:]
    x1, x2 = x[:-1], x[1:]
    big_t = t2 - t1
    big_x = x2 - x1
    xs1 = x1 - grid.c_wave * (t1 - grid.t0)
    xs2 = x2 - grid.c_wave * (t2 - grid.t0)
    big_xs = xs2 - xs1

    it1 = np.floor((t1 - grid.t0) / grid.dt).astype(np.int64)
    it2 = np.floor((t2 - grid.t0) / grid.dt).astype(np.int64)
    ix1 = np.floor((xs1 - grid.x0) / grid.dx).astype(np.int64)
    ix2 = np.floor((xs2 - grid.x0) / grid.dx).astype(np.int64)
    kt = it2 - it1
    kx = np.abs(ix2 - ix1)

    its, ixs, dts, dxs = [], [], [], []

    def emit(it, ix, dt_in, dx_in):
        inside = (it >= 0) & (it < grid.nt) & (ix >= 0) & (ix < grid.nx)
        its.append(it[inside])
        ixs.append(ix[inside])
        dts.append(dt_in[inside])
        dxs.append(dx_in[inside])

    whole = (kt == 0) & (kx == 0)
    if whole.any():
        emit(it1[whole], ix1[whole], big_t[whole], big_x[whole])

    t_cross = (kt == 1) & (kx == 0)
    if t_cross.any():
        m = t_cross
        s = (grid.t0 + it2[m] * grid.dt - t1[m]) / big_t[m]
        emit(it1[m], ix1[m], s * big_t[m], s * big_x[m])
        emit(it2[m], ix1[m], (1.0 - s) * big_t[m], (1.0 - s) * big_x[m])

    x_cross = (kx == 1) & (kt == 0)
    if x_cross.any():
        m = x_cross
        jb = np.maximum(ix1[m], ix2[m])
        s = (grid.x0 + jb * grid.dx - xs1[m]) / big_xs[m]
        emit(it1[m], ix1[m], s * big_t[m], s * big_x[m])
        emit(it1[m], ix2[m], (1.0 - s) * big_t[m], (1.0 - s) * big_x[m])

    multi = ~(whole | t_cross | x_cross)
    if multi.any():
        mi = []
        mx = []
        mdt = []
        mdx = []
        for i in np.flatnonzero(multi):
            for (it, ix), dt_in, dx_in in clip_segment((t1[i], x1[i]), (t2[i], x2[i]), grid):
                mi.append(it)
                mx.append(ix)
                mdt.append(dt_in)
                mdx.append(dx_in)
        if mi:
            its.append(np.array(mi, dtype=np.int64))
            ixs.append(np.array(mx, dtype=np.int64))
            dts.append(np.array(mdt))
            dxs.append(np.array(mdx))

    if not its:
        z = np.zeros(0)
        return z.astype(np.int64), z.astype(np.int64), z, z
    return (
        np.concatenate(its),
        np.concatenate(ixs),
        np.concatenate(dts),
        np.concatenate(dxs),
    )


class _PieceBuffer:
    """Batches piece arrays so bincount flushes stay infrequent."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.ttt = np.zeros(grid.nt * grid.nx)
        self.ttd = np.zeros(grid.nt * grid.nx)
        self._idx: list[np.ndarray] = []
        self._dt: list[np.ndarray] = []
        self._dx: list[np.ndarray] = []
        self._pending = 0

    def add(self, it, ix, dt_in, dx_in):
        if it.size == 0:
            return
        self._idx.append(it * self.grid.nx + ix)
        self._dt.append(dt_in)
        self._dx.append(dx_in)
        self._pending += it.size
        if self._pending >= _CHUNK_PIECES:
            self.flush()

    def flush(self):
        if not self._idx:
            return
        idx = np.concatenate(self._idx)
        self.ttt += np.bincount(idx, weights=np.concatenate(self._dt), minlength=self.ttt.size)
        self.ttd += np.bincount(idx, weights=np.concatenate(self._dx), minlength=self.ttd.size)
        self._idx, self._dt, self._dx = [], [], []
        self._pending = 0

    def field(self) -> MacroField:
        self.flush()
        g = self.grid
        return MacroField(g, self.ttt.reshape(g.shape), self.ttd.reshape(g.shape))


def accumulate(fragments: Iterable[Fragment], grid: GridSpec) -> MacroField:
    """One streaming pass: add every segment's cell pieces into TTT/TTD.

    Memory is O(nt*nx) plus one fragment, regardless of how many fragments
    the iterable yields.
    """
    buf = _PieceBuffer(grid)
    for frag in fragments:
        if len(frag) < 2:
            continue
        buf.add(*segment_pieces(frag.t, frag.x, grid))
    return buf.field()


def merge(a: MacroField, b: MacroField) -> MacroField:
    """Elementwise sum of two partial accumulations on the same grid."""
    if a.grid != b.grid:
        raise GridMismatchError(f"cannot merge fields on different grids: {a.grid} vs {b.grid}")
    return MacroField(a.grid, a.ttt + b.ttt, a.ttd + b.ttd)


def speed_field(m: MacroField, min_ttt: float = DEFAULT_MIN_TTT) -> RawSpeedField:
    """Edie density/flow/speed from accumulated TTT/TTD.

    Cells with less than ``min_ttt`` seconds of observed travel time are
    marked empty (NaN). TTD is clamped at zero so reverse-rolling noise
    cannot produce negative speeds; v is computed literally as q/rho, which
    reduces to TTD/TTT.
    """
    if min_ttt <= 0:
        raise ValueError("min_ttt must be positive")
    area = m.grid.cell_area
    occupied = m.ttt >= min_ttt
    ttd = np.maximum(m.ttd, 0.0)
    rho = np.where(occupied, m.ttt / area, np.nan)
    q = np.where(occupied, ttd / area, np.nan)
    with np.errstate(invalid="ignore"):
        v = q / rho
    return RawSpeedField(m.grid, v, rho, q)


def cell_speed_deviation(fragments: Iterable[Fragment], grid: GridSpec, cell_speed: np.ndarray) -> float:
    """Total time-weighted absolute deviation of piece speeds from their cell mean.

    Measures how homogeneous traffic is within cells: sum over all pieces of
    dt_in * |dx_in/dt_in - cell_speed|, skipping cells without a defined
    mean. Lower totals mean the grid (e.g. its shear) matches the traffic
    structure better.
    """
    if cell_speed.shape != grid.shape:
        raise ValueError("cell_speed shape must match the grid")
    flat = cell_speed.ravel()
    total = 0.0
    for frag in fragments:
        if len(frag) < 2:
            continue
        it, ix, dt_in, dx_in = segment_pieces(frag.t, frag.x, grid)
        good = dt_in > 0
        idx = it[good] * grid.nx + ix[good]
        vbar = flat[idx]
        valid = np.isfinite(vbar)
        if valid.any():
            piece_v = dx_in[good][valid] / dt_in[good][valid]
            total += float(np.sum(dt_in[good][valid] * np.abs(piece_v - vbar[valid])))
    return total
