"""Virtual trajectories: forward-Euler paths through a smoothed speed field.

A virtual vehicle obeys dp/dt = v(t, p(t)) with the right-hand side sampled
from the smoothed field by shape-preserving (monotone) piecewise-cubic
interpolation, tensor-product style: along x at the four nearest time rows,
then along t through those four values. Monotone slopes keep the sampled
speed inside the local data range, so a small Euler step cannot overshoot
into artifacts of the grid quantization.

Integration advances in fixed steps of ``step`` seconds; the final step is
linearly interpolated so complete trajectories end exactly at the
destination. Trajectories that hit the time bound first are kept and
flagged incomplete. All departures integrate independently; the sweep
batches them through the same vectorized kernel, so a batch of one is
bit-identical to a lone integration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .asm import SmoothedField
from .errors import UsageError

DEFAULT_STEP = 0.1


@dataclass
class VirtualTrajectory:
    """One virtual vehicle's (t, p, v) series plus summary statistics."""

    lane: int
    t0: float  # departure time, s
    x0: float  # origin, m
    step: float  # Euler step, s
    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    complete: bool
    travel_time: float = field(init=False)
    speed_mean: float = field(init=False)
    speed_std: float = field(init=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.p = np.asarray(self.p, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if not (self.t.size and self.t.size == self.p.size == self.v.size):
            raise ValueError("t, p, v must be equal-length, nonempty")
        if self.t.size > 1 and not (np.diff(self.t) > 0).all():
            raise ValueError("times must be strictly increasing")
        if (np.diff(self.p) < 0).any():
            raise ValueError("positions must be nondecreasing")
        self.travel_time = float(self.t[-1] - self.t0)
        self.speed_mean = float(np.mean(self.v))
        self.speed_std = float(np.std(self.v))

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.t.tolist(), self.p.tolist(), self.v.tolist()))


def _monotone_slopes(values: np.ndarray, spacing: float) -> np.ndarray:
    """Fritsch-Butland slopes along the last axis of a regularly spaced grid.

    Interior slopes are the harmonic mean of adjacent secants when those
    agree in sign and zero otherwise; edges take the one-sided secant. This
    keeps the cubic monotone on every interval.
    """
    if values.shape[-1] < 2:
        return np.zeros_like(values)
    d = np.diff(values, axis=-1) / spacing
    m = np.empty_like(values)
    m[..., 0] = d[..., 0]
    m[..., -1] = d[..., -1]
    if values.shape[-1] > 2:
        left = d[..., :-1]
        right = d[..., 1:]
        prod = left * right
        denom = np.where(prod > 0, left + right, 1.0)
        m[..., 1:-1] = np.where(prod > 0, 2.0 * left * right / denom, 0.0)
    return m


def _hermite(v0, m0, v1, m1, h, theta):
    """Cubic Hermite basis evaluation on one interval of width h."""
    t2 = theta * theta
    t3 = t2 * theta
    return (
        v0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * h * (t3 - 2.0 * t2 + theta)
        + v1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * h * (t3 - t2)
    )


class SpeedSampler:
    """Monotone piecewise-cubic interpolator over a smoothed field.

    Queries are in real (t, x); the spatial coordinate is sheared into the
    grid's lattice internally. Queries outside the hull of cell centers are
    clamped to the nearest boundary cell. Results are additionally clamped
    to [0, max field speed].
    """

    def __init__(self, field: SmoothedField):
        self.field = field
        self.grid = field.grid
        self._v = field.v
        self._mx = _monotone_slopes(field.v, field.grid.dx)
        self._vmax = float(field.v.max())

    def __call__(self, t, x):
        grid = self.grid
        t = np.asarray(t, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        scalar = t.ndim == 0 and x.ndim == 0
        t, x = np.broadcast_arrays(np.atleast_1d(t), np.atleast_1d(x))

        xs = x - grid.c_wave * (t - grid.t0)
        # node coordinates: cell centers, spacing (dt, dx)
        u = np.clip((t - grid.t0) / grid.dt - 0.5, 0.0, grid.nt - 1.0)
        wq = np.clip((xs - grid.x0) / grid.dx - 0.5, 0.0, grid.nx - 1.0)
        i0 = np.minimum(np.floor(u).astype(np.int64), max(grid.nt - 2, 0))
        j0 = np.minimum(np.floor(wq).astype(np.int64), max(grid.nx - 2, 0))
        theta_t = u - i0
        theta_x = wq - j0

        if grid.nx == 1:
            def col(irow):
                return self._v[irow, np.zeros_like(irow)]
        else:
            def col(irow):
                v0 = self._v[irow, j0]
                v1 = self._v[irow, j0 + 1]
                m0 = self._mx[irow, j0]
                m1 = self._mx[irow, j0 + 1]
                return _hermite(v0, m0, v1, m1, grid.dx, theta_x)

        if grid.nt == 1:
            out = col(np.zeros_like(i0))
        elif grid.nt == 2:
            g0 = col(i0)
            g1 = col(i0 + 1)
            out = g0 + (g1 - g0) * theta_t
        else:
            i_prev = np.maximum(i0 - 1, 0)
            i_next = np.minimum(i0 + 2, grid.nt - 1)
            g_prev = col(i_prev)
            g0 = col(i0)
            g1 = col(i0 + 1)
            g_next = col(i_next)
            d_mid = (g1 - g0) / grid.dt
            # one-sided at the first/last interval, harmonic mean inside
            d_lo = np.where(i0 > 0, (g0 - g_prev) / grid.dt, d_mid)
            d_hi = np.where(i0 + 2 <= grid.nt - 1, (g_next - g1) / grid.dt, d_mid)
            m0 = _limited(d_lo, d_mid, i0 > 0)
            m1 = _limited(d_mid, d_hi, i0 + 2 <= grid.nt - 1)
            out = _hermite(g0, m0, g1, m1, grid.dt, theta_t)

        out = np.clip(out, 0.0, self._vmax)
        if scalar:
            return float(out[0])
        return out


def _limited(d_left, d_right, interior):
    """Harmonic-mean slope where interior; one-sided secant at boundaries."""
    prod = d_left * d_right
    denom = np.where(prod > 0, d_left + d_right, 1.0)
    harmonic = np.where(prod > 0, 2.0 * d_left * d_right / denom, 0.0)
    return np.where(interior, harmonic, d_left)


def sample_speed(field: SmoothedField, t, x):
    """One-shot monotone cubic sample of the field at real (t, x).

    Building the interpolant costs O(grid); reuse a SpeedSampler when
    sampling many points.
    """
    return SpeedSampler(field)(t, x)


def integrate(
    field: SmoothedField,
    t0: float,
    x0: float,
    step: float,
    x_end: float,
    t_max: float,
    lane: int = 1,
) -> VirtualTrajectory:
    """Forward-Euler path from (t0, x0) to x_end, bounded by t_max."""
    return _integrate_batch(field, np.array([float(t0)]), x0, step, x_end, t_max, lane)[0]


def departure_sweep(
    field: SmoothedField,
    t_start: float,
    t_end: float,
    interval: float,
    x0: float,
    x_end: float,
    step: float,
    t_max: float,
    lane: int = 1,
) -> list[VirtualTrajectory]:
    """One trajectory per departure at t_start, t_start+interval, ..., <= t_end.

    Incomplete trajectories (time bound hit) are kept and flagged; the
    analytics layer excludes them from travel-time statistics.
    """
    if interval <= 0:
        raise ValueError("interval must be positive")
    if t_end < t_start:
        raise ValueError("t_end must be >= t_start")
    count = int(math.floor((t_end - t_start) / interval + 1e-9)) + 1
    departures = t_start + interval * np.arange(count)
    return _integrate_batch(field, departures, x0, step, x_end, t_max, lane)


def _integrate_batch(field, t0s, x0, step, x_end, t_max, lane):
    if step <= 0:
        raise ValueError("step must be positive")
    if not x0 < x_end:
        raise UsageError(f"degenerate route: origin {x0} is not upstream of destination {x_end}")
    sampler = SpeedSampler(field)
    m = t0s.size

    blocks_idx: list[np.ndarray] = []
    blocks_t: list[np.ndarray] = []
    blocks_p: list[np.ndarray] = []
    blocks_v: list[np.ndarray] = []
    complete = np.zeros(m, dtype=bool)

    active = np.arange(m)
    t_cur = t0s.astype(np.float64).copy()
    p_cur = np.full(m, float(x0))
    k = 0
    while active.size:
        ta = t_cur[active]
        pa = p_cur[active]
        va = sampler(ta, pa)
        blocks_idx.append(active.copy())
        blocks_t.append(ta.copy())
        blocks_p.append(pa.copy())
        blocks_v.append(np.asarray(va, dtype=np.float64))

        arrived = pa >= x_end
        timed_out = ~arrived & (ta >= t_max)
        complete[active[arrived]] = True
        keep = ~(arrived | timed_out)
        active = active[keep]
        if active.size == 0:
            break
        ta = ta[keep]
        pa = pa[keep]
        va = np.maximum(np.asarray(va)[keep], 0.0)

        k += 1
        p_next = pa + step * va
        t_next = t0s[active] + k * step
        crossing = p_next >= x_end
        if crossing.any():
            frac = (x_end - pa[crossing]) / (p_next[crossing] - pa[crossing])
            t_next = t_next.copy()
            # keep time strictly increasing even when the remaining gap to
            # x_end is float dust and frac*step underflows at |t| ~ 1e4
            t_next[crossing] = np.maximum(
                ta[crossing] + frac * step, np.nextafter(ta[crossing], np.inf)
            )
            p_next = p_next.copy()
            p_next[crossing] = x_end
        t_cur[active] = t_next
        p_cur[active] = p_next

    idx = np.concatenate(blocks_idx)
    order = np.argsort(idx, kind="stable")
    idx_sorted = idx[order]
    t_all = np.concatenate(blocks_t)[order]
    p_all = np.concatenate(blocks_p)[order]
    v_all = np.concatenate(blocks_v)[order]
    counts = np.bincount(idx_sorted, minlength=m)
    offsets = np.concatenate(([0], np.cumsum(counts)))

    out = []
    for i in range(m):
        a, b = offsets[i], offsets[i + 1]
        out.append(
            VirtualTrajectory(
                lane=lane,
                t0=float(t0s[i]),
                x0=float(x0),
                step=float(step),
                t=t_all[a:b],
                p=p_all[a:b],
                v=v_all[a:b],
                complete=bool(complete[i]),
            )
        )
    return out


TRAJECTORY_CSV_HEADER = "lane,departure_s,t_s,position_m,speed_ms"


def write_trajectories_csv(vts: Iterable[VirtualTrajectory], dest) -> int:
    """One row per integration step, all trajectories concatenated."""
    rows = 0

    def _write(f):
        nonlocal rows
        f.write(TRAJECTORY_CSV_HEADER + "\n")
        for vt in vts:
            head = f"{vt.lane},{vt.t0!r},"
            for ti, pi, vi in zip(vt.t.tolist(), vt.p.tolist(), vt.v.tolist()):
                f.write(f"{head}{ti!r},{pi!r},{vi!r}\n")
                rows += 1

    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="\n") as f:
            _write(f)
    else:
        _write(dest)
    return rows


def write_summary_jsonl(vts: Iterable[VirtualTrajectory], dest) -> int:
    """One JSON object per trajectory: lane, t0, travel_time_s, speed_std_ms, complete."""
    rows = 0

    def _write(f):
        nonlocal rows
        for vt in vts:
            f.write(
                json.dumps(
                    {
                        "lane": vt.lane,
                        "t0": vt.t0,
                        "travel_time_s": vt.travel_time,
                        "speed_std_ms": vt.speed_std,
                        "complete": vt.complete,
                    },
                    separators=(",", ":"),
                    sort_keys=True,
                )
                + "\n"
            )
            rows += 1

    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="\n") as f:
            _write(f)
    else:
        _write(dest)
    return rows


def read_summaries_jsonl(path) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
