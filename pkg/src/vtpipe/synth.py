"""Synthetic ground-truth speed fields and fleets sampled from them.

These are the verification oracles for the whole pipeline: an analytic
field whose value is known everywhere, a fleet of trajectories integrated
through it with a classical 4th-order method (two orders more accurate
than the production Euler integrator), and single reference paths for
error measurement. The fleet writes canonical CSV, so the pipeline
consumes oracle data exactly like real data.

Vehicles do not interact; there is no car-following or lane-change model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .trajio import Fragment
from .vtgen import VirtualTrajectory

OUTPUT_RATE_HZ = 25.0
DEFAULT_FINE_STEP = 0.02

FIELD_KINDS = ("constant", "traveling_gaussian_dip")


@dataclass(frozen=True)
class AnalyticFieldSpec:
    """Closed-form speed field over a rectangular (t, x) domain.

    ``traveling_gaussian_dip`` is a slow band of depth ``dip_amplitude``
    and width ``dip_width`` centered at ``dip_center + wave_speed * t``;
    negative wave speeds move the band upstream like a congestion wave.
    Speeds stay positive because the amplitude must be below ``v0``.
    """

    kind: str
    v0: float
    dip_amplitude: float = 0.0
    dip_center: float = 0.0
    dip_width: float = 1.0
    wave_speed: float = 0.0
    t_min: float = 0.0
    t_max: float = 1.0
    x_min: float = 0.0
    x_max: float = 1.0

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.v0 <= 0:
            raise ValueError("v0 must be positive")
        if not 0.0 <= self.dip_amplitude < self.v0:
            raise ValueError("need 0 <= dip_amplitude < v0 so speed stays positive")
        if self.dip_width <= 0:
            raise ValueError("dip_width must be positive")
        if not (self.t_max > self.t_min and self.x_max > self.x_min):
            raise ValueError("degenerate domain")


def analytic_speed(spec: AnalyticFieldSpec, t, x):
    """Ground-truth speed at (t, x); accepts scalars or arrays."""
    if spec.kind == "constant":
        if np.ndim(t) == 0 and np.ndim(x) == 0:
            return spec.v0
        return np.full(np.broadcast(np.asarray(t), np.asarray(x)).shape, spec.v0)
    offset = x - spec.dip_center - spec.wave_speed * t
    return spec.v0 - spec.dip_amplitude * np.exp(-(offset**2) / (2.0 * spec.dip_width**2))


def _substeps(fine_step: float) -> tuple[int, float]:
    if fine_step > 0.05:
        raise ValueError("fine_step must be <= 0.05 s for oracle accuracy")
    h_out = 1.0 / OUTPUT_RATE_HZ
    n_sub = max(1, math.ceil(h_out / fine_step - 1e-12))
    return n_sub, h_out / n_sub


def _rk4_advance(speed_fn, t, p, h, n_sub):
    """n_sub classical RK4 steps of dp/dt = speed_fn(t, p); vectorized."""
    for i in range(n_sub):
        ti = t + i * h
        k1 = speed_fn(ti, p)
        k2 = speed_fn(ti + 0.5 * h, p + 0.5 * h * k1)
        k3 = speed_fn(ti + 0.5 * h, p + 0.5 * h * k2)
        k4 = speed_fn(ti + h, p + h * k3)
        p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return p


def generate_fleet(
    spec: AnalyticFieldSpec,
    spawn_interval: float,
    lane: int = 1,
    fine_step: float = DEFAULT_FINE_STEP,
) -> list[Fragment]:
    """Vehicles departing x_min every spawn_interval, sampled at 25 Hz.

    Each vehicle follows dp/dt = analytic_speed(t, p) under 4th-order
    integration at ``fine_step`` (or finer, so sub-steps tile the 25 Hz
    output exactly). A fragment ends at the first sample with p >= x_max
    or when the next sample would pass t_max.
    """
    if spawn_interval <= 0:
        raise ValueError("spawn_interval must be positive")
    n_sub, h = _substeps(fine_step)
    h_out = 1.0 / OUTPUT_RATE_HZ

    n_veh = int(math.floor((spec.t_max - spec.t_min) / spawn_interval - 1e-9)) + 1
    spawns = spec.t_min + spawn_interval * np.arange(n_veh)
    spawns = spawns[spawns < spec.t_max]
    n_veh = spawns.size
    max_steps = int(math.ceil((spec.t_max - spec.t_min) / h_out)) + 2

    pos = np.full((n_veh, max_steps), np.nan)
    pos[:, 0] = spec.x_min
    counts = np.ones(n_veh, dtype=np.int64)
    active = np.arange(n_veh)
    p = np.full(n_veh, float(spec.x_min))
    k = 0
    while active.size:
        t_now = spawns[active] + k * h_out
        p_new = _rk4_advance(lambda tt, pp: analytic_speed(spec, tt, pp), t_now, p[active], h, n_sub)
        k += 1
        t_new = spawns[active] + k * h_out
        in_time = t_new <= spec.t_max
        rec = active[in_time]
        pos[rec, k] = p_new[in_time]
        counts[rec] = k + 1
        p[active] = p_new
        # keep integrating vehicles that are in time and still upstream of x_max
        active = rec[p_new[in_time] < spec.x_max]

    fleet = []
    for i in range(n_veh):
        c = int(counts[i])
        fleet.append(
            Fragment(
                vehicle_id=f"veh{i:05d}",
                lane=lane,
                t=spawns[i] + h_out * np.arange(c),
                x=pos[i, :c],
            )
        )
    return fleet


def reference_path(
    speed_fn: Callable,
    t0: float,
    x0: float,
    *,
    fine_step: float,
    t_max: float,
    x_end: float,
    lane: int = 1,
) -> VirtualTrajectory:
    """4th-order path through an arbitrary speed function, 25 Hz output.

    The final sub-step is linearly interpolated so a complete path ends
    exactly at x_end. Used both for ground-truth references through the
    analytic field and as a high-accuracy reference through a sampled
    field when measuring integrator error.
    """
    n_sub, h = _substeps(fine_step)
    h_out = 1.0 / OUTPUT_RATE_HZ
    ts = [float(t0)]
    ps = [float(x0)]
    complete = False
    if t0 < t_max and x0 < x_end:
        p = float(x0)
        k = 0
        arrived = False
        while not arrived:
            base = t0 + k * h_out
            for i in range(n_sub):
                tf = base + i * h
                p_new = float(_rk4_advance(speed_fn, tf, p, h, 1))
                if p_new >= x_end:
                    frac = (x_end - p) / (p_new - p) if p_new > p else 0.0
                    ts.append(tf + frac * h)
                    ps.append(float(x_end))
                    arrived = True
                    break
                p = p_new
            if arrived:
                break
            k += 1
            t_new = t0 + k * h_out
            if t_new > t_max:
                break
            ts.append(t_new)
            ps.append(p)
            if t_new >= t_max:
                break
        complete = arrived
    t_arr = np.array(ts)
    p_arr = np.array(ps)
    v_arr = np.array([float(np.asarray(speed_fn(ti, pi))) for ti, pi in zip(t_arr, p_arr)])
    return VirtualTrajectory(
        lane=lane,
        t0=float(t0),
        x0=float(x0),
        step=h_out,
        t=t_arr,
        p=p_arr,
        v=v_arr,
        complete=complete,
    )


def reference_trajectory(
    spec: AnalyticFieldSpec,
    t0: float,
    x0: float,
    fine_step: float = DEFAULT_FINE_STEP,
    lane: int = 1,
) -> VirtualTrajectory:
    """Ground-truth counterpart of the production integrator."""
    return reference_path(
        lambda t, p: analytic_speed(spec, t, p),
        t0,
        x0,
        fine_step=fine_step,
        t_max=spec.t_max,
        x_end=spec.x_max,
        lane=lane,
    )
