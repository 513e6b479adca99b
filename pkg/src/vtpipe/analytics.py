"""Travel-time and speed-variability statistics across lanes and departures.

All aggregation happens in internal units (seconds, m/s); only the
presentation layer converts to minutes and mph. Standard deviations are
population (divide by n), so a fixed set of trajectories has one exact
answer and a single trajectory has deviation zero. Incomplete trajectories
are excluded from statistics but counted, so the gap between generated and
usable departures stays visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .units import mps_to_mph, seconds_to_minutes
from .vtgen import VirtualTrajectory


@dataclass(frozen=True)
class TrajectoryRecord:
    """The slice of a trajectory that aggregation needs.

    VirtualTrajectory exposes the same attributes; records exist so the
    stats stage can work from serialized summaries without reloading every
    integration step.
    """

    lane: int
    t0: float
    travel_time: float  # seconds
    speed_std: float  # m/s
    complete: bool

    @classmethod
    def from_summary(cls, obj: dict) -> "TrajectoryRecord":
        return cls(
            lane=int(obj["lane"]),
            t0=float(obj["t0"]),
            travel_time=float(obj["travel_time_s"]),
            speed_std=float(obj["speed_std_ms"]),
            complete=bool(obj["complete"]),
        )


@dataclass(frozen=True)
class LaneSummary:
    """Per-lane aggregates in presentation units (minutes, mph)."""

    lane: int
    n: int
    n_incomplete: int
    mean_travel_time_min: float | None
    std_travel_time_min: float | None
    mean_speed_std_mph: float | None


def lane_label(lane: int) -> str:
    if lane == 0:
        return "All"
    return "HOV" if lane == 1 else f"Lane {lane}"


def travel_time(vt) -> float:
    """Travel time of a complete trajectory, in minutes."""
    if not vt.complete:
        raise DataError("truncated trajectory: travel time undefined for incomplete runs")
    return seconds_to_minutes(vt.travel_time)


def speed_stats(vt: VirtualTrajectory) -> tuple[float, float]:
    """Arithmetic mean and population standard deviation of the speed series."""
    if len(vt) < 2:
        raise DataError("need at least 2 points for speed statistics")
    return float(np.mean(vt.v)), float(np.std(vt.v))


def lane_summary(per_lane: dict[int, Iterable]) -> list[LaneSummary]:
    """Aggregate complete trajectories for each lane, sorted by lane index."""
    out = []
    for lane in sorted(per_lane):
        vts = list(per_lane[lane])
        done = [vt for vt in vts if vt.complete]
        n_inc = len(vts) - len(done)
        if not done:
            out.append(LaneSummary(lane, 0, n_inc, None, None, None))
            continue
        tt_min = np.array([seconds_to_minutes(vt.travel_time) for vt in done])
        sstd_mph = np.array([mps_to_mph(vt.speed_std) for vt in done])
        out.append(
            LaneSummary(
                lane=lane,
                n=len(done),
                n_incomplete=n_inc,
                mean_travel_time_min=float(np.mean(tt_min)),
                std_travel_time_min=float(np.std(tt_min)),
                mean_speed_std_mph=float(np.mean(sstd_mph)),
            )
        )
    return out


def travel_time_curve(vts: Iterable) -> list[tuple[float, float]]:
    """(departure time s, travel time min) per complete trajectory, by departure."""
    pts = [(vt.t0, seconds_to_minutes(vt.travel_time)) for vt in vts if vt.complete]
    pts.sort(key=lambda p: p[0])
    return pts


_TABLE_ROWS = (
    ("mean travel time (min)", "mean_travel_time_min"),
    ("st.d. travel time (min)", "std_travel_time_min"),
    ("mean speed st.d. (mph)", "mean_speed_std_mph"),
)


def summary_table_csv(summaries: Sequence[LaneSummary]) -> str:
    """Statistics-by-lane table: rows are statistics, columns are lanes."""
    header = "statistic," + ",".join(lane_label(s.lane) for s in summaries)
    lines = [header]
    for label, attr in _TABLE_ROWS:
        cells = []
        for s in summaries:
            val = getattr(s, attr)
            cells.append("" if val is None else f"{val:.2f}")
        lines.append(label + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


def summary_json_payload(summaries: Sequence[LaneSummary]) -> dict:
    """Machine-readable twin of the table, full precision."""
    return {
        "lanes": [
            {
                "lane": s.lane,
                "label": lane_label(s.lane),
                "n": s.n,
                "n_incomplete": s.n_incomplete,
                "mean_travel_time_min": s.mean_travel_time_min,
                "std_travel_time_min": s.std_travel_time_min,
                "mean_speed_std_mph": s.mean_speed_std_mph,
            }
            for s in summaries
        ]
    }


def curve_csv(per_lane_curves: dict[int, list[tuple[float, float]]]) -> str:
    """lane,departure_s,travel_time_min rows sorted by (lane, departure)."""
    lines = ["lane,departure_s,travel_time_min"]
    for lane in sorted(per_lane_curves):
        for dep, tt in per_lane_curves[lane]:
            lines.append(f"{lane},{dep!r},{tt!r}")
    return "\n".join(lines) + "\n"
