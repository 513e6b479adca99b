"""Command-line pipeline: synth | aggregate | smooth | generate | stats | render.

Stages communicate through files, so each is independently re-runnable:

    synth     -> canonical trajectory CSV (oracle fixtures)
    aggregate -> per-lane TTT/TTD + raw speed/density/flow field files
    smooth    -> per-lane smoothed speed + congestion-weight field files
    generate  -> per-lane trajectory CSV + per-trajectory JSONL summaries
    stats     -> statistics table (CSV + JSON) and travel-time curve
    render    -> PNG heatmap of any field file, with optional overlays

Every flag can instead come from a declarative config file of ``key =
value`` lines whose keys equal the flag names; explicit flags win. Exit
codes: 0 success, 1 usage/configuration error, 2 data error. A failing
stage removes whatever outputs it had already written.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd

from . import analytics, asm, fieldio, render, synth, vtgen
from .edie import (
    DEFAULT_C_WAVE,
    DEFAULT_DT,
    DEFAULT_DX,
    DEFAULT_MIN_TTT,
    GridSpec,
    MacroField,
    RawSpeedField,
    merge,
    speed_field,
)
from .errors import DataError, UsageError
from .trajio import UnitConvention, shard_ranges, stream_fragments, write_fragments_csv, write_fragments_jsonl

COMBINED_LANE = 0  # lane index used when aggregating across all lanes


# ---------------------------------------------------------------------------
# option plumbing

def _float(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise UsageError(f"expected a number, got {s!r}") from None


def _int(s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise UsageError(f"expected an integer, got {s!r}") from None


def _str(s: str) -> str:
    return s


def _lanes(s: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in s.split(",") if part.strip() != "")
    except ValueError:
        raise UsageError(f"expected comma-separated lane numbers, got {s!r}") from None


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected true/false, got {s!r}")


def _choice(*allowed: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        if s not in allowed:
            raise UsageError(f"expected one of {allowed}, got {s!r}")
        return s

    return parse


@dataclass(frozen=True)
class Opt:
    name: str  # flag name, also the config-file key
    parse: Callable
    default: object = None
    help: str = ""

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


_GRID_OPTS = [
    Opt("t0", _float, None, "start of the time window (s)"),
    Opt("t-end", _float, None, "end of the time window (s)"),
    Opt("x0", _float, None, "upstream end of the corridor (m)"),
    Opt("x-end", _float, None, "downstream end of the corridor (m)"),
    Opt("dt", _float, DEFAULT_DT, "cell height (s)"),
    Opt("dx", _float, DEFAULT_DX, "cell width (m)"),
    Opt("cwave", _float, DEFAULT_C_WAVE, "cell shear slope (m/s, negative = upstream)"),
]

OPTIONS: dict[str, list[Opt]] = {
    "synth": [
        Opt("out", _str, None, "output trajectory file"),
        Opt("format", _choice("csv", "jsonl"), "csv", "output format"),
        Opt("kind", _choice(*synth.FIELD_KINDS), "constant", "analytic field kind"),
        Opt("v0", _float, None, "base speed (m/s)"),
        Opt("dip-amplitude", _float, 0.0, "dip depth (m/s)"),
        Opt("dip-center", _float, 0.0, "dip center at t=0 (m)"),
        Opt("dip-width", _float, 1.0, "dip gaussian width (m)"),
        Opt("wave-speed", _float, 0.0, "dip drift speed (m/s)"),
        Opt("t-min", _float, 0.0, "domain start (s)"),
        Opt("t-max", _float, None, "domain end (s)"),
        Opt("x-min", _float, 0.0, "domain start (m)"),
        Opt("x-max", _float, None, "domain end (m)"),
        Opt("spawn-interval", _float, None, "departure spacing (s)"),
        Opt("fine-step", _float, synth.DEFAULT_FINE_STEP, "oracle integrator step (s)"),
        Opt("lane", _int, 1, "lane index for the fleet"),
    ],
    "aggregate": [
        Opt("input", _str, None, "trajectory CSV/JSONL file"),
        Opt("out-dir", _str, ".", "artifact directory"),
        *_GRID_OPTS,
        Opt("min-ttt", _float, DEFAULT_MIN_TTT, "TTT floor below which a cell is empty (s)"),
        Opt("lane", _lanes, None, "lanes to aggregate (comma list; default: all combined)"),
        Opt("distance-unit", _choice("meters", "miles", "feet"), "meters", "input position unit"),
        Opt("marker-direction", _choice("increasing", "decreasing"), "increasing",
            "whether positions increase or decrease downstream"),
        Opt("reference-marker", _float, 0.0, "position mapping to x = 0 (input units)"),
        Opt("format", _choice("auto", "csv", "jsonl"), "auto", "input format"),
        Opt("jobs", _int, 1, "parallel shard workers"),
    ],
    "smooth": [
        Opt("in-dir", _str, None, "directory with aggregate outputs"),
        Opt("out-dir", _str, None, "artifact directory (default: in-dir)"),
        Opt("lane", _lanes, None, "lanes to smooth (default: discover)"),
        Opt("cfree", _float, asm.AsmParams.c_free, "free-flow characteristic speed (m/s)"),
        Opt("ccong", _float, asm.AsmParams.c_cong, "congested characteristic speed (m/s)"),
        Opt("vc", _float, asm.AsmParams.v_crit, "blend transition speed (m/s)"),
        Opt("dv", _float, asm.AsmParams.delta_v, "blend transition width (m/s)"),
        Opt("sigma", _float, asm.AsmParams.sigma, "spatial kernel width (m)"),
        Opt("tau", _float, asm.AsmParams.tau, "temporal kernel width (s)"),
        Opt("cutoff", _float, asm.AsmParams.cutoff, "kernel truncation (widths)"),
    ],
    "generate": [
        Opt("in-dir", _str, None, "directory with smooth outputs"),
        Opt("out-dir", _str, None, "artifact directory (default: in-dir)"),
        Opt("lane", _lanes, None, "lanes to integrate (default: discover)"),
        Opt("depart-start", _float, None, "first departure (s; default grid start)"),
        Opt("depart-end", _float, None, "last departure (s; default grid end)"),
        Opt("interval", _float, 15.0, "departure spacing (s)"),
        Opt("step", _float, vtgen.DEFAULT_STEP, "Euler step (s)"),
        Opt("origin", _float, None, "route origin (m; default grid start)"),
        Opt("destination", _float, None, "route destination (m; default grid end)"),
        Opt("t-max", _float, None, "integration time bound (s; default grid end)"),
        Opt("jobs", _int, 1, "parallel departure workers"),
    ],
    "stats": [
        Opt("in-dir", _str, None, "directory with generate outputs"),
        Opt("out-dir", _str, None, "artifact directory (default: in-dir)"),
        Opt("lane", _lanes, None, "lanes to include (default: discover)"),
    ],
    "render": [
        Opt("field", _str, None, "field file to render"),
        Opt("out", _str, None, "output PNG path"),
        Opt("trajectories", _str, None, "trajectory CSV to overlay"),
        Opt("vmin", _float, None, "color scale floor (m/s)"),
        Opt("vmax", _float, None, "color scale ceiling (m/s)"),
        Opt("scale", _int, 4, "pixels per cell"),
        Opt("flip-position", _bool, True, "render downstream at the top"),
    ],
}


class PipelineConfig:
    """Resolved options for one stage: flags override config file values."""

    def __init__(self, opts: list[Opt], args: argparse.Namespace, config: dict[str, str]):
        for opt in opts:
            cli_val = getattr(args, opt.dest, None)
            if cli_val is not None:
                value = cli_val
            elif opt.name in config:
                value = opt.parse(config[opt.name])
            else:
                value = opt.default
            setattr(self, opt.dest, value)

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name.replace("-", "_")) is None:
                raise UsageError(f"missing required option --{name} (or config key '{name}')")


def parse_config_file(path) -> dict[str, str]:
    known = {opt.name for opts in OPTIONS.values() for opt in opts}
    out: dict[str, str] = {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {p}")
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{p}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in known:
            raise UsageError(f"{p}:{lineno}: unknown config key {key!r}")
        out[key] = value.strip()
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vtpipe", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    for name, opts in OPTIONS.items():
        sp = sub.add_parser(name, help=f"run the {name} stage")
        sp.add_argument("--config", type=str, default=None, help="declarative key=value config file")
        for opt in opts:
            if opt.parse is _bool:
                sp.add_argument(f"--{opt.name}", type=_bool, default=None, metavar="BOOL", help=opt.help)
            else:
                sp.add_argument(f"--{opt.name}", type=opt.parse, default=None, help=opt.help)
    return parser


@contextmanager
def _commit_outputs():
    """Collects written artifact paths; removes them all if the stage fails."""
    written: list[Path] = []
    try:
        yield written
    except BaseException:
        for p in written:
            Path(p).unlink(missing_ok=True)
        raise


def _write_text(path: Path, text: str, written: list[Path]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)
    written.append(path)


# ---------------------------------------------------------------------------
# lane/file naming

def _lane_tag(lane) -> str:
    return "all" if lane is None else str(int(lane))


def _field_path(out_dir: Path, lane, kind: str) -> Path:
    return out_dir / f"lane{_lane_tag(lane)}_{kind}.field"


def _traj_paths(out_dir: Path, lane) -> tuple[Path, Path]:
    tag = _lane_tag(lane)
    return out_dir / f"lane{tag}_trajectories.csv", out_dir / f"lane{tag}_summary.jsonl"


def _discover_lanes(in_dir: Path, pattern: str) -> list[int | None]:
    lanes: list[int | None] = []
    for p in sorted(in_dir.glob(pattern.format(tag="*"))):
        tag = p.name.split("_")[0][len("lane"):]
        lanes.append(None if tag == "all" else int(tag))
    if not lanes:
        raise UsageError(f"no {pattern.format(tag='*')} files found in {in_dir}")
    return lanes


def _lane_list(cfg_lanes, in_dir: Path, pattern: str) -> list[int | None]:
    if cfg_lanes is None:
        return _discover_lanes(in_dir, pattern)
    return list(cfg_lanes)


# ---------------------------------------------------------------------------
# aggregate

def _build_grid(cfg) -> GridSpec:
    cfg.require("t0", "t-end", "x0", "x-end")
    t_span = cfg.t_end - cfg.t0
    if t_span <= 0 or cfg.x_end <= cfg.x0:
        raise UsageError("need t-end > t0 and x-end > x0")
    nt = int(math.ceil(t_span / cfg.dt - 1e-9))
    # extend the sheared window so slanted cells cover the full corridor
    # for the whole time span
    xs_lo = cfg.x0 - max(cfg.cwave, 0.0) * t_span
    xs_hi = cfg.x_end - min(cfg.cwave, 0.0) * t_span
    nx = int(math.ceil((xs_hi - xs_lo) / cfg.dx - 1e-9))
    try:
        return GridSpec(t0=cfg.t0, dt=cfg.dt, nt=nt, x0=xs_lo, dx=cfg.dx, nx=nx, c_wave=cfg.cwave)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _accumulate_shard(args) -> dict:
    path, byte_range, conv, lanes, grid, fmt = args
    fields = _accumulate_stream(
        stream_fragments(path, conv, byte_range=byte_range, fmt=fmt), lanes, grid
    )
    return {k: (f.ttt, f.ttd) for k, f in fields.items()}


def _accumulate_stream(fragments, lanes, grid) -> dict:
    """One pass; routes fragments into one accumulator per requested lane."""
    from .edie import _PieceBuffer, segment_pieces

    if lanes is None:
        buffers = {None: _PieceBuffer(grid)}
    else:
        buffers = {lane: _PieceBuffer(grid) for lane in lanes}
    for frag in fragments:
        key = None if lanes is None else frag.lane
        buf = buffers.get(key)
        if buf is None or len(frag) < 2:
            continue
        buf.add(*segment_pieces(frag.t, frag.x, grid))
    return {k: b.field() for k, b in buffers.items()}


def _accumulate_input(path: str, conv, lanes, grid, jobs: int, fmt: str) -> dict:
    fmt_arg = None if fmt == "auto" else fmt
    src = Path(path)
    if not src.exists():
        raise UsageError(f"input file not found: {src}")
    effective_fmt = fmt_arg or ("jsonl" if src.suffix in (".jsonl", ".ndjson") else "csv")
    if jobs > 1 and effective_fmt == "csv":
        ranges = shard_ranges(src, jobs)
        ctx = get_context("fork")
        # one shard per job, but never more processes than cores: extra
        # workers only thrash the memory bus
        pool_size = max(1, min(jobs, os.cpu_count() or jobs))
        with ctx.Pool(processes=pool_size) as pool:
            parts = pool.map(
                _accumulate_shard,
                [(str(src), rng, conv, lanes, grid, effective_fmt) for rng in ranges],
            )
        keys = [None] if lanes is None else list(lanes)
        out = {}
        for key in keys:
            total = MacroField.zeros(grid)
            for part in parts:
                ttt, ttd = part[key]
                total = merge(total, MacroField(grid, ttt, ttd))
            out[key] = total
        return out
    return _accumulate_stream(
        stream_fragments(src, conv, fmt=effective_fmt), lanes, grid
    )


def _cmd_aggregate(cfg) -> None:
    cfg.require("input")
    try:
        conv = UnitConvention(
            distance_in=cfg.distance_unit,
            mile_marker_direction=cfg.marker_direction,
            reference_marker=cfg.reference_marker,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    grid = _build_grid(cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lanes = [None] if cfg.lane is None else list(cfg.lane)

    # refuse to mix grids within one artifact directory
    kinds = ("ttt", "ttd", "speed", "density", "flow")
    for lane in lanes:
        for kind in kinds:
            p = _field_path(out_dir, lane, kind)
            if p.exists():
                fieldio.check_grid_compatible(p, grid)

    fields = _accumulate_input(cfg.input, conv, cfg.lane, grid, cfg.jobs, cfg.format)
    with _commit_outputs() as written:
        for lane in lanes:
            macro = fields[lane]
            raw = speed_field(macro, cfg.min_ttt)
            for kind, values in (
                ("ttt", macro.ttt),
                ("ttd", macro.ttd),
                ("speed", raw.v),
                ("density", raw.rho),
                ("flow", raw.q),
            ):
                p = _field_path(out_dir, lane, kind)
                fieldio.write_field(p, grid, values, kind)
                written.append(p)


# ---------------------------------------------------------------------------
# smooth

def _cmd_smooth(cfg) -> None:
    cfg.require("in-dir")
    in_dir = Path(cfg.in_dir)
    out_dir = Path(cfg.out_dir) if cfg.out_dir is not None else in_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    lanes = _lane_list(cfg.lane, in_dir, "lane{tag}_speed.field")
    try:
        params = asm.AsmParams(
            c_free=cfg.cfree,
            c_cong=cfg.ccong,
            v_crit=cfg.vc,
            delta_v=cfg.dv,
            sigma=cfg.sigma,
            tau=cfg.tau,
            cutoff=cfg.cutoff,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    with _commit_outputs() as written:
        for lane in lanes:
            grid, v, _ = fieldio.read_field(_require_field(_field_path(in_dir, lane, "speed")), "speed")
            _, rho, _ = fieldio.read_field(_require_field(_field_path(in_dir, lane, "density")), "density")
            _, q, _ = fieldio.read_field(_require_field(_field_path(in_dir, lane, "flow")), "flow")
            raw = RawSpeedField(grid, v, rho, q)
            smoothed = asm.smooth(raw, params)
            for kind, values in (("smoothed", smoothed.v), ("weight", smoothed.w)):
                p = _field_path(out_dir, lane, kind)
                if p.exists():
                    fieldio.check_grid_compatible(p, grid)
                fieldio.write_field(p, grid, values, kind)
                written.append(p)


# ---------------------------------------------------------------------------
# generate

def _require_field(path: Path) -> Path:
    if not path.exists():
        raise UsageError(f"missing field file: {path}")
    return path


def _load_smoothed(in_dir: Path, lane) -> asm.SmoothedField:
    grid, v, _ = fieldio.read_field(_require_field(_field_path(in_dir, lane, "smoothed")), "smoothed")
    wpath = _field_path(in_dir, lane, "weight")
    if wpath.exists():
        _, w, _ = fieldio.read_field(wpath, "weight")
    else:
        w = np.zeros(grid.shape)
    return asm.SmoothedField(grid, v, w, asm.AsmParams())


def _sweep_worker(args):
    field, t_starts, interval, x0, x_end, step, t_max, lane = args
    out = []
    for t0 in t_starts:
        out.append(vtgen.integrate(field, t0, x0, step, x_end, t_max, lane))
    return out


def _cmd_generate(cfg) -> None:
    cfg.require("in-dir")
    in_dir = Path(cfg.in_dir)
    out_dir = Path(cfg.out_dir) if cfg.out_dir is not None else in_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    lanes = _lane_list(cfg.lane, in_dir, "lane{tag}_smoothed.field")

    with _commit_outputs() as written:
        for lane in lanes:
            field = _load_smoothed(in_dir, lane)
            grid = field.grid
            depart_start = cfg.depart_start if cfg.depart_start is not None else grid.t0
            depart_end = cfg.depart_end if cfg.depart_end is not None else grid.t_end
            t_max = cfg.t_max if cfg.t_max is not None else grid.t_end
            origin = cfg.origin if cfg.origin is not None else grid.x0
            destination = cfg.destination if cfg.destination is not None else grid.x_end
            lane_no = COMBINED_LANE if lane is None else int(lane)
            if cfg.jobs > 1:
                count = int(math.floor((depart_end - depart_start) / cfg.interval + 1e-9)) + 1
                departures = depart_start + cfg.interval * np.arange(count)
                chunks = np.array_split(departures, cfg.jobs)
                ctx = get_context("fork")
                with ctx.Pool(processes=cfg.jobs) as pool:
                    parts = pool.map(
                        _sweep_worker,
                        [
                            (field, chunk, cfg.interval, origin, destination, cfg.step, t_max, lane_no)
                            for chunk in chunks
                            if chunk.size
                        ],
                    )
                vts = [vt for part in parts for vt in part]
            else:
                vts = vtgen.departure_sweep(
                    field, depart_start, depart_end, cfg.interval,
                    origin, destination, cfg.step, t_max, lane_no,
                )
            csv_path, sum_path = _traj_paths(out_dir, lane)
            tmp_csv = csv_path.with_name(csv_path.name + ".tmp")
            vtgen.write_trajectories_csv(vts, tmp_csv)
            tmp_csv.replace(csv_path)
            written.append(csv_path)
            tmp_sum = sum_path.with_name(sum_path.name + ".tmp")
            vtgen.write_summary_jsonl(vts, tmp_sum)
            tmp_sum.replace(sum_path)
            written.append(sum_path)


# ---------------------------------------------------------------------------
# stats

def _cmd_stats(cfg) -> None:
    cfg.require("in-dir")
    in_dir = Path(cfg.in_dir)
    out_dir = Path(cfg.out_dir) if cfg.out_dir is not None else in_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    lanes = _lane_list(cfg.lane, in_dir, "lane{tag}_summary.jsonl")

    per_lane: dict[int, list[analytics.TrajectoryRecord]] = {}
    for lane in lanes:
        _, sum_path = _traj_paths(in_dir, lane)
        if not sum_path.exists():
            raise UsageError(f"missing summary file: {sum_path}")
        for obj in vtgen.read_summaries_jsonl(sum_path):
            rec = analytics.TrajectoryRecord.from_summary(obj)
            per_lane.setdefault(rec.lane, []).append(rec)
    if not per_lane:
        raise DataError("no trajectories found in summaries")

    summaries = analytics.lane_summary(per_lane)
    curves = {lane: analytics.travel_time_curve(recs) for lane, recs in per_lane.items()}
    import json

    with _commit_outputs() as written:
        _write_text(out_dir / "stats.csv", analytics.summary_table_csv(summaries), written)
        _write_text(
            out_dir / "stats.json",
            json.dumps(analytics.summary_json_payload(summaries), indent=2, sort_keys=True) + "\n",
            written,
        )
        _write_text(out_dir / "travel_time_curve.csv", analytics.curve_csv(curves), written)


# ---------------------------------------------------------------------------
# render

def _read_overlay(path: str) -> list[tuple[np.ndarray, np.ndarray]]:
    try:
        frame = pd.read_csv(path)
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise DataError(f"unreadable trajectory CSV {path}: {exc}") from None
    needed = {"lane", "departure_s", "t_s", "position_m"}
    if not needed.issubset(frame.columns):
        raise DataError(f"{path}: trajectory CSV must have columns {sorted(needed)}")
    out = []
    for (_, _), g in frame.groupby(["lane", "departure_s"], sort=True):
        out.append((g["t_s"].to_numpy(np.float64), g["position_m"].to_numpy(np.float64)))
    return out


def _cmd_render(cfg) -> None:
    cfg.require("field", "out")
    src = Path(cfg.field)
    if not src.exists():
        raise UsageError(f"field file not found: {src}")
    grid, values, kind = fieldio.read_field(src)
    overlay = _read_overlay(cfg.trajectories) if cfg.trajectories is not None else None
    with _commit_outputs() as written:
        out = Path(cfg.out)
        render.render_field_image(
            grid,
            values,
            out,
            kind=kind,
            trajectories=overlay,
            vmin=cfg.vmin,
            vmax=cfg.vmax,
            scale=cfg.scale,
            flip_position=cfg.flip_position,
        )
        written.append(out)
        written.append(out.with_name(out.name + ".legend.txt"))


# ---------------------------------------------------------------------------
# synth

def _cmd_synth(cfg) -> None:
    cfg.require("out", "v0", "t-max", "x-max", "spawn-interval")
    try:
        spec = synth.AnalyticFieldSpec(
            kind=cfg.kind,
            v0=cfg.v0,
            dip_amplitude=cfg.dip_amplitude,
            dip_center=cfg.dip_center,
            dip_width=cfg.dip_width,
            wave_speed=cfg.wave_speed,
            t_min=cfg.t_min,
            t_max=cfg.t_max,
            x_min=cfg.x_min,
            x_max=cfg.x_max,
        )
        fleet = synth.generate_fleet(spec, cfg.spawn_interval, lane=cfg.lane, fine_step=cfg.fine_step)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(cfg.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    with _commit_outputs() as written:
        tmp = out.with_name(out.name + ".tmp")
        if cfg.format == "jsonl":
            write_fragments_jsonl(fleet, tmp)
        else:
            write_fragments_csv(fleet, tmp)
        tmp.replace(out)
        written.append(out)


_COMMANDS = {
    "synth": _cmd_synth,
    "aggregate": _cmd_aggregate,
    "smooth": _cmd_smooth,
    "generate": _cmd_generate,
    "stats": _cmd_stats,
    "render": _cmd_render,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand (one of: " + ", ".join(_COMMANDS) + ")")
        config = parse_config_file(args.config) if args.config else {}
        cfg = PipelineConfig(OPTIONS[args.command], args, config)
        _COMMANDS[args.command](cfg)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
