"""Canonical trajectory interchange format and constant-memory streaming ingestion.

Canonical CSV: header ``vehicle_id,timestamp_s,position,lane``, UTF-8, LF
line endings, ``.`` decimal separator. The JSON-lines variant carries one
object per line with the same keys. Extra columns/keys (vehicle class,
dimensions, ...) are accepted and ignored.

Rows must be grouped by vehicle: a maximal contiguous run of rows sharing
``(vehicle_id, lane)`` is one fragment. Fragments are never re-joined; a
vehicle id reappearing later in a file starts a new fragment.

``stream_fragments`` reads any size of file in bounded memory: the peak is
one parser chunk plus the largest single fragment, independent of file
length. ``shard_ranges`` splits a file into byte ranges aligned to fragment
boundaries so disjoint shards can be streamed in parallel and their
accumulated grids merged.
"""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import pandas as pd

from .errors import ParseError
from .units import METERS_PER_FOOT, METERS_PER_MILE

CSV_COLUMNS = ("vehicle_id", "timestamp_s", "position", "lane")
CSV_HEADER = ",".join(CSV_COLUMNS)

_DISTANCE_FACTORS = {"meters": 1.0, "miles": METERS_PER_MILE, "feet": METERS_PER_FOOT}

DEFAULT_CHUNK_ROWS = 1 << 18


@dataclass(frozen=True)
class UnitConvention:
    """How file positions map to the internal forward coordinate (meters).

    ``reference_marker`` is expressed in the same unit as the file's
    ``position`` column. With ``mile_marker_direction="decreasing"`` the
    forward coordinate is ``(reference_marker - position) * unit``: the
    reference marker maps to x = 0 and downstream travel increases x.
    ``speed_in`` only matters for files that carry a pass-through speed
    column; the pipeline itself never reads speeds.
    """

    distance_in: str = "meters"
    speed_in: str = "m/s"
    mile_marker_direction: str = "increasing"
    reference_marker: float = 0.0

    def __post_init__(self):
        if self.distance_in not in _DISTANCE_FACTORS:
            raise ValueError(f"unknown distance unit {self.distance_in!r}")
        if self.speed_in not in ("m/s", "mph"):
            raise ValueError(f"unknown speed unit {self.speed_in!r}")
        if self.mile_marker_direction not in ("increasing", "decreasing"):
            raise ValueError(f"unknown marker direction {self.mile_marker_direction!r}")
        if not math.isfinite(self.reference_marker):
            raise ValueError("reference_marker must be finite")

    def to_meters(self, position):
        unit = _DISTANCE_FACTORS[self.distance_in]
        if self.mile_marker_direction == "decreasing":
            return (self.reference_marker - position) * unit
        return (position - self.reference_marker) * unit

    def from_meters(self, x):
        unit = _DISTANCE_FACTORS[self.distance_in]
        if self.mile_marker_direction == "decreasing":
            return self.reference_marker - x / unit
        return x / unit + self.reference_marker


@dataclass(frozen=True)
class TrajectorySample:
    """One timestamped position of one vehicle, in internal units."""

    vehicle_id: str
    t: float  # seconds
    x: float  # meters, increasing downstream
    lane: int  # 1 = leftmost (HOV)

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.x)):
            raise ValueError("non-finite time or position")
        if self.lane < 1:
            raise ValueError("lane index must be >= 1")


@dataclass
class Fragment:
    """A contiguous run of one vehicle's samples in one lane.

    Times are strictly increasing. Samples are stored as parallel float64
    arrays; ``samples`` materializes them as TrajectorySample objects when
    object-level access is wanted.
    """

    vehicle_id: str
    lane: int
    t: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        self.t = np.ascontiguousarray(self.t, dtype=np.float64)
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        if self.t.ndim != 1 or self.t.shape != self.x.shape:
            raise ValueError("t and x must be 1-d arrays of equal length")
        if self.t.size == 0:
            raise ValueError("empty fragment")
        if not (np.isfinite(self.t).all() and np.isfinite(self.x).all()):
            raise ValueError("non-finite sample in fragment")
        if self.t.size > 1 and not (np.diff(self.t) > 0).all():
            raise ValueError("fragment times must be strictly increasing")
        if self.lane < 1:
            raise ValueError("lane index must be >= 1")

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def displacement(self) -> float:
        return float(self.x[-1] - self.x[0])

    @property
    def samples(self) -> list[TrajectorySample]:
        return [
            TrajectorySample(self.vehicle_id, float(ti), float(xi), self.lane)
            for ti, xi in zip(self.t, self.x)
        ]

    @classmethod
    def from_samples(cls, samples: Sequence[TrajectorySample]) -> "Fragment":
        samples = list(samples)
        if not samples:
            raise ValueError("empty fragment")
        vid, lane = samples[0].vehicle_id, samples[0].lane
        if any(s.vehicle_id != vid or s.lane != lane for s in samples):
            raise ValueError("samples must share vehicle_id and lane")
        return cls(vid, lane, np.array([s.t for s in samples]), np.array([s.x for s in samples]))


@dataclass
class StreamStats:
    """Counters filled in by stream_fragments."""

    rows: int = 0
    fragments: int = 0
    bad_rows: int = 0  # malformed/non-finite rows skipped (on_error="skip")
    duplicate_dropped: int = 0  # repeated timestamps collapsed (first kept)
    nonmonotonic_dropped: int = 0  # decreasing-t samples skipped


def parse_record(line: str, conv: UnitConvention, line_number: int | None = None,
                 path: str | None = None) -> TrajectorySample:
    """Parse one canonical CSV row or JSON-lines object into a sample.

    Positions are converted to internal meters via ``conv``. Malformed or
    non-finite rows raise ParseError carrying ``line_number``.
    """
    text = line.strip()
    if not text:
        raise ParseError("empty record", line_number, path)
    try:
        if text.startswith("{"):
            obj = json.loads(text)
            vid = str(obj["vehicle_id"])
            t = float(obj["timestamp_s"])
            pos = float(obj["position"])
            lane = int(obj["lane"])
        else:
            parts = text.split(",")
            if len(parts) < 4:
                raise ValueError(f"expected at least 4 fields, got {len(parts)}")
            vid = parts[0]
            t = float(parts[1])
            pos = float(parts[2])
            lane = int(parts[3])
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"malformed record ({exc})", line_number, path) from None
    if not (math.isfinite(t) and math.isfinite(pos)):
        raise ParseError("non-finite numeric field", line_number, path)
    if lane < 1:
        raise ParseError(f"lane index must be >= 1, got {lane}", line_number, path)
    return TrajectorySample(vid, t, conv.to_meters(pos), lane)


class _RunBuffer:
    """Collects one contiguous (vehicle_id, lane) run across chunk borders."""

    __slots__ = ("key", "t_parts", "x_parts")

    def __init__(self, key, t, x):
        self.key = key
        self.t_parts = [t]
        self.x_parts = [x]

    def extend(self, t, x):
        self.t_parts.append(t)
        self.x_parts.append(x)

    def arrays(self):
        if len(self.t_parts) == 1:
            return self.t_parts[0], self.x_parts[0]
        return np.concatenate(self.t_parts), np.concatenate(self.x_parts)


def _finalize_run(run: _RunBuffer, conv: UnitConvention, lane_filter, stats: StreamStats):
    vid, lane = run.key
    lane = int(lane)
    if lane_filter is not None and lane not in lane_filter:
        return None
    t, x = run.arrays()
    if t.size > 1:
        # keep a sample only if strictly later than everything kept before it
        run_max = np.maximum.accumulate(t)
        keep = np.empty(t.size, dtype=bool)
        keep[0] = True
        keep[1:] = t[1:] > run_max[:-1]
        if not keep.all():
            dropped = t[~keep]
            ndup = int(np.count_nonzero(dropped == run_max[:-1][~keep[1:]]))
            stats.duplicate_dropped += ndup
            stats.nonmonotonic_dropped += int(dropped.size - ndup)
            t = t[keep]
            x = x[keep]
    stats.fragments += 1
    return Fragment(str(vid), lane, t, conv.to_meters(x))


def _sniff_format(source) -> str:
    name = getattr(source, "name", source if isinstance(source, (str, Path)) else "")
    s = str(name)
    if s.endswith(".jsonl") or s.endswith(".ndjson"):
        return "jsonl"
    return "csv"


def stream_fragments(
    source,
    conv: UnitConvention = UnitConvention(),
    lane_filter: Iterable[int] | None = None,
    *,
    fmt: str | None = None,
    on_error: str = "raise",
    chunk_rows: int = DEFAULT_CHUNK_ROWS,
    byte_range: tuple[int, int] | None = None,
    stats: StreamStats | None = None,
) -> Iterator[Fragment]:
    """Stream fragments from a canonical CSV/JSON-lines source.

    ``source`` may be a path, an open text/binary file, or an iterable of
    lines. Peak memory is one chunk plus the largest fragment regardless of
    file size. ``byte_range`` restricts reading to a pre-aligned window from
    ``shard_ranges`` (CSV paths only). With ``on_error="skip"`` malformed
    rows are counted in ``stats.bad_rows`` and the fragment continues
    without them; the default raises ParseError at the offending line.
    """
    if on_error not in ("raise", "skip"):
        raise ValueError(f"on_error must be 'raise' or 'skip', not {on_error!r}")
    if stats is None:
        stats = StreamStats()
    if lane_filter is not None:
        lane_filter = frozenset(int(v) for v in lane_filter)
    if fmt is None:
        fmt = _sniff_format(source)
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown format {fmt!r}")

    if fmt == "csv" and (isinstance(source, (str, Path)) or hasattr(source, "read")):
        yield from _stream_csv(source, conv, lane_filter, on_error, chunk_rows, byte_range, stats)
    else:
        if byte_range is not None:
            raise ValueError("byte_range is only supported for CSV file sources")
        yield from _stream_lines(source, conv, lane_filter, on_error, fmt, stats)


def _stream_csv(source, conv, lane_filter, on_error, chunk_rows, byte_range, stats):
    path = str(source) if isinstance(source, (str, Path)) else getattr(source, "name", None)
    close_me = None
    if byte_range is not None:
        if not isinstance(source, (str, Path)):
            raise ValueError("byte_range requires a path source")
        start, stop = byte_range
        if start >= stop:
            return
        raw = open(source, "rb")
        close_me = raw
        raw.seek(start)
        handle = _BoundedReader(raw, stop - start)
        read_kwargs = dict(header=None, names=list(CSV_COLUMNS), usecols=range(4))
    else:
        handle = source
        read_kwargs = dict(usecols=list(CSV_COLUMNS))

    pending: _RunBuffer | None = None
    row_base = 0  # data rows already consumed (line = row + 2 for headered files)
    line_offset = 2 if byte_range is None else 1
    try:
        try:
            reader = pd.read_csv(
                handle,
                chunksize=chunk_rows,
                dtype={"vehicle_id": "category"},
                skip_blank_lines=False,
                float_precision="round_trip",
                **read_kwargs,
            )
        except (ValueError, pd.errors.ParserError) as exc:
            raise ParseError(f"unreadable CSV ({exc})", path=path) from None
        for chunk in _guarded(reader, path):
            # categorical ids: run detection on integer codes, no per-row
            # string objects
            id_col = chunk["vehicle_id"]
            codes = id_col.cat.codes.to_numpy()
            cats = id_col.cat.categories
            t = pd.to_numeric(chunk["timestamp_s"], errors="coerce").to_numpy(np.float64)
            x = pd.to_numeric(chunk["position"], errors="coerce").to_numpy(np.float64)
            ln = pd.to_numeric(chunk["lane"], errors="coerce").to_numpy(np.float64)
            n = codes.shape[0]
            ok = (
                np.isfinite(t)
                & np.isfinite(x)
                & np.isfinite(ln)
                & (ln == np.floor(ln))
                & (ln >= 1)
                & (codes >= 0)
            )
            if not ok.all():
                if on_error == "raise":
                    bad = int(np.flatnonzero(~ok)[0])
                    raise ParseError(
                        "malformed or non-finite record",
                        line_number=row_base + bad + line_offset,
                        path=path,
                    )
                stats.bad_rows += int(np.count_nonzero(~ok))
                codes, t, x, ln = codes[ok], t[ok], x[ok], ln[ok]
                n = codes.shape[0]
            row_base += chunk.shape[0]
            stats.rows += n
            if n == 0:
                continue
            lanes = ln.astype(np.int64)
            new_run = np.empty(n, dtype=bool)
            new_run[0] = True
            new_run[1:] = (codes[1:] != codes[:-1]) | (lanes[1:] != lanes[:-1])
            starts = np.flatnonzero(new_run)
            ends = np.append(starts[1:], n)
            for s, e in zip(starts, ends):
                key = (str(cats[codes[s]]), lanes[s])
                if s == 0 and pending is not None and pending.key == key:
                    pending.extend(t[s:e], x[s:e])
                    if e == n:
                        continue  # run may continue into the next chunk
                    frag = _finalize_run(pending, conv, lane_filter, stats)
                    pending = None
                    if frag is not None:
                        yield frag
                    continue
                if pending is not None:
                    frag = _finalize_run(pending, conv, lane_filter, stats)
                    pending = None
                    if frag is not None:
                        yield frag
                if e == n:
                    pending = _RunBuffer(key, t[s:e], x[s:e])
                else:
                    frag = _finalize_run(_RunBuffer(key, t[s:e], x[s:e]), conv, lane_filter, stats)
                    if frag is not None:
                        yield frag
        if pending is not None:
            frag = _finalize_run(pending, conv, lane_filter, stats)
            if frag is not None:
                yield frag
    finally:
        if close_me is not None:
            close_me.close()


def _guarded(reader, path):
    while True:
        try:
            chunk = next(reader)
        except StopIteration:
            return
        except (ValueError, pd.errors.ParserError) as exc:
            raise ParseError(f"unreadable CSV ({exc})", path=path) from None
        yield chunk


def _stream_lines(source, conv, lane_filter, on_error, fmt, stats):
    if isinstance(source, (str, Path)):
        handle = open(source, "r", encoding="utf-8")
        close_me = handle
        path = str(source)
    else:
        handle = source
        close_me = None
        path = getattr(source, "name", None)
    first_line = 1
    pending_key = None
    pending: list[TrajectorySample] = []

    def finish():
        run = _RunBuffer(
            pending_key,
            np.array([s.t for s in pending]),
            np.array([s.x for s in pending]),
        )
        # samples already in meters; identity conversion at finalize
        return _finalize_run(run, UnitConvention(), lane_filter, stats)

    try:
        for lineno, line in enumerate(handle, start=1):
            text = line.strip()
            if not text:
                continue
            if fmt == "csv" and lineno == first_line and text.lower().startswith("vehicle_id"):
                continue
            try:
                sample = parse_record(text, conv, lineno, path)
            except ParseError:
                if on_error == "raise":
                    raise
                stats.bad_rows += 1
                continue
            stats.rows += 1
            key = (sample.vehicle_id, sample.lane)
            if pending_key is None:
                pending_key = key
            elif key != pending_key:
                frag = finish()
                if frag is not None:
                    yield frag
                pending_key = key
                pending = []
            pending.append(sample)
        if pending:
            frag = finish()
            if frag is not None:
                yield frag
    finally:
        if close_me is not None:
            close_me.close()


class _BoundedReader(io.RawIOBase):
    """File-object view over the next ``limit`` bytes of ``raw``."""

    def __init__(self, raw, limit: int):
        self._raw = raw
        self._left = limit

    def readable(self):
        return True

    def read(self, size=-1):
        if self._left <= 0:
            return b""
        if size is None or size < 0 or size > self._left:
            size = self._left
        data = self._raw.read(size)
        self._left -= len(data)
        return data

    def readinto(self, b):
        data = self.read(len(b))
        b[: len(data)] = data
        return len(data)


def _line_start_at_or_after(f, offset: int, size: int) -> int:
    """Smallest line-start offset >= offset (size if none)."""
    if offset <= 0:
        return 0
    if offset >= size:
        return size
    f.seek(offset - 1)
    if f.read(1) == b"\n":
        return offset
    pos = offset
    while pos < size:
        block = f.read(1 << 16)
        if not block:
            break
        idx = block.find(b"\n")
        if idx >= 0:
            return min(pos + idx + 1, size)
        pos += len(block)
    return size


def _last_line_before(f, offset: int) -> bytes | None:
    """The full line ending at offset (which must be a line start), or None."""
    if offset <= 0:
        return None
    lo = offset - 1  # points at the '\n' (or last byte) of the previous line
    block = 1 << 12
    data = b""
    while lo > 0:
        start = max(0, lo - block)
        f.seek(start)
        data = f.read(lo - start) + data
        nl = data.rfind(b"\n")
        if nl >= 0:
            return data[nl + 1 :]
        if start == 0:
            return data
        lo = start
    return data if data else None


def _row_key(line: bytes) -> tuple[bytes, bytes] | None:
    parts = line.rstrip(b"\r\n").split(b",")
    if len(parts) < 4:
        return None
    return parts[0], parts[3]


def _group_aligned_offset(f, offset: int, size: int, header_len: int) -> int:
    """Advance a raw byte offset to the next fragment boundary.

    Deterministic in ``offset`` alone, so adjacent shards computed
    independently agree on their shared edge.
    """
    if offset <= header_len:
        return header_len
    pos = _line_start_at_or_after(f, offset, size)
    if pos >= size:
        return size
    prev = _last_line_before(f, pos)
    prev_key = _row_key(prev) if prev is not None else None
    if prev_key is None:
        return pos
    f.seek(pos)
    while pos < size:
        line = f.readline()
        if not line:
            return size
        if _row_key(line) != prev_key:
            return pos
        pos += len(line)
    return size


def shard_ranges(path, n_shards: int) -> list[tuple[int, int]]:
    """Split a canonical CSV into fragment-aligned byte ranges.

    Every fragment falls entirely inside exactly one range; empty ranges are
    dropped. Streaming each range and merging the per-range accumulations is
    equivalent to a single pass over the whole file.
    """
    if n_shards < 1:
        raise ValueError("n_shards must be >= 1")
    size = os.path.getsize(path)
    with open(path, "rb") as f:
        header = f.readline()
        header_len = len(header)
        cuts = [header_len]
        for k in range(1, n_shards):
            cuts.append(_group_aligned_offset(f, k * size // n_shards, size, header_len))
        cuts.append(size)
    return [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if a < b]


def _format_float(v: float) -> str:
    return repr(float(v))


def write_fragments_csv(fragments: Iterable[Fragment], dest, conv: UnitConvention | None = None) -> int:
    """Write fragments in the canonical CSV layout; returns rows written.

    With ``conv=None`` positions are written in internal meters (exact
    round-trip). Supplying a convention converts back to file units, which
    is lossy at float precision.
    """
    rows = 0

    def _write(f):
        nonlocal rows
        f.write(CSV_HEADER + "\n")
        for frag in fragments:
            pos = frag.x if conv is None else conv.from_meters(frag.x)
            vid = frag.vehicle_id
            lane = frag.lane
            for ti, xi in zip(frag.t.tolist(), pos.tolist()):
                f.write(f"{vid},{_format_float(ti)},{_format_float(xi)},{lane}\n")
                rows += 1

    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="\n") as f:
            _write(f)
    else:
        _write(dest)
    return rows


def write_fragments_jsonl(fragments: Iterable[Fragment], dest, conv: UnitConvention | None = None) -> int:
    """JSON-lines twin of write_fragments_csv."""
    rows = 0

    def _write(f):
        nonlocal rows
        for frag in fragments:
            pos = frag.x if conv is None else conv.from_meters(frag.x)
            for ti, xi in zip(frag.t.tolist(), pos.tolist()):
                f.write(
                    json.dumps(
                        {
                            "vehicle_id": frag.vehicle_id,
                            "timestamp_s": ti,
                            "position": xi,
                            "lane": frag.lane,
                        },
                        separators=(",", ":"),
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
