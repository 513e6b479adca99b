import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vtpipe.errors import ParseError
from vtpipe.trajio import (
    Fragment,
    StreamStats,
    TrajectorySample,
    UnitConvention,
    parse_record,
    shard_ranges,
    stream_fragments,
    write_fragments_csv,
    write_fragments_jsonl,
)

MILES_DECREASING = UnitConvention(
    distance_in="miles", mile_marker_direction="decreasing", reference_marker=62.7
)


class TestParseRecord:
    def test_reference_marker_maps_to_zero(self):
        s = parse_record("v1,0.0,62.7,1", MILES_DECREASING)
        assert s.x == 0.0
        assert s.t == 0.0
        assert s.lane == 1

    def test_mile_conversion(self):
        s = parse_record("v1,4.0,62.68,1", MILES_DECREASING)
        assert s.x == pytest.approx(0.02 * 1609.344, rel=1e-9)

    def test_malformed_field_carries_line_number(self):
        with pytest.raises(ParseError) as exc:
            parse_record("v1,abc,62.7,1", MILES_DECREASING, line_number=17)
        assert exc.value.line_number == 17

    def test_non_finite_rejected(self):
        with pytest.raises(ParseError):
            parse_record("v1,nan,62.7,1", MILES_DECREASING)
        with pytest.raises(ParseError):
            parse_record("v1,1.0,inf,1", MILES_DECREASING)

    def test_jsonl_record(self):
        s = parse_record('{"vehicle_id": "a", "timestamp_s": 2.5, "position": 10.0, "lane": 3}',
                         UnitConvention())
        assert (s.vehicle_id, s.t, s.x, s.lane) == ("a", 2.5, 10.0, 3)

    def test_extra_columns_ignored(self):
        s = parse_record("v1,1.0,5.0,2,sedan,4.5", UnitConvention())
        assert s.lane == 2

    def test_bad_lane(self):
        with pytest.raises(ParseError):
            parse_record("v1,1.0,5.0,0", UnitConvention())

    def test_feet_increasing(self):
        conv = UnitConvention(distance_in="feet")
        s = parse_record("v1,0.0,100.0,1", conv)
        assert s.x == pytest.approx(30.48)


def _csv(rows):
    return io.StringIO("vehicle_id,timestamp_s,position,lane\n" + "\n".join(rows) + "\n")


class TestStreamFragments:
    def test_two_vehicles_four_rows(self):
        frags = list(stream_fragments(_csv(["v1,0,0,1", "v1,1,10,1", "v2,0,5,2", "v2,1,15,2"])))
        assert [(f.vehicle_id, f.lane, len(f)) for f in frags] == [("v1", 1, 2), ("v2", 2, 2)]

    def test_reappearing_vehicle_starts_new_fragment(self):
        frags = list(stream_fragments(
            _csv(["v1,0,0,1", "v1,1,10,1", "v2,0,5,1", "v1,5,20,1", "v1,6,30,1"])
        ))
        assert [f.vehicle_id for f in frags] == ["v1", "v2", "v1"]
        assert [len(f) for f in frags] == [2, 1, 2]

    def test_lane_change_splits_fragment(self):
        frags = list(stream_fragments(_csv(["v1,0,0,1", "v1,1,10,1", "v1,2,20,2", "v1,3,30,2"])))
        assert [(f.lane, len(f)) for f in frags] == [(1, 2), (2, 2)]

    def test_duplicate_timestamps_collapsed_keep_first(self):
        stats = StreamStats()
        frags = list(stream_fragments(
            _csv(["v1,0,0,1", "v1,0,99,1", "v1,1,10,1"]), stats=stats
        ))
        assert np.array_equal(frags[0].t, [0.0, 1.0])
        assert np.array_equal(frags[0].x, [0.0, 10.0])
        assert stats.duplicate_dropped == 1

    def test_decreasing_time_skipped_and_counted(self):
        stats = StreamStats()
        frags = list(stream_fragments(
            _csv(["v1,0,0,1", "v1,2,20,1", "v1,1,15,1", "v1,3,30,1"]), stats=stats
        ))
        assert np.array_equal(frags[0].t, [0.0, 2.0, 3.0])
        assert stats.nonmonotonic_dropped == 1

    def test_lane_filter(self):
        frags = list(stream_fragments(
            _csv(["v1,0,0,1", "v1,1,10,1", "v2,0,5,2", "v2,1,15,2"]), lane_filter={2}
        ))
        assert [f.vehicle_id for f in frags] == ["v2"]

    def test_malformed_row_raises_with_line(self):
        with pytest.raises(ParseError) as exc:
            list(stream_fragments(_csv(["v1,0,0,1", "v1,oops,10,1"])))
        assert exc.value.line_number == 3

    def test_malformed_row_skippable(self):
        stats = StreamStats()
        frags = list(stream_fragments(
            _csv(["v1,0,0,1", "v1,oops,10,1", "v1,2,20,1"]), on_error="skip", stats=stats
        ))
        assert stats.bad_rows == 1
        assert np.array_equal(frags[0].t, [0.0, 2.0])

    def test_jsonl_roundtrip(self, tmp_path):
        frag = Fragment("v9", 2, np.array([0.0, 0.5, 1.0]), np.array([0.0, 12.5, 25.0]))
        path = tmp_path / "data.jsonl"
        write_fragments_jsonl([frag], path)
        out = list(stream_fragments(path))
        assert len(out) == 1
        assert np.array_equal(out[0].t, frag.t)
        assert np.array_equal(out[0].x, frag.x)

    def test_line_iterable_source(self):
        rows = ["v1,0,0,1", "v1,1,10,1"]
        frags = list(stream_fragments(iter(rows), fmt="csv"))
        assert len(frags) == 1

    def test_chunk_boundary_continuity(self, tmp_path):
        # one fragment spanning many parser chunks must come out whole
        n = 5000
        path = tmp_path / "long.csv"
        with open(path, "w") as f:
            f.write("vehicle_id,timestamp_s,position,lane\n")
            for i in range(n):
                f.write(f"vv,{i * 0.04},{i * 1.0},1\n")
        frags = list(stream_fragments(path, chunk_rows=512))
        assert len(frags) == 1
        assert len(frags[0]) == n


class TestFragment:
    def test_requires_strictly_increasing(self):
        with pytest.raises(ValueError):
            Fragment("v", 1, np.array([0.0, 0.0]), np.array([0.0, 1.0]))

    def test_requires_finite(self):
        with pytest.raises(ValueError):
            Fragment("v", 1, np.array([0.0, np.nan]), np.array([0.0, 1.0]))

    def test_samples_view(self):
        frag = Fragment("v", 1, np.array([0.0, 1.0]), np.array([2.0, 3.0]))
        samples = frag.samples
        assert samples == [TrajectorySample("v", 0.0, 2.0, 1), TrajectorySample("v", 1.0, 3.0, 1)]
        assert Fragment.from_samples(samples).duration == 1.0


fragments_strategy = st.lists(
    st.tuples(
        st.floats(min_value=0.0, max_value=1e4, allow_nan=False),
        st.floats(min_value=-1e4, max_value=1e5, allow_nan=False),
    ),
    min_size=2,
    max_size=40,
).map(
    lambda pts: Fragment(
        "h",
        1,
        np.sort(np.array([p[0] for p in pts])) + np.arange(len(pts)) * 1e-3,
        np.array([p[1] for p in pts]),
    )
)


@settings(max_examples=80, deadline=None)
@given(fragments_strategy)
def test_csv_roundtrip_exact(frag):
    # meters-identity writer round-trips bit exactly (well under 1e-12)
    buf = io.StringIO()
    write_fragments_csv([frag], buf)
    buf.seek(0)
    out = list(stream_fragments(buf, fmt="csv"))
    assert len(out) == 1
    assert np.array_equal(out[0].t, frag.t)
    assert np.array_equal(out[0].x, frag.x)
    assert out[0].vehicle_id == frag.vehicle_id


@settings(max_examples=40, deadline=None)
@given(fragments_strategy)
def test_emitted_fragments_strictly_increasing(frag):
    buf = io.StringIO()
    write_fragments_csv([frag], buf)
    buf.seek(0)
    for out in stream_fragments(buf, fmt="csv"):
        assert (np.diff(out.t) > 0).all()


def test_unit_roundtrip_miles(tmp_path):
    frag = Fragment("v", 1, np.array([0.0, 1.0, 2.0]), np.array([0.0, 30.0, 61.5]))
    path = tmp_path / "mi.csv"
    write_fragments_csv([frag], path, conv=MILES_DECREASING)
    out = list(stream_fragments(path, conv=MILES_DECREASING))
    np.testing.assert_allclose(out[0].x, frag.x, atol=1e-9)


class TestShardRanges:
    def _write(self, tmp_path, groups):
        path = tmp_path / "s.csv"
        with open(path, "w") as f:
            f.write("vehicle_id,timestamp_s,position,lane\n")
            for vid, n in groups:
                for i in range(n):
                    f.write(f"{vid},{i * 0.1},{i * 2.0},1\n")
        return path

    def test_union_of_shards_equals_single_pass(self, tmp_path):
        path = self._write(tmp_path, [(f"v{i}", 7 + (i * 13) % 23) for i in range(97)])
        whole = list(stream_fragments(path))
        for n_shards in (1, 2, 3, 4, 7):
            ranges = shard_ranges(path, n_shards)
            parts = [f for r in ranges for f in stream_fragments(path, byte_range=r)]
            assert len(parts) == len(whole)
            for a, b in zip(whole, parts):
                assert a.vehicle_id == b.vehicle_id
                assert np.array_equal(a.t, b.t)
                assert np.array_equal(a.x, b.x)

    def test_ranges_partition_data_bytes(self, tmp_path):
        path = self._write(tmp_path, [("a", 5), ("b", 5), ("c", 5)])
        ranges = shard_ranges(path, 3)
        for (a0, a1), (b0, b1) in zip(ranges[:-1], ranges[1:]):
            assert a1 == b0
        assert ranges[-1][1] == path.stat().st_size

    def test_more_shards_than_groups(self, tmp_path):
        path = self._write(tmp_path, [("solo", 50)])
        ranges = shard_ranges(path, 8)
        parts = [f for r in ranges for f in stream_fragments(path, byte_range=r)]
        assert len(parts) == 1
        assert len(parts[0]) == 50
