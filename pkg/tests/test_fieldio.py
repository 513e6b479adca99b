import numpy as np
import pytest

from vtpipe.edie import GridSpec
from vtpipe.errors import FieldFormatError, GridMismatchError
from vtpipe.fieldio import check_grid_compatible, format_header, read_field, read_header, write_field

GRID = GridSpec(t0=10.0, dt=4.0, nt=3, x0=-50.0, dx=32.18688, nx=4, c_wave=-5.36448)


def sample_values():
    v = np.arange(12, dtype=np.float64).reshape(3, 4) * 1.7
    v[1, 2] = np.nan
    return v


def test_header_key_order():
    head = format_header(GRID, "speed")
    assert head.startswith("# t0=")
    keys = [tok.split("=")[0] for tok in head[2:].split()]
    assert keys == ["t0", "dt", "nt", "x0", "dx", "nx", "cwave", "kind"]


def test_round_trip_exact(tmp_path):
    path = tmp_path / "f.field"
    values = sample_values()
    write_field(path, GRID, values, "speed")
    grid, back, kind = read_field(path)
    assert grid == GRID
    assert kind == "speed"
    np.testing.assert_array_equal(back, values)


def test_round_trip_byte_identical(tmp_path):
    p1, p2 = tmp_path / "a.field", tmp_path / "b.field"
    write_field(p1, GRID, sample_values(), "smoothed")
    write_field(p2, GRID, sample_values(), "smoothed")
    assert p1.read_bytes() == p2.read_bytes()


def test_nan_serialized_as_nan_token(tmp_path):
    path = tmp_path / "f.field"
    write_field(path, GRID, sample_values(), "speed")
    body = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    assert body[1].split(",")[2] == "nan"


def test_unknown_kind_rejected_on_write(tmp_path):
    with pytest.raises(ValueError):
        write_field(tmp_path / "f.field", GRID, sample_values(), "bogus")


def test_unknown_kind_rejected_on_read(tmp_path):
    path = tmp_path / "f.field"
    write_field(path, GRID, sample_values(), "speed")
    text = path.read_text().replace("kind=speed", "kind=bogus")
    path.write_text(text)
    with pytest.raises(FieldFormatError, match="kind"):
        read_header(path)


def test_shape_mismatch_detected(tmp_path):
    path = tmp_path / "f.field"
    write_field(path, GRID, sample_values(), "speed")
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")  # drop one row
    with pytest.raises(FieldFormatError, match="shape"):
        read_field(path)


def test_expected_kind_enforced(tmp_path):
    path = tmp_path / "f.field"
    write_field(path, GRID, sample_values(), "ttt")
    with pytest.raises(FieldFormatError, match="expected kind"):
        read_field(path, expect_kind="speed")


def test_grid_compat_check(tmp_path):
    path = tmp_path / "f.field"
    write_field(path, GRID, sample_values(), "speed")
    check_grid_compatible(path, GRID)
    other = GridSpec(t0=10.0, dt=4.0, nt=3, x0=-50.0, dx=30.0, nx=4, c_wave=-5.36448)
    with pytest.raises(GridMismatchError):
        check_grid_compatible(path, other)


def test_header_values_full_precision(tmp_path):
    path = tmp_path / "f.field"
    write_field(path, GRID, sample_values(), "speed")
    grid, _ = read_header(path)
    assert grid.dx == GRID.dx
    assert grid.c_wave == GRID.c_wave
