import math

import numpy as np
import pytest

from vtpipe.synth import (
    AnalyticFieldSpec,
    analytic_speed,
    generate_fleet,
    reference_path,
    reference_trajectory,
)

DIP = dict(
    kind="traveling_gaussian_dip",
    v0=30.0,
    dip_amplitude=20.0,
    dip_center=2000.0,
    dip_width=200.0,
    wave_speed=-5.0,
    t_min=0.0,
    t_max=1200.0,
    x_min=0.0,
    x_max=4000.0,
)


class TestSpec:
    def test_speed_must_stay_positive(self):
        with pytest.raises(ValueError):
            AnalyticFieldSpec(**{**DIP, "dip_amplitude": 30.0})

    def test_width_positive(self):
        with pytest.raises(ValueError):
            AnalyticFieldSpec(**{**DIP, "dip_width": 0.0})

    def test_domain_nondegenerate(self):
        with pytest.raises(ValueError):
            AnalyticFieldSpec(**{**DIP, "t_max": 0.0})


class TestAnalyticSpeed:
    def test_constant_everywhere(self):
        spec = AnalyticFieldSpec(kind="constant", v0=25.0, t_max=10.0, x_max=10.0)
        assert analytic_speed(spec, 3.0, 7.0) == 25.0
        arr = analytic_speed(spec, np.zeros(4), np.arange(4.0))
        np.testing.assert_array_equal(arr, 25.0)

    def test_dip_center_at_t0(self):
        spec = AnalyticFieldSpec(**DIP)
        assert analytic_speed(spec, 0.0, 2000.0) == pytest.approx(10.0, abs=1e-12)

    def test_dip_travels_with_wave(self):
        # at t=100 the center sits at 2000 - 5*100 = 1500
        spec = AnalyticFieldSpec(**DIP)
        assert analytic_speed(spec, 100.0, 1500.0) == pytest.approx(10.0, abs=1e-12)
        assert analytic_speed(spec, 100.0, 1500.0 + 200.0) == pytest.approx(
            30.0 - 20.0 * math.exp(-0.5), rel=1e-12
        )


class TestGenerateFleet:
    def test_constant_field_travel_time(self):
        spec = AnalyticFieldSpec(kind="constant", v0=25.0, t_min=0, t_max=400, x_min=0, x_max=4000)
        fleet = generate_fleet(spec, spawn_interval=50.0)
        complete = [f for f in fleet if f.x[-1] >= 4000.0]
        assert complete
        for frag in complete:
            assert frag.duration == pytest.approx(160.0, abs=1e-9)

    def test_fragments_strictly_increasing(self):
        fleet = generate_fleet(AnalyticFieldSpec(**DIP), spawn_interval=60.0)
        assert fleet
        for frag in fleet:
            assert (np.diff(frag.t) > 0).all()

    def test_step_halving_converged(self):
        spec = AnalyticFieldSpec(**{**DIP, "t_max": 300.0})
        a = generate_fleet(spec, spawn_interval=100.0, fine_step=0.02)
        b = generate_fleet(spec, spawn_interval=100.0, fine_step=0.01)
        for fa, fb in zip(a, b):
            n = min(len(fa), len(fb))
            assert np.abs(fa.x[:n] - fb.x[:n]).max() < 1e-6

    def test_output_rate_is_25hz(self):
        fleet = generate_fleet(AnalyticFieldSpec(**DIP), spawn_interval=200.0)
        dt = np.diff(fleet[0].t)
        np.testing.assert_allclose(dt, 0.04, rtol=1e-9)

    def test_fine_step_cap(self):
        with pytest.raises(ValueError):
            generate_fleet(AnalyticFieldSpec(**DIP), spawn_interval=100.0, fine_step=0.2)


class TestReferenceTrajectory:
    def test_constant_field_linear(self):
        spec = AnalyticFieldSpec(kind="constant", v0=20.0, t_min=0, t_max=300, x_min=0, x_max=4000)
        ref = reference_trajectory(spec, 0.0, 0.0)
        np.testing.assert_allclose(ref.p, 20.0 * ref.t, rtol=1e-12, atol=1e-9)
        assert ref.complete
        assert ref.travel_time == pytest.approx(200.0, abs=1e-9)

    def test_min_speed_when_crossing_dip_core(self):
        spec = AnalyticFieldSpec(**DIP)
        ref = reference_trajectory(spec, 0.0, 0.0, fine_step=0.005)
        assert ref.complete
        # dense re-sampling of the analytic field along the (interpolated)
        # path pins the pointwise minimum at v0 - A
        t_dense = np.arange(ref.t[0], ref.t[-1], 1e-3)
        p_dense = np.interp(t_dense, ref.t, ref.p)
        v_dense = analytic_speed(spec, t_dense, p_dense)
        assert float(np.min(v_dense)) == pytest.approx(10.0, abs=1e-6)

    def test_departure_at_t_max_is_empty_motion(self):
        spec = AnalyticFieldSpec(**DIP)
        ref = reference_trajectory(spec, spec.t_max, 0.0)
        assert len(ref) == 1
        assert ref.travel_time == 0.0
        assert not ref.complete

    def test_reference_path_arbitrary_callable(self):
        ref = reference_path(lambda t, x: 10.0, 5.0, 0.0, fine_step=0.02, t_max=100.0, x_end=500.0)
        assert ref.complete
        assert ref.travel_time == pytest.approx(50.0, rel=1e-12)
