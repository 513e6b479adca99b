import numpy as np
import pytest

from vtpipe import asm, edie, synth

DIP_KW = dict(
    kind="traveling_gaussian_dip",
    v0=30.0,
    dip_amplitude=20.0,
    dip_center=3000.0,
    dip_width=200.0,
    wave_speed=-5.0,
    t_min=0.0,
    t_max=600.0,
    x_min=0.0,
    x_max=4000.0,
)

# smoothing used for dip scenarios: congested pass aligned with the dip's
# wave, kernel tight enough to keep the dip's depth
DIP_ASM = dict(c_free=22.2, c_cong=-5.0, sigma=100.0, tau=5.0)


def dip_grid(c_wave: float = -5.0) -> edie.GridSpec:
    span_t = DIP_KW["t_max"] - DIP_KW["t_min"]
    xs_lo = DIP_KW["x_min"] - max(c_wave, 0.0) * span_t
    xs_hi = DIP_KW["x_max"] - min(c_wave, 0.0) * span_t
    nx = int(np.ceil((xs_hi - xs_lo) / edie.DEFAULT_DX))
    return edie.GridSpec(
        t0=DIP_KW["t_min"],
        dt=edie.DEFAULT_DT,
        nt=int(np.ceil(span_t / edie.DEFAULT_DT)),
        x0=xs_lo,
        dx=edie.DEFAULT_DX,
        nx=nx,
        c_wave=c_wave,
    )


@pytest.fixture(scope="session")
def dip_spec():
    return synth.AnalyticFieldSpec(**DIP_KW)


@pytest.fixture(scope="session")
def dip_fleet(dip_spec):
    return synth.generate_fleet(dip_spec, spawn_interval=2.0)


@pytest.fixture(scope="session")
def dip_raw(dip_fleet):
    grid = dip_grid()
    return edie.speed_field(edie.accumulate(dip_fleet, grid))


@pytest.fixture(scope="session")
def dip_smoothed(dip_raw):
    return asm.smooth(dip_raw, asm.AsmParams(**DIP_ASM))


@pytest.fixture(scope="session")
def const_spec():
    return synth.AnalyticFieldSpec(
        kind="constant", v0=25.0, t_min=0.0, t_max=1200.0, x_min=0.0, x_max=4000.0
    )


def constant_smoothed(v0=20.0, nt=60, nx=40, dt=4.0, dx=edie.DEFAULT_DX, c_wave=0.0):
    """A uniform smoothed field for integrator tests."""
    grid = edie.GridSpec(t0=0.0, dt=dt, nt=nt, x0=0.0, dx=dx, nx=nx, c_wave=c_wave)
    return asm.SmoothedField(grid, np.full(grid.shape, v0), np.zeros(grid.shape), asm.AsmParams())
