"""Macroscopic speed fields and virtual trajectories from vehicle-trajectory files.

Pipeline stages: stream fragments from canonical CSV/JSONL (trajio),
accumulate generalized TTT/TTD measurements on sheared space-time cells
(edie), reconstruct a gap-free speed field with the two-characteristic
adaptive smoother (asm), integrate virtual trajectories through it (vtgen),
and aggregate travel-time/speed-variability statistics (analytics). synth
provides analytic oracle fields and fleets for verification; cli wires the
stages into file-mediated subcommands.
"""

from .asm import AsmParams, SmoothedField, smooth
from .edie import GridSpec, MacroField, RawSpeedField, accumulate, merge, speed_field
from .synth import AnalyticFieldSpec, analytic_speed, generate_fleet, reference_trajectory
from .trajio import Fragment, TrajectorySample, UnitConvention, stream_fragments
from .vtgen import VirtualTrajectory, departure_sweep, integrate, sample_speed

__version__ = "0.1.0"

__all__ = [
    "AnalyticFieldSpec",
    "AsmParams",
    "Fragment",
    "GridSpec",
    "MacroField",
    "RawSpeedField",
    "SmoothedField",
    "TrajectorySample",
    "UnitConvention",
    "VirtualTrajectory",
    "accumulate",
    "analytic_speed",
    "departure_sweep",
    "generate_fleet",
    "integrate",
    "merge",
    "reference_trajectory",
    "sample_speed",
    "smooth",
    "speed_field",
    "stream_fragments",
    "__version__",
]
