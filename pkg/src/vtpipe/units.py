"""Unit constants and conversions.

All internal computation is SI (meters, seconds, m/s); miles, mph and
minutes exist only at I/O boundaries.
"""

METERS_PER_MILE = 1609.344
METERS_PER_FOOT = 0.3048
SECONDS_PER_MINUTE = 60.0

# 1 m/s = 3600/1609.344 mph = 2.23693629... mph
MPH_PER_MPS = 3600.0 / METERS_PER_MILE


def mps_to_mph(v):
    return v * MPH_PER_MPS


def mph_to_mps(v):
    return v / MPH_PER_MPS


def kmh_to_mps(v):
    return v / 3.6


def seconds_to_minutes(t):
    return t / SECONDS_PER_MINUTE
