"""Unit conversions. All internal quantities are SI (meters, seconds, m/s).

Config-level mph / km/h / vph values are converted exactly once, here, at
build time.
"""

MPH_TO_MS = 0.44704  # exact by definition (1 mile = 1609.344 m)
FT_TO_M = 0.3048


def mph_to_ms(mph: float) -> float:
    return mph * MPH_TO_MS


def kmh_to_ms(kmh: float) -> float:
    return kmh / 3.6


def ft_to_m(ft: float) -> float:
    return ft * FT_TO_M


def vph_to_rate(vph: float) -> float:
    """Vehicles/hour to vehicles/second."""
    return vph / 3600.0
