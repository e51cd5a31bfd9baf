import math

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s
BOLTZMANN = 1.380649e-23  # J/K


def db_to_linear(value_db: float) -> float:
    """Convert a power ratio in dB to linear scale."""
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    """Convert a linear power ratio to dB. Non-positive input is rejected."""
    if value <= 0:
        raise ValueError(f"Cannot express non-positive power ratio {value} in dB")
    return 10.0 * math.log10(value)


def dbm_to_watts(value_dbm: float) -> float:
    return db_to_linear(value_dbm) * 1e-3


def wavelength(frequency_hz: float) -> float:
    if frequency_hz <= 0:
        raise ValueError(f"Frequency must be positive, got {frequency_hz}")
    return SPEED_OF_LIGHT / frequency_hz


def to_radians(value: float, unit: str) -> float:
    """Convert an angle given with an explicit unit ("deg" or "rad") to radians."""
    if unit == "rad":
        return float(value)
    if unit == "deg":
        return math.radians(value)
    raise ValueError(f"Unknown angle unit {unit!r}; expected 'deg' or 'rad'")


def wrap_angle(value):
    """Normalize an angle (or array of angles) into [0, 2*pi)."""
    wrapped = np.mod(value, 2.0 * np.pi)
    # np.mod can return exactly 2*pi for tiny negative inputs
    wrapped = np.where(wrapped >= 2.0 * np.pi, 0.0, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped
