"""Root raised-cosine pulse spectrum and effective bandwidth."""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from utils.logging import get_logger

# Setup logger
logger = get_logger("waveform")


@dataclass(frozen=True)
class PulseSpec:
    """Root raised-cosine pulse described by its occupied spectrum.

    Attributes:
        bandwidth: Total occupied two-sided bandwidth B in Hz; |P(f)|^2 is zero beyond B/2.
        rolloff: Roll-off factor in [0, 1].
        unit_energy: When true the power spectrum integrates to one.
    """

    bandwidth: float
    rolloff: float = 0.6
    unit_energy: bool = True

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError(f"Bandwidth must be positive, got {self.bandwidth}")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError(f"Roll-off must lie in [0, 1], got {self.rolloff}")

    @property
    def symbol_rate(self) -> float:
        return self.bandwidth / (1.0 + self.rolloff)

    @property
    def flat_edge(self) -> float:
        """Upper edge of the flat region, (1 - rolloff) * Rs / 2."""
        return (1.0 - self.rolloff) * self.symbol_rate / 2.0

    @property
    def band_edge(self) -> float:
        return self.bandwidth / 2.0


def rrc_power_spectrum(f, spec: PulseSpec):
    """Raised-cosine power spectrum |P(f)|^2 of a root raised-cosine pulse.

    Accepts a scalar or an array of frequencies (Hz) and returns the same shape.
    The flat region has height (1 + rolloff) / B so the spectrum has unit energy.
    """
    scalar = np.ndim(f) == 0
    freq = np.abs(np.atleast_1d(np.asarray(f, dtype=float)))
    rs = spec.symbol_rate
    height = 1.0 / rs if spec.unit_energy else 1.0
    f1 = spec.flat_edge

    out = np.zeros_like(freq)
    out[freq <= f1] = height
    if spec.rolloff > 0:
        taper = (freq > f1) & (freq <= spec.band_edge)
        phase = math.pi / (spec.rolloff * rs) * (freq[taper] - f1)
        out[taper] = 0.5 * height * (1.0 + np.cos(phase))
    if scalar:
        return float(out[0])
    return out


def band_segments(spec: PulseSpec) -> list[tuple[float, float]]:
    """Pieces of [-B/2, B/2] on which the spectrum is smooth."""
    f1, edge = spec.flat_edge, spec.band_edge
    if spec.rolloff == 0:
        return [(-edge, edge)]
    if f1 == 0:
        # full roll-off: the cosine taper meets itself at f = 0
        return [(-edge, 0.0), (0.0, edge)]
    return [(-edge, -f1), (-f1, f1), (f1, edge)]


def _half_band_moment(spec: PulseSpec, order: int) -> float:
    total = 0.0
    for lo, hi in band_segments(spec):
        if hi <= 0:
            continue
        lo = max(lo, 0.0)
        value, _ = integrate.quad(
            lambda f: f**order * rrc_power_spectrum(f, spec),
            lo,
            hi,
            epsabs=0.0,
            epsrel=1e-12,
            limit=200,
        )
        total += value
    return 2.0 * total


def spectrum_energy(spec: PulseSpec) -> float:
    """Numerical integral of |P(f)|^2 over the occupied band."""
    return _half_band_moment(spec, 0)


@lru_cache(maxsize=64)
def effective_bandwidth(spec: PulseSpec) -> float:
    """Effective (RMS) bandwidth beta = sqrt(int f^2 |P|^2 df / int |P|^2 df) in Hz."""
    beta = math.sqrt(_half_band_moment(spec, 2) / _half_band_moment(spec, 0))
    logger.debug(
        f"Effective bandwidth for B={spec.bandwidth:.4g} Hz, rolloff={spec.rolloff}: {beta:.6e} Hz"
    )
    return beta


def effective_bandwidth_closed_form(spec: PulseSpec) -> float:
    """beta^2 = Rs^2 (1/12 + rolloff^2 (1/4 - 2/pi^2)) for the raised-cosine spectrum."""
    rs = spec.symbol_rate
    a = spec.rolloff
    return rs * math.sqrt(1.0 / 12.0 + a * a * (0.25 - 2.0 / math.pi**2))
