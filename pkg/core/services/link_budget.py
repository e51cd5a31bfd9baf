"""Path loss, link feasibility and per-element-pair SNR.

The SNR returned by ``link_snr`` is a single element pair's SNR. Array gains
are carried explicitly by the FIM blocks and must not be folded in here.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from services.waveform import PulseSpec, effective_bandwidth
from utils.units import BOLTZMANN, db_to_linear, dbm_to_watts, wavelength

OXYGEN_L0_60GHZ = 10.0**0.0017  # per-meter absorption base at 60 GHz


class PathLossKind(str, Enum):
    """Supported propagation models."""

    FREE_SPACE = "free_space"
    FREE_SPACE_ABSORPTION = "free_space_absorption"
    TWO_RAY = "two_ray"
    TWO_RAY_ABSORPTION = "two_ray_absorption"
    TWO_RAY_BREAKPOINT = "two_ray_breakpoint"

    @property
    def is_two_ray(self) -> bool:
        """Ground-reflection models, whose gain depends on the antenna heights."""
        return self in (PathLossKind.TWO_RAY, PathLossKind.TWO_RAY_ABSORPTION, PathLossKind.TWO_RAY_BREAKPOINT)

    @property
    def has_absorption(self) -> bool:
        return self in (PathLossKind.FREE_SPACE_ABSORPTION, PathLossKind.TWO_RAY_ABSORPTION)

    def without_absorption(self) -> "PathLossKind":
        return {
            PathLossKind.FREE_SPACE_ABSORPTION: PathLossKind.FREE_SPACE,
            PathLossKind.TWO_RAY_ABSORPTION: PathLossKind.TWO_RAY,
        }.get(self, self)


@dataclass(frozen=True)
class PathLossModel:
    """Propagation model with its parameters.

    Attributes:
        kind: Which propagation model to apply.
        l0: Per-meter absorption base; the loss factor over d meters is l0 ** -d.
        reflection_coefficient: Ground reflection coefficient of the two-ray model.
    """

    kind: PathLossKind = PathLossKind.FREE_SPACE
    l0: float = OXYGEN_L0_60GHZ
    reflection_coefficient: complex = -1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PathLossKind(self.kind))
        if self.l0 < 1.0:
            raise ValueError(f"Absorption base L0 must be >= 1, got {self.l0}")


@dataclass(frozen=True)
class LinkGeometry:
    distance: float
    h_tx: float = 0.0
    h_rx: float = 0.0

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError(f"Link distance must be positive, got {self.distance}")
        if self.h_tx < 0 or self.h_rx < 0:
            raise ValueError(f"Antenna heights must be non-negative, got {self.h_tx}, {self.h_rx}")

    @property
    def direct_length(self) -> float:
        return math.hypot(self.distance, self.h_tx - self.h_rx)

    @property
    def reflected_length(self) -> float:
        return math.hypot(self.distance, self.h_tx + self.h_rx)


@dataclass(frozen=True)
class RadioConfig:
    """Radio front-end parameters shared by every node.

    Attributes:
        f_c: Carrier frequency in Hz.
        tx_power_dbm: Transmit power in dBm.
        noise_figure_db: Receiver noise figure in dB.
        system_temp: System temperature in K.
        pulse: Pulse shape; its occupied bandwidth sets the noise bandwidth.
    """

    f_c: float = 60e9
    tx_power_dbm: float = 20.0
    noise_figure_db: float = 4.0
    system_temp: float = 300.0
    pulse: PulseSpec = field(default_factory=lambda: PulseSpec(bandwidth=2.16e9, rolloff=0.6))

    def __post_init__(self):
        if self.f_c <= 0:
            raise ValueError(f"Carrier frequency must be positive, got {self.f_c}")
        if self.system_temp <= 0:
            raise ValueError(f"System temperature must be positive, got {self.system_temp}")

    @property
    def wavelength(self) -> float:
        return wavelength(self.f_c)

    @property
    def bandwidth(self) -> float:
        return self.pulse.bandwidth

    @property
    def beta(self) -> float:
        return effective_bandwidth(self.pulse)

    @property
    def noise_density(self) -> float:
        """N0 = k T F in W/Hz."""
        return BOLTZMANN * self.system_temp * db_to_linear(self.noise_figure_db)

    @property
    def noise_power(self) -> float:
        return self.noise_density * self.bandwidth

    @property
    def tx_power(self) -> float:
        return dbm_to_watts(self.tx_power_dbm)


def link_feasible(g: int, h: int, delta: float, r_max: float) -> bool:
    """True iff nodes g and h on a line with spacing ``delta`` are within ``r_max``."""
    if g == h:
        raise ValueError(f"A link needs two distinct nodes, got g=h={g}")
    return abs(g - h) * delta <= r_max * (1.0 + 1e-12)


def absorption_factor(l0: float, distance: float) -> float:
    return l0 ** (-distance)


def two_ray_break_distance(h_tx: float, h_rx: float, lam: float) -> float:
    """Distance 4 h_t h_r / lambda beyond which the two-ray gain falls as d^-4."""
    return 4.0 * h_tx * h_rx / lam


def path_gain(model: PathLossModel, geom: LinkGeometry, lam: float) -> float:
    """Power gain of a link in (0, 1].

    Free-space variants use the direct path length. Two-ray variants sum the
    direct ray and the ground-reflected ray coherently with the exact
    path-length phase difference. The breakpoint variant is the dual-slope
    model: free space up to the break distance, d^-4 beyond it.
    """
    return float(path_gain_batch(model, geom.distance, geom.h_tx, geom.h_rx, lam))


def path_gain_batch(model: PathLossModel, distance, h_tx, h_rx, lam: float) -> np.ndarray:
    """Vectorized ``path_gain`` over broadcastable arrays of distances and heights."""
    if lam <= 0:
        raise ValueError(f"Wavelength must be positive, got {lam}")
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise ValueError("Link distance must be positive")
    h_tx = np.asarray(h_tx, dtype=float)
    h_rx = np.asarray(h_rx, dtype=float)

    d_los = np.hypot(distance, h_tx - h_rx)
    if model.kind is PathLossKind.TWO_RAY_BREAKPOINT:
        ratio = two_ray_break_distance(h_tx, h_rx, lam) / d_los
        gain = (lam / (4.0 * math.pi * d_los)) ** 2 * np.minimum(ratio, 1.0) ** 2
    elif model.kind.is_two_ray:
        k = 2.0 * math.pi / lam
        d_ref = np.hypot(distance, h_tx + h_rx)
        # only the path difference matters; factor out the direct-ray phase
        field_sum = 1.0 / d_los + model.reflection_coefficient * np.exp(
            -1j * k * (d_ref - d_los)
        ) / d_ref
        gain = (lam / (4.0 * math.pi)) ** 2 * np.abs(field_sum) ** 2
    else:
        gain = (lam / (4.0 * math.pi * d_los)) ** 2
    if model.kind.has_absorption:
        gain = gain * absorption_factor(model.l0, d_los)
    return np.minimum(gain, 1.0)


def link_snr(radio: RadioConfig, gain):
    """Single element-pair SNR gamma = P_tx * gain / (k T B F). Accepts scalars or arrays."""
    if np.any(np.asarray(gain) <= 0):
        raise ValueError(f"Path gain must be positive, got {gain}")
    return radio.tx_power * gain / radio.noise_power
