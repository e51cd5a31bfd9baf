"""Array geometry: orientations, uniform planar array layout and steering delays.

Conventions: arrays start vertical in the yz-plane with the centroid at the node
position. The orientation is applied as R_z(varphi) R_y(vartheta) R_x(Phi), with the
z-rotation counter-clockwise and the y- and x-rotations clockwise.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from utils.units import SPEED_OF_LIGHT, wrap_angle


@dataclass(frozen=True)
class Orientation:
    """Array orientation angles in radians, each normalized to [0, 2*pi).

    Attributes:
        varphi: Counter-clockwise rotation about z.
        vartheta: Clockwise rotation about y.
        Phi: Clockwise rotation about x.
    """

    varphi: float = 0.0
    vartheta: float = 0.0
    Phi: float = 0.0  # noqa: N815

    def __post_init__(self):
        object.__setattr__(self, "varphi", wrap_angle(self.varphi))
        object.__setattr__(self, "vartheta", wrap_angle(self.vartheta))
        object.__setattr__(self, "Phi", wrap_angle(self.Phi))


VERTICAL = Orientation()


@dataclass(frozen=True)
class DirectionAngles:
    """Spherical direction: polar angle theta in [0, pi], azimuth phi in [0, 2*pi)."""

    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"Polar angle must lie in [0, pi], got {self.theta}")
        object.__setattr__(self, "phi", wrap_angle(self.phi))

    @classmethod
    def from_vector(cls, vector) -> "DirectionAngles":
        v = np.asarray(vector, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError("Direction vector must be non-zero")
        v = v / norm
        theta = math.acos(float(np.clip(v[2], -1.0, 1.0)))
        phi = math.atan2(float(v[1]), float(v[0]))
        return cls(theta=theta, phi=phi)


@dataclass(frozen=True)
class ArraySpec:
    """Square uniform planar array.

    Attributes:
        n_elements: Number of elements N, a perfect square.
        element_spacing: Grid spacing in meters.
        element_offsets: (N, 3) pre-rotation offsets in the yz-plane, centroid at zero.
    """

    n_elements: int
    element_spacing: float
    element_offsets: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def square(cls, n_elements: int, element_spacing: float) -> "ArraySpec":
        return cls(
            n_elements=n_elements,
            element_spacing=element_spacing,
            element_offsets=upa_offsets(n_elements, element_spacing),
        )


def _rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_y_clockwise(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def _rot_x_clockwise(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])


def rotation_matrix(orientation: Orientation) -> np.ndarray:
    """Return R_z(varphi) R_y(vartheta) R_x(Phi) for the given orientation."""
    return (
        _rot_z(orientation.varphi)
        @ _rot_y_clockwise(orientation.vartheta)
        @ _rot_x_clockwise(orientation.Phi)
    )


def is_perfect_square(n: int) -> bool:
    return n >= 1 and math.isqrt(n) ** 2 == n


def upa_offsets(n_elements: int, spacing: float) -> np.ndarray:
    """Element offsets of a sqrt(N) x sqrt(N) grid in the yz-plane, centroid at zero.

    Args:
        n_elements: Number of elements N; must be a perfect square.
        spacing: Distance between adjacent elements in meters.

    Returns:
        An (N, 3) array with a zero x column. Rows run over y fastest.
    """
    if not is_perfect_square(n_elements):
        raise ValueError(f"Uniform planar arrays need a perfect-square element count, got {n_elements}")
    if spacing <= 0:
        raise ValueError(f"Element spacing must be positive, got {spacing}")
    side = math.isqrt(n_elements)
    ticks = (np.arange(side) - (side - 1) / 2.0) * spacing
    zz, yy = np.meshgrid(ticks, ticks, indexing="ij")
    offsets = np.zeros((n_elements, 3))
    offsets[:, 1] = yy.ravel()
    offsets[:, 2] = zz.ravel()
    return offsets


def element_positions(array: ArraySpec, orientation: Orientation) -> np.ndarray:
    """Rotated element offsets relative to the array centroid, shape (N, 3)."""
    return array.element_offsets @ rotation_matrix(orientation).T


def direction_cosine(direction: DirectionAngles) -> np.ndarray:
    """Unit vector [sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)]."""
    st = math.sin(direction.theta)
    return np.array(
        [st * math.cos(direction.phi), st * math.sin(direction.phi), math.cos(direction.theta)]
    )


def steering_delay(element_pos, direction: DirectionAngles) -> float:
    """Delay d(theta) . p / c of an element at ``element_pos`` for a plane wave from ``direction``."""
    return float(direction_cosine(direction) @ np.asarray(element_pos, dtype=float)) / SPEED_OF_LIGHT


def aperture(n_elements: int, wavelength: float) -> float:
    """Array aperture N * lambda^2 / 4 in square meters."""
    if n_elements < 1:
        raise ValueError(f"Element count must be at least 1, got {n_elements}")
    return n_elements * wavelength**2 / 4.0
