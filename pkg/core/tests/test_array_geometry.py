"""Tests for orientations, planar array layout and steering."""

import math

import numpy as np
import pytest

from services.array_geometry import (
    VERTICAL,
    ArraySpec,
    DirectionAngles,
    Orientation,
    aperture,
    direction_cosine,
    element_positions,
    is_perfect_square,
    rotation_matrix,
    steering_delay,
    upa_offsets,
)
from utils.units import SPEED_OF_LIGHT


class TestOrientation:
    """Tests for Orientation normalization and rotation."""

    def test_angles_wrap_into_range(self):
        """Negative and oversized angles are normalized to [0, 2*pi)."""
        o = Orientation(varphi=-math.pi / 2, vartheta=5 * math.pi, Phi=2 * math.pi)
        assert o.varphi == pytest.approx(3 * math.pi / 2)
        assert o.vartheta == pytest.approx(math.pi)
        assert o.Phi == 0.0

    def test_vertical_is_identity(self):
        """The default orientation applies no rotation."""
        assert np.allclose(rotation_matrix(VERTICAL), np.eye(3))

    def test_rotation_is_proper(self):
        """Any orientation yields an orthonormal rotation with determinant one."""
        r = rotation_matrix(Orientation(varphi=0.3, vartheta=1.2, Phi=2.5))
        assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(r) == pytest.approx(1.0)

    def test_z_rotation_is_counter_clockwise(self):
        """A quarter turn about z carries the x-axis onto the y-axis."""
        r = rotation_matrix(Orientation(varphi=math.pi / 2))
        assert np.allclose(r @ np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-12)

    def test_x_rotation_keeps_array_in_yz_plane(self):
        """Rotating a vertical array about x leaves every element at x = 0."""
        array = ArraySpec.square(9, 0.0025)
        rotated = element_positions(array, Orientation(Phi=0.7))
        assert np.allclose(rotated[:, 0], 0.0)
        assert np.allclose(np.linalg.norm(rotated, axis=1), np.linalg.norm(array.element_offsets, axis=1))


class TestUpaOffsets:
    """Tests for the uniform planar array layout."""

    def test_grid_is_centred_in_yz_plane(self):
        """Offsets form a centred sqrt(N) x sqrt(N) grid with zero x."""
        offsets = upa_offsets(4, 1.0)
        assert offsets.shape == (4, 3)
        assert np.allclose(offsets.mean(axis=0), 0.0)
        assert np.allclose(offsets[:, 0], 0.0)
        assert sorted(set(np.round(offsets[:, 1], 12))) == [-0.5, 0.5]
        assert sorted(set(np.round(offsets[:, 2], 12))) == [-0.5, 0.5]

    def test_single_element_sits_at_centroid(self):
        assert np.allclose(upa_offsets(1, 0.01), np.zeros((1, 3)))

    def test_rejects_non_square_counts(self):
        """Element counts must be perfect squares."""
        with pytest.raises(ValueError, match="perfect-square"):
            upa_offsets(24, 0.0025)

    def test_rejects_non_positive_spacing(self):
        with pytest.raises(ValueError):
            upa_offsets(25, 0.0)

    def test_is_perfect_square(self):
        assert is_perfect_square(1)
        assert is_perfect_square(36)
        assert not is_perfect_square(0)
        assert not is_perfect_square(50)


class TestDirections:
    """Tests for direction angles and steering delays."""

    def test_from_vector_along_x(self):
        """The +x direction has polar angle pi/2 and azimuth 0."""
        d = DirectionAngles.from_vector([3.0, 0.0, 0.0])
        assert d.theta == pytest.approx(math.pi / 2)
        assert d.phi == pytest.approx(0.0)
        assert np.allclose(direction_cosine(d), [1.0, 0.0, 0.0], atol=1e-12)

    def test_from_vector_rejects_zero(self):
        with pytest.raises(ValueError):
            DirectionAngles.from_vector([0.0, 0.0, 0.0])

    def test_polar_angle_out_of_range(self):
        with pytest.raises(ValueError):
            DirectionAngles(theta=4.0, phi=0.0)

    def test_steering_delay(self):
        """An element one light-second along the arrival direction is delayed by one second."""
        d = DirectionAngles(theta=math.pi / 2, phi=0.0)
        assert steering_delay([SPEED_OF_LIGHT, 0.0, 0.0], d) == pytest.approx(1.0)
        assert steering_delay([0.0, 1.0, 1.0], d) == pytest.approx(0.0, abs=1e-20)


def test_aperture():
    """Aperture is N * lambda^2 / 4."""
    assert aperture(25, 0.005) == pytest.approx(25 * 0.005**2 / 4)
    with pytest.raises(ValueError):
        aperture(0, 0.005)
