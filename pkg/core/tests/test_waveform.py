"""Tests for the root raised-cosine spectrum and its effective bandwidth."""

import numpy as np
import pytest

from services.waveform import (
    PulseSpec,
    band_segments,
    effective_bandwidth,
    effective_bandwidth_closed_form,
    rrc_power_spectrum,
    spectrum_energy,
)

AD_PULSE = PulseSpec(bandwidth=2.16e9, rolloff=0.6)


class TestPulseSpec:
    """Tests for PulseSpec parameters."""

    def test_derived_frequencies(self):
        """Rs = B / (1 + rolloff) and the flat edge is (1 - rolloff) Rs / 2."""
        assert AD_PULSE.symbol_rate == pytest.approx(1.35e9)
        assert AD_PULSE.flat_edge == pytest.approx(0.2 * 1.35e9)
        assert AD_PULSE.band_edge == pytest.approx(1.08e9)

    @pytest.mark.parametrize("kwargs", [{"bandwidth": 0.0}, {"bandwidth": 1e9, "rolloff": 1.5}])
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(ValueError):
            PulseSpec(**kwargs)


class TestPowerSpectrum:
    """Tests for the raised-cosine power spectrum."""

    def test_flat_region_and_band_edge(self):
        """Flat at 1/Rs inside the flat region, zero past the occupied band."""
        height = 1.0 / AD_PULSE.symbol_rate
        assert rrc_power_spectrum(0.0, AD_PULSE) == pytest.approx(height)
        assert rrc_power_spectrum(AD_PULSE.flat_edge, AD_PULSE) == pytest.approx(height)
        assert rrc_power_spectrum(AD_PULSE.band_edge * 1.01, AD_PULSE) == 0.0

    def test_taper_midpoint_is_half_height(self):
        """The cosine taper passes half height at Rs / 2."""
        value = rrc_power_spectrum(AD_PULSE.symbol_rate / 2.0, AD_PULSE)
        assert value == pytest.approx(0.5 / AD_PULSE.symbol_rate)

    def test_even_in_frequency_and_vectorized(self):
        f = np.linspace(-1.2e9, 1.2e9, 41)
        values = rrc_power_spectrum(f, AD_PULSE)
        assert values.shape == f.shape
        assert np.allclose(values, values[::-1])

    def test_unit_energy(self):
        """The spectrum integrates to one."""
        assert spectrum_energy(AD_PULSE) == pytest.approx(1.0, rel=1e-9)

    def test_band_segments(self):
        """Smooth pieces depend on the roll-off."""
        assert len(band_segments(PulseSpec(bandwidth=1e9, rolloff=0.0))) == 1
        assert len(band_segments(PulseSpec(bandwidth=1e9, rolloff=1.0))) == 2
        assert len(band_segments(AD_PULSE)) == 3


class TestEffectiveBandwidth:
    """Tests for beta."""

    @pytest.mark.parametrize("rolloff", [0.0, 0.25, 0.6, 1.0])
    def test_numeric_matches_closed_form(self, rolloff):
        spec = PulseSpec(bandwidth=2.16e9, rolloff=rolloff)
        assert effective_bandwidth(spec) == pytest.approx(effective_bandwidth_closed_form(spec), rel=1e-8)

    def test_rectangular_spectrum(self):
        """With zero roll-off beta = B / sqrt(12)."""
        spec = PulseSpec(bandwidth=1e9, rolloff=0.0)
        assert effective_bandwidth(spec) == pytest.approx(1e9 / np.sqrt(12.0), rel=1e-9)

    def test_decreases_with_rolloff_at_fixed_bandwidth(self):
        """More roll-off moves energy toward the band centre."""
        low = effective_bandwidth(PulseSpec(bandwidth=2.16e9, rolloff=0.2))
        high = effective_bandwidth(PulseSpec(bandwidth=2.16e9, rolloff=0.6))
        assert high < low

    def test_independent_of_normalization(self):
        scaled = PulseSpec(bandwidth=2.16e9, rolloff=0.6, unit_energy=False)
        assert effective_bandwidth(scaled) == pytest.approx(effective_bandwidth(AD_PULSE), rel=1e-12)
