"""Tests for the waveform-level FIM oracle."""

import math

import numpy as np
import pytest

from errors import QuadratureError
from services.array_geometry import Orientation
from services.fim_core import fim_link_block
from services.numeric_oracle import (
    DerivativeMethod,
    DerivativeWrt,
    SignalModelContext,
    numeric_fim_block,
    received_signal,
)
from services.topology import GeophoneNode, NodeRole
from utils.monitoring import ORACLE_EVALUATIONS_TOTAL


def node(index, x, array, orientation=None):
    return GeophoneNode(
        index=index,
        role=NodeRole.AGENT,
        position=np.array([x, 0.0, 0.0]),
        array=array,
        orientation=orientation or Orientation(),
    )


@pytest.fixture
def link(radio, make_array):
    """A 9-element pair one hop apart with a tilted receiver."""
    rx = node(1, 0.0, make_array(9), Orientation(varphi=math.pi / 3, vartheta=math.pi / 4))
    tx = node(2, 25.0, make_array(9))
    return SignalModelContext.for_gamma(tx, rx, radio, 1.0)


class TestReceivedSignal:
    """Tests for the signal model."""

    def test_for_gamma(self, link):
        assert link.gamma == pytest.approx(1.0)
        assert np.allclose(link.separation, [25.0, 0.0, 0.0])

    def test_beamformed_magnitude_at_band_centre(self, radio, make_array):
        """Exact steering adds the N_t transmit elements coherently at the carrier."""
        rx = node(1, 0.0, make_array(4))
        tx = node(2, 25.0, make_array(9))
        ctx = SignalModelContext.for_gamma(tx, rx, radio, 2.0)
        expected = math.sqrt(2.0 * 9 / radio.pulse.symbol_rate)
        for m in range(4):
            assert abs(received_signal(ctx, 0.0, m)) == pytest.approx(expected, rel=1e-12)

    def test_rejects_out_of_band_frequency(self, link, radio):
        with pytest.raises(ValueError):
            received_signal(link, radio.pulse.band_edge * 1.1, 0)

    def test_rejects_bad_element(self, link):
        with pytest.raises(ValueError):
            received_signal(link, 0.0, 9)


class TestNumericFimBlock:
    """Tests for numeric_fim_block."""

    @pytest.mark.parametrize("hops", [1, 2])
    def test_matches_closed_form_diagonal(self, radio, make_array, hops):
        rx = node(1, 0.0, make_array(9), Orientation(varphi=math.pi / 3, vartheta=math.pi / 4))
        tx = node(2, hops * 25.0, make_array(9))
        numeric = numeric_fim_block(SignalModelContext.for_gamma(tx, rx, radio, 1.0))
        closed = fim_link_block(rx, tx, 1.0, radio.beta, radio.f_c)
        assert np.allclose(np.diag(numeric), np.diag(closed), rtol=1e-2)

    def test_vertical_off_diagonal_is_negligible(self, radio, make_array):
        """Vertical arrays decouple all three coordinates."""
        rx = node(1, 0.0, make_array(9))
        tx = node(2, 25.0, make_array(9))
        block = numeric_fim_block(SignalModelContext.for_gamma(tx, rx, radio, 1.0))
        scale = np.sqrt(np.outer(np.diag(block), np.diag(block)))
        off = np.abs(block - np.diag(np.diag(block))) / scale
        assert off.max() < 1e-2

    def test_symmetric(self, link):
        block = numeric_fim_block(link)
        assert np.array_equal(block, block.T)

    def test_tx_derivative_equals_rx_derivative(self, link):
        """The signal depends on the centroids only through their difference."""
        rx_block = numeric_fim_block(link, DerivativeWrt.RX_POSITION)
        tx_block = numeric_fim_block(link, "tx_position")
        assert np.allclose(tx_block, rx_block, rtol=1e-12, atol=0)

    @pytest.mark.parametrize("wrt", list(DerivativeWrt))
    def test_finite_difference_agrees(self, link, wrt):
        analytic = numeric_fim_block(link, wrt, DerivativeMethod.ANALYTIC)
        finite = numeric_fim_block(link, wrt, DerivativeMethod.FINITE_DIFFERENCE)
        scale = np.sqrt(np.outer(np.diag(analytic), np.diag(analytic)))
        assert (np.abs(finite - analytic) / scale).max() < 1e-4

    def test_counts_evaluations(self, link):
        before = ORACLE_EVALUATIONS_TOTAL.labels(wrt="rx_position")._value.get()
        numeric_fim_block(link)
        assert ORACLE_EVALUATIONS_TOTAL.labels(wrt="rx_position")._value.get() == before + 1

    def test_non_convergence_raises(self, link, mocker):
        """Quadrature that keeps changing under refinement is reported, not returned."""
        mocker.patch(
            "services.numeric_oracle._fim_at",
            side_effect=lambda ctx, arrays, nodes, method, wrt: np.eye(3) * nodes,
        )
        with pytest.raises(QuadratureError, match="did not converge"):
            numeric_fim_block(link)
