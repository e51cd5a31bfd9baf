"""Waveform-level FIM of a single link, evaluated numerically.

The received signal at rx element m for baseband frequency f is

    X_m(f) = sqrt(E / N_t) P(f) a R_m(f) exp(-j 2 pi (f + f_c) D / c) S(f)

with R_m the receive response, S the beamformed transmit response and D the
centroid distance. Both array responses are evaluated at the direction u from
rx toward tx, recomputed from the perturbed centroids. Transmit weights stay
fixed at the nominal steering. The FIM is

    (2 / N0) sum_m int Re{dX_m* dX_m^T} df

integrated with piecewise Gauss-Legendre quadrature over the occupied band.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial.legendre import leggauss

from config import settings
from errors import QuadratureError
from services.array_geometry import DirectionAngles, direction_cosine, element_positions
from services.link_budget import RadioConfig
from services.topology import GeophoneNode
from services.waveform import band_segments, rrc_power_spectrum
from utils.logging import get_logger
from utils.monitoring import ORACLE_EVALUATIONS_TOTAL
from utils.units import SPEED_OF_LIGHT

# Setup logger
logger = get_logger("numeric_oracle")

MAX_REFINEMENTS = 4


class DerivativeWrt(str, Enum):
    RX_POSITION = "rx_position"
    TX_POSITION = "tx_position"


class DerivativeMethod(str, Enum):
    ANALYTIC = "analytic"
    FINITE_DIFFERENCE = "finite_difference"


@dataclass(frozen=True)
class SignalModelContext:
    """One transmitter-receiver pair and the radio it operates with.

    Attributes:
        tx: Transmitting node.
        rx: Receiving node.
        radio: Carrier, pulse and noise parameters.
        energy: Pulse energy E.
        noise_density: Noise spectral density N0.
        channel_amp: Channel amplitude a, common to all element pairs.
        steering: Transmit beam direction; the exact direction of the peer when None.
        steering_offset: (theta, phi) offset in radians added to the steering direction.
        quadrature_nodes: Gauss-Legendre nodes per smooth band segment.
    """

    tx: GeophoneNode
    rx: GeophoneNode
    radio: RadioConfig
    energy: float = 1.0
    noise_density: float = 1.0
    channel_amp: float = 1.0
    steering: DirectionAngles | None = None
    steering_offset: tuple[float, float] = (0.0, 0.0)
    quadrature_nodes: int = settings.ORACLE_QUADRATURE_NODES

    @classmethod
    def for_gamma(cls, tx: GeophoneNode, rx: GeophoneNode, radio: RadioConfig, gamma: float, **kwargs):
        """Context whose element-pair SNR E a^2 / N0 equals ``gamma``."""
        return cls(tx=tx, rx=rx, radio=radio, energy=gamma, noise_density=1.0, channel_amp=1.0, **kwargs)

    @property
    def gamma(self) -> float:
        return self.energy * self.channel_amp**2 / self.noise_density

    @property
    def separation(self) -> np.ndarray:
        """Vector from the rx centroid to the tx centroid."""
        return np.asarray(self.tx.position, dtype=float) - np.asarray(self.rx.position, dtype=float)

    def steering_direction(self) -> np.ndarray:
        base = self.steering or DirectionAngles.from_vector(self.separation)
        theta = min(max(base.theta + self.steering_offset[0], 0.0), math.pi)
        return direction_cosine(DirectionAngles(theta=theta, phi=base.phi + self.steering_offset[1]))


@dataclass(frozen=True)
class _Arrays:
    q_rx: np.ndarray
    q_tx: np.ndarray
    weights: np.ndarray


def _arrays(ctx: SignalModelContext) -> _Arrays:
    q_rx = element_positions(ctx.rx.array, ctx.rx.orientation)
    q_tx = element_positions(ctx.tx.array, ctx.tx.orientation)
    k_c = 2.0 * math.pi * ctx.radio.f_c / SPEED_OF_LIGHT
    weights = np.exp(1j * k_c * (q_tx @ ctx.steering_direction()))
    return _Arrays(q_rx=q_rx, q_tx=q_tx, weights=weights)


def _signal(ctx: SignalModelContext, arrays: _Arrays, freqs: np.ndarray, delta: np.ndarray, d0: float):
    """Signal tensor (F, N_rx) for a separation perturbed by ``delta``.

    The carrier phase uses D - d0, computed without cancellation, so that tiny
    finite-difference steps keep their precision.
    """
    v = ctx.separation
    w = v + delta
    distance = float(np.linalg.norm(w))
    excess = (2.0 * v @ delta + delta @ delta) / (distance + float(np.linalg.norm(v))) + (
        float(np.linalg.norm(v)) - d0
    )
    u = w / distance
    k_f = 2.0 * math.pi * (freqs + ctx.radio.f_c) / SPEED_OF_LIGHT
    amp = np.sqrt(rrc_power_spectrum(freqs, ctx.radio.pulse))

    receive = np.exp(1j * k_f[:, None] * (arrays.q_rx @ u)[None, :])
    transmit = np.exp(-1j * k_f[:, None] * (arrays.q_tx @ u)[None, :]) * arrays.weights[None, :]
    scale = math.sqrt(ctx.energy / ctx.tx.n_elements) * ctx.channel_amp
    base = scale * amp * np.exp(-1j * k_f * excess) * transmit.sum(axis=1)
    return base[:, None] * receive


def received_signal(ctx: SignalModelContext, f: float, m: int) -> complex:
    """X_m(f) at rx element ``m`` (0-based) for baseband frequency ``f`` in Hz."""
    if abs(f) > ctx.radio.pulse.band_edge:
        raise ValueError(f"Frequency {f} Hz lies outside the occupied band")
    if not 0 <= m < ctx.rx.n_elements:
        raise ValueError(f"Element index must lie in [0, {ctx.rx.n_elements - 1}], got {m}")
    signal = _signal(ctx, _arrays(ctx), np.array([float(f)]), np.zeros(3), 0.0)
    return complex(signal[0, m])


def _analytic_gradient(ctx: SignalModelContext, arrays: _Arrays, freqs: np.ndarray) -> np.ndarray:
    """dX/dp_rx, shape (F, N_rx, 3)."""
    v = ctx.separation
    distance = float(np.linalg.norm(v))
    u = v / distance
    projector = np.eye(3) - np.outer(u, u)
    k_f = 2.0 * math.pi * (freqs + ctx.radio.f_c) / SPEED_OF_LIGHT
    amp = np.sqrt(rrc_power_spectrum(freqs, ctx.radio.pulse))

    # d(u . q)/dp_rx = -P q / D and dD/dp_rx = -u
    g_rx = -(arrays.q_rx @ projector) / distance
    g_tx = -(arrays.q_tx @ projector) / distance

    receive = np.exp(1j * k_f[:, None] * (arrays.q_rx @ u)[None, :])
    transmit = np.exp(-1j * k_f[:, None] * (arrays.q_tx @ u)[None, :]) * arrays.weights[None, :]
    beam = transmit.sum(axis=1)
    d_beam = (-1j * k_f)[:, None] * (transmit @ g_tx)

    scale = math.sqrt(ctx.energy / ctx.tx.n_elements) * ctx.channel_amp
    base = scale * amp
    signal = (base * beam)[:, None] * receive
    phase_grad = 1j * k_f[:, None, None] * (g_rx[None, :, :] + u[None, None, :])
    return signal[:, :, None] * phase_grad + (base[:, None, None] * receive[:, :, None]) * d_beam[:, None, :]


def _finite_difference_gradient(
    ctx: SignalModelContext, arrays: _Arrays, freqs: np.ndarray, wrt: DerivativeWrt
) -> np.ndarray:
    """Central differences of X with respect to a centroid, shape (F, N_rx, 3)."""
    step = settings.ORACLE_FD_STEP_WAVELENGTHS * ctx.radio.wavelength
    d0 = float(np.linalg.norm(ctx.separation))
    columns = []
    for axis in range(3):
        shift = np.zeros(3)
        # moving rx by +h moves the separation by -h
        shift[axis] = -step if wrt is DerivativeWrt.RX_POSITION else step
        plus = _signal(ctx, arrays, freqs, shift, d0)
        minus = _signal(ctx, arrays, freqs, -shift, d0)
        columns.append((plus - minus) / (2.0 * step))
    return np.stack(columns, axis=-1)


def _quadrature(ctx: SignalModelContext, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = leggauss(nodes)
    freqs, weights = [], []
    for lo, hi in band_segments(ctx.radio.pulse):
        half = (hi - lo) / 2.0
        freqs.append(half * t + (hi + lo) / 2.0)
        weights.append(half * w)
    return np.concatenate(freqs), np.concatenate(weights)


def _fim_at(
    ctx: SignalModelContext, arrays: _Arrays, nodes: int, method: DerivativeMethod, wrt: DerivativeWrt
) -> np.ndarray:
    freqs, weights = _quadrature(ctx, nodes)
    if method is DerivativeMethod.ANALYTIC:
        grad = _analytic_gradient(ctx, arrays, freqs)
        if wrt is DerivativeWrt.TX_POSITION:
            grad = -grad
    else:
        grad = _finite_difference_gradient(ctx, arrays, freqs, wrt)
    fim = np.einsum("f,fma,fmb->ab", weights, grad.conj(), grad).real
    fim = 2.0 / ctx.noise_density * fim
    return 0.5 * (fim + fim.T)


def numeric_fim_block(
    ctx: SignalModelContext,
    wrt: DerivativeWrt | str = DerivativeWrt.RX_POSITION,
    method: DerivativeMethod | str = DerivativeMethod.ANALYTIC,
) -> np.ndarray:
    """3x3 FIM block about the rx or tx centroid position.

    The signal depends on the centroids only through their difference, so the
    analytic tx-position gradient is the negated rx-position gradient. Quadrature nodes
    are doubled until the block changes by less than
    ``settings.ORACLE_CONVERGENCE_TOL`` relative.

    Raises:
        QuadratureError: No convergence after the allowed refinements.
    """
    wrt = DerivativeWrt(wrt)
    method = DerivativeMethod(method)
    ORACLE_EVALUATIONS_TOTAL.labels(wrt=wrt.value).inc()
    arrays = _arrays(ctx)

    nodes = ctx.quadrature_nodes
    previous = _fim_at(ctx, arrays, nodes, method, wrt)
    for refinement in range(MAX_REFINEMENTS):
        nodes *= 2
        current = _fim_at(ctx, arrays, nodes, method, wrt)
        change = np.linalg.norm(current - previous) / max(np.linalg.norm(current), np.finfo(float).tiny)
        if change <= settings.ORACLE_CONVERGENCE_TOL:
            return current
        if refinement:
            logger.warning(f"Oracle quadrature refined to {nodes} nodes per segment (change {change:.2e})")
        previous = current
    raise QuadratureError(
        f"Oracle quadrature did not converge after {MAX_REFINEMENTS} refinements (last change {change:.2e})"
    )
