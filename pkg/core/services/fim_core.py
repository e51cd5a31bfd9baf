"""Closed-form per-link FIM blocks and their assembly into a block-banded network FIM.

A directed link h <- t (measurement received at h, transmitted by t) carries a
diagonal 3x3 block about the relative position of h and t:

    xx: N_t N_h
    yy: N_t (N_h - 1) A_h / (12 D^2) * (cos^2 varphi_h + sin^2 varphi_h sin^2 vartheta_h)
    zz: N_t (N_h - 1) A_h / (12 D^2) * cos^2 vartheta_h

all scaled by 8 pi^2 gamma (beta^2 + f_c^2) / c^2. The amplitude nuisance
decouples from position, so only position blocks are stored.
"""

import math
from dataclasses import dataclass

import numpy as np

from services.array_geometry import aperture
from services.link_budget import PathLossModel, RadioConfig, link_snr, path_gain_batch
from services.topology import GeophoneNode, Topology
from utils.logging import get_logger
from utils.monitoring import FIM_ASSEMBLIES_TOTAL
from utils.units import SPEED_OF_LIGHT

# Setup logger
logger = get_logger("fim_core")

ON_AXIS_TOL = 1e-9  # meters

FimBlock = np.ndarray


@dataclass(frozen=True)
class LinkParams:
    """Radio quantities shared by both directions of a link.

    Attributes:
        gamma: Single element-pair SNR of the link.
        beta: Effective bandwidth in Hz.
        f_c: Carrier frequency in Hz.
    """

    gamma: float
    beta: float
    f_c: float

    @property
    def prefactor(self) -> float:
        return 8.0 * math.pi**2 * self.gamma * (self.beta**2 + self.f_c**2) / SPEED_OF_LIGHT**2


@dataclass
class BlockBandedFim:
    """Symmetric block-banded FIM over the agents.

    Attributes:
        bands: Array of shape (k + 1, G, b, b); ``bands[s, i]`` is the block in
            block-row i + s and block-column i. Entries past the matrix edge are zero.
        nuisance_decoupled: Position/amplitude cross blocks vanish, so the
            amplitude nuisance never enters the position bound.
        agent_x: Agent x coordinates in meters, in agent-index order.
    """

    bands: np.ndarray
    nuisance_decoupled: bool = True
    agent_x: np.ndarray | None = None

    def __post_init__(self):
        if self.bands.ndim != 4 or self.bands.shape[2] != self.bands.shape[3]:
            raise ValueError(f"Bands must have shape (k+1, G, b, b), got {self.bands.shape}")

    @property
    def n_agents(self) -> int:
        return self.bands.shape[1]

    @property
    def block_bandwidth(self) -> int:
        return self.bands.shape[0] - 1

    @property
    def block_size(self) -> int:
        return self.bands.shape[2]

    def block(self, u: int, v: int) -> np.ndarray:
        """Block (u, v) with 0-based agent positions."""
        s = u - v
        if abs(s) > self.block_bandwidth:
            return np.zeros((self.block_size, self.block_size))
        if s >= 0:
            return self.bands[s, v].copy()
        return self.bands[-s, u].T.copy()

    def to_dense(self) -> np.ndarray:
        g, b, k = self.n_agents, self.block_size, self.block_bandwidth
        dense = np.zeros((g * b, g * b))
        for s in range(k + 1):
            for i in range(g - s):
                r, c = (i + s) * b, i * b
                dense[r : r + b, c : c + b] = self.bands[s, i]
                if s:
                    dense[c : c + b, r : r + b] = self.bands[s, i].T
        return dense

    def to_lower_banded(self) -> np.ndarray:
        """Scalar lower-banded storage ``ab[r - c, c] = A[r, c]`` as used by LAPACK."""
        g, b, k = self.n_agents, self.block_size, self.block_bandwidth
        ab = np.zeros((b * (k + 1), g * b))
        for s in range(k + 1):
            cols = np.arange(g - s)
            for p in range(b):
                for q in range(b):
                    offset = s * b + p - q
                    if offset < 0:
                        continue
                    ab[offset, cols * b + q] = self.bands[s, cols, p, q]
        return ab

    def row_sums(self) -> np.ndarray:
        """Sum of every block in each block row, shape (G, b, b)."""
        g, k = self.n_agents, self.block_bandwidth
        sums = self.bands[0].copy()
        for s in range(1, k + 1):
            sums[s:] += self.bands[s, : g - s]
            sums[: g - s] += np.swapaxes(self.bands[s, : g - s], 1, 2)
        return sums

    def coordinate(self, c: int) -> "BlockBandedFim":
        """The 1x1-block FIM of coordinate ``c`` alone; exact because every link block is diagonal."""
        if not 0 <= c < self.block_size:
            raise ValueError(f"Coordinate must lie in [0, {self.block_size - 1}], got {c}")
        bands = self.bands[:, :, c : c + 1, c : c + 1].copy()
        return BlockBandedFim(bands=bands, nuisance_decoupled=self.nuisance_decoupled, agent_x=self.agent_x)

    def with_block_scaled(self, u: int, factor: float) -> "BlockBandedFim":
        """Copy with agent u's diagonal block scaled; used as a validation negative control."""
        bands = self.bands.copy()
        bands[0, u] *= factor
        return BlockBandedFim(bands=bands, nuisance_decoupled=self.nuisance_decoupled, agent_x=self.agent_x)


def _angle_factors(varphi, vartheta):
    """Receiver angle factors for the yy and zz entries."""
    sin_varphi = np.sin(varphi)
    yy = np.cos(varphi) ** 2 + sin_varphi**2 * np.sin(vartheta) ** 2
    zz = np.cos(vartheta) ** 2
    return yy, zz


def _directed_diagonals(n_rx, n_tx, aperture_rx, varphi_rx, vartheta_rx, distance, prefactor):
    """Diagonals (..., 3) of directed blocks rx <- tx, vectorized over links."""
    ay, az = _angle_factors(varphi_rx, vartheta_rx)
    angular = n_tx * (n_rx - 1.0) * aperture_rx / (12.0 * distance**2)
    return np.stack([n_tx * n_rx, angular * ay, angular * az], axis=-1) * prefactor[..., None]


def _require_on_axis(node: GeophoneNode):
    if abs(node.position[1]) > ON_AXIS_TOL or abs(node.position[2]) > ON_AXIS_TOL:
        raise ValueError(
            f"Node {node.index} at {node.position.tolist()} is off the x-axis; "
            "use the numeric oracle for general geometry"
        )


def fim_link_block(
    rx: GeophoneNode, tx: GeophoneNode, gamma: float, beta: float, f_c: float
) -> FimBlock:
    """Information about the receiver's position from the measurement rx <- tx.

    The link length is taken from the node positions, which sit at multiples
    of the line spacing.
    """
    if rx.index == tx.index:
        raise ValueError(f"A link needs two distinct nodes, got {rx.index} twice")
    _require_on_axis(rx)
    _require_on_axis(tx)
    distance = abs(float(rx.position[0] - tx.position[0]))
    if distance == 0.0:
        raise ValueError(f"Nodes {rx.index} and {tx.index} share a position")
    lam = SPEED_OF_LIGHT / f_c
    diag = _directed_diagonals(
        n_rx=float(rx.n_elements),
        n_tx=float(tx.n_elements),
        aperture_rx=aperture(rx.n_elements, lam),
        varphi_rx=rx.orientation.varphi,
        vartheta_rx=rx.orientation.vartheta,
        distance=distance,
        prefactor=np.asarray(LinkParams(gamma, beta, f_c).prefactor),
    )
    return np.diag(diag)


def fim_bidirectional_pair(
    u: GeophoneNode, g: GeophoneNode, link_params: LinkParams
) -> tuple[FimBlock, FimBlock]:
    """Both directed blocks of the u-g link: (K(u <- g), K(g <- u)).

    The measured signal depends only on p_u - p_g, so the information a
    measurement gives about its transmitter equals what it gives about its
    receiver. The second block is therefore u's information as a transmitter,
    governed by the receiving array at g.
    """
    forward = fim_link_block(u, g, link_params.gamma, link_params.beta, link_params.f_c)
    reverse = fim_link_block(g, u, link_params.gamma, link_params.beta, link_params.f_c)
    return forward, reverse


def link_gammas(radio: RadioConfig, path_loss: PathLossModel, distance, h_a, h_b) -> np.ndarray:
    """Element-pair SNRs for arrays of links."""
    gain = path_gain_batch(path_loss, distance, h_a, h_b, radio.wavelength)
    if np.any(gain <= 0):
        raise ValueError("Path gain vanished on a feasible link; check antenna heights")
    return link_snr(radio, gain)


def assemble_from_slots(
    slots: dict[str, np.ndarray],
    delta: float,
    hop_limit: int,
    radio: RadioConfig,
    path_loss: PathLossModel,
    *,
    ranging_only: bool = False,
) -> BlockBandedFim:
    """Assemble the network FIM from per-slot arrays (see ``Topology.slot_arrays``).

    Each feasible pair adds the sum S of its two directed blocks to both nodes'
    diagonal blocks and -S to the agent-agent off-diagonal block. Anchors keep
    only their contribution to agent diagonals. With ``ranging_only`` the
    blocks collapse to the 1x1 range information 8 pi^2 beta^2 gamma N_t N_r / c^2.
    """
    is_agent = slots["is_agent"]
    n_slots = is_agent.size
    agent_pos = np.cumsum(is_agent) - 1  # 0-based agent position per slot
    g = int(is_agent.sum())
    if g == 0:
        raise ValueError("Cannot assemble a FIM without agents")
    if hop_limit < 1:
        raise ValueError(f"Hop limit must be at least 1, got {hop_limit}")

    beta = radio.beta
    b = 1 if ranging_only else 3
    lam = radio.wavelength
    n_el = slots["n_elements"]
    apertures = n_el * lam**2 / 4.0
    pair_bands: dict[int, list[tuple[np.ndarray, np.ndarray, np.ndarray]]] = {}
    diagonal = np.zeros((n_slots, b))

    for hop in range(1, min(hop_limit, n_slots - 1) + 1):
        lo = np.arange(n_slots - hop)
        hi = lo + hop
        distance = hop * delta
        gamma = link_gammas(radio, path_loss, distance, slots["height"][lo], slots["height"][hi])
        if ranging_only:
            info = 8.0 * math.pi**2 * beta**2 * gamma * n_el[lo] * n_el[hi] / SPEED_OF_LIGHT**2
            pair = 2.0 * info[:, None]
        else:
            prefactor = 8.0 * math.pi**2 * gamma * (beta**2 + radio.f_c**2) / SPEED_OF_LIGHT**2
            to_lo = _directed_diagonals(
                n_el[lo], n_el[hi], apertures[lo], slots["varphi"][lo], slots["vartheta"][lo],
                distance, prefactor,
            )
            to_hi = _directed_diagonals(
                n_el[hi], n_el[lo], apertures[hi], slots["varphi"][hi], slots["vartheta"][hi],
                distance, prefactor,
            )
            pair = to_lo + to_hi
        np.add.at(diagonal, lo, pair)
        np.add.at(diagonal, hi, pair)
        both = is_agent[lo] & is_agent[hi]
        pair_bands.setdefault(hop, []).append((agent_pos[lo[both]], agent_pos[hi[both]], pair[both]))

    bandwidth = max(
        [int((v - u).max()) for entries in pair_bands.values() for u, v, _ in entries if u.size]
        or [0]
    )
    bands = np.zeros((bandwidth + 1, g, b, b))
    idx = np.arange(b)
    bands[0][:, idx, idx] = diagonal[is_agent]
    for entries in pair_bands.values():
        for u, v, pair in entries:
            # agent indices skip anchor slots, so the band offset can be below the hop
            for c in range(b):
                bands[v - u, u, c, c] -= pair[:, c]

    FIM_ASSEMBLIES_TOTAL.inc()
    return BlockBandedFim(bands=bands, agent_x=slots["x"][is_agent].astype(float))


def assemble_fim(
    topology: Topology,
    radio: RadioConfig,
    path_loss: PathLossModel,
    *,
    ranging_only: bool = False,
) -> BlockBandedFim:
    """Assemble the block-banded FIM of a linear topology."""
    fim = assemble_from_slots(
        topology.slot_arrays(),
        topology.delta,
        topology.hop_limit,
        radio,
        path_loss,
        ranging_only=ranging_only,
    )
    logger.debug(
        f"Assembled FIM: G={fim.n_agents}, block bandwidth {fim.block_bandwidth}, block size {fim.block_size}"
    )
    return fim
