"""Position error bounds from the block-banded FIM.

``peb_all`` runs a block LDL^T factorization followed by the backward
selected-inverse recursion, which yields every diagonal block of the CRB at a
cost linear in G for a fixed bandwidth. ``peb_node`` solves for a single
node's block with LAPACK's banded Cholesky solver. The closed forms cover the
centre agent of symmetric 1-hop and 2-hop lines.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from config import settings
from errors import FactorizationError, SingularFimError, UnanchoredSubchain
from services.fim_core import BlockBandedFim
from utils.logging import get_logger
from utils.monitoring import SolverMetrics

# Setup logger
logger = get_logger("peb_solver")

COORDINATES = ("x", "y", "z")


class SolverPath(str, Enum):
    BANDED = "banded"
    DENSE = "dense"
    BANDED_NODE = "banded_node"
    CLOSED_FORM_1HOP = "closed_form_1hop"
    CLOSED_FORM_2HOP = "closed_form_2hop"


@dataclass(frozen=True)
class NodePeb:
    """Bounds for a single agent, in meters."""

    index: int
    total: float
    x: float
    y: float
    z: float

    def statistic(self, name: str) -> float:
        """``total`` for the 3-D bound, ``per_coordinate`` for the largest coordinate bound."""
        if name == "total":
            return self.total
        if name == "per_coordinate":
            return max(self.x, self.y, self.z)
        raise ValueError(f"Unknown statistic {name!r}")


@dataclass(frozen=True)
class PebReport:
    """Per-agent position error bounds.

    Attributes:
        peb_total: sqrt(trace) of each agent's CRB block, shape (G,).
        peb_x: Per-coordinate bounds, shape (G,). peb_y and peb_z likewise;
            they are zero for ranging-only (1-D) problems.
        solver_path: Which solver produced the values.
        condition_estimate: Reciprocal condition estimate, when the solver has one.
        n_trials: Number of Monte Carlo trials averaged (1 for a single solve).
        seed: Master seed of the run, when random.
        peb_total_std: Across-trial standard deviation of peb_total, when averaged.
    """

    peb_total: np.ndarray
    peb_x: np.ndarray
    peb_y: np.ndarray
    peb_z: np.ndarray
    solver_path: SolverPath
    condition_estimate: float | None = None
    n_trials: int = 1
    seed: int | None = None
    peb_total_std: np.ndarray | None = field(default=None, compare=False)

    @classmethod
    def from_crb_diagonals(
        cls, diagonals: np.ndarray, solver_path: SolverPath, condition_estimate: float | None = None
    ) -> "PebReport":
        """Build a report from the (G, b) diagonals of the CRB blocks."""
        variances = np.clip(diagonals, 0.0, None)
        padded = np.zeros((variances.shape[0], 3))
        padded[:, : variances.shape[1]] = variances
        return cls(
            peb_total=np.sqrt(padded.sum(axis=1)),
            peb_x=np.sqrt(padded[:, 0]),
            peb_y=np.sqrt(padded[:, 1]),
            peb_z=np.sqrt(padded[:, 2]),
            solver_path=solver_path,
            condition_estimate=condition_estimate,
        )

    @property
    def n_agents(self) -> int:
        return self.peb_total.size

    @property
    def center_index(self) -> int:
        return (self.n_agents + 1) // 2

    def node(self, index: int) -> NodePeb:
        """Bounds of agent ``index`` (1-based)."""
        i = index - 1
        return NodePeb(
            index=index,
            total=float(self.peb_total[i]),
            x=float(self.peb_x[i]),
            y=float(self.peb_y[i]),
            z=float(self.peb_z[i]),
        )

    def center(self) -> NodePeb:
        return self.node(self.center_index)

    def worst(self, statistic: str = "total") -> NodePeb:
        return max((self.node(i) for i in range(1, self.n_agents + 1)), key=lambda n: n.statistic(statistic))


@dataclass(frozen=True)
class ClosedFormParams:
    """Inputs of the centre-agent closed forms.

    Attributes:
        j_a: Diagonal block of an interior agent in the 1-hop line (four
            single-direction blocks), 3x3.
        d: 2-hop information ratio; the 2-hop single-direction block is
            diag(4d, d, d) times the 1-hop one.
        n_agents: Number of agents G.
    """

    j_a: np.ndarray
    n_agents: int
    d: float | None = None

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError(f"Closed forms need at least one agent, got {self.n_agents}")
        if self.d is not None and not 0.0 < self.d:
            raise ValueError(f"2-hop ratio d must be positive, got {self.d}")


@dataclass(frozen=True)
class CenterBound:
    crb: np.ndarray
    center_index: int
    solver_path: SolverPath

    @property
    def peb(self) -> float:
        return float(math.sqrt(np.trace(self.crb)))

    def as_node(self) -> NodePeb:
        diag = np.sqrt(np.clip(np.diag(self.crb), 0.0, None))
        return NodePeb(index=self.center_index, total=self.peb, x=float(diag[0]), y=float(diag[1]), z=float(diag[2]))


def _coordinate_scale(fim: BlockBandedFim) -> np.ndarray:
    """Square root of the largest diagonal entry per coordinate.

    Angular information is many orders of magnitude below range information,
    so tolerances are applied after this Jacobi-style scaling.
    """
    diag = np.abs(np.diagonal(fim.bands[0], axis1=1, axis2=2)).max(axis=0)
    return np.sqrt(np.maximum(diag, np.finfo(float).tiny))


def _scaled_rcond(a_diag: np.ndarray, z_diag: np.ndarray) -> float:
    """Reciprocal condition estimate 1 / max(A_ii[c, c] * Z_ii[c, c]), invariant to coordinate scaling."""
    products = np.diagonal(a_diag, axis1=1, axis2=2) * np.diagonal(z_diag, axis1=1, axis2=2)
    worst = float(products.max()) if products.size else 0.0
    return 1.0 / worst if worst > 0 and np.isfinite(worst) else 0.0


def _diagnose_unanchored(fim: BlockBandedFim) -> list[UnanchoredSubchain]:
    """Find runs of agents coupled to each other but cut off from anchor information."""
    g, b, k = fim.n_agents, fim.block_size, fim.block_bandwidth
    scale = _coordinate_scale(fim)
    outer = np.outer(scale, scale)
    tol = settings.SINGULAR_PIVOT_TOL

    rows, cols = [], []
    for s in range(1, k + 1):
        coupled = (np.abs(fim.bands[s, : g - s]) / outer).max(axis=(1, 2)) > tol
        idx = np.nonzero(coupled)[0]
        rows.extend(idx + s)
        cols.extend(idx)
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(g, g))
    n_components, labels = connected_components(graph, directed=False)

    grounding = np.abs(np.diagonal(fim.row_sums(), axis1=1, axis2=2)) / scale**2
    subchains = []
    for component in range(n_components):
        members = np.nonzero(labels == component)[0]
        missing = tuple(
            COORDINATES[c] for c in range(b) if np.all(grounding[members, c] <= tol)
        )
        if missing:
            subchains.append(
                UnanchoredSubchain(first=int(members.min()) + 1, last=int(members.max()) + 1, coordinates=missing)
            )
    return subchains


def _singular(fim: BlockBandedFim, message: str) -> SingularFimError:
    subchains = _diagnose_unanchored(fim)
    logger.error(f"{message}; unanchored subchains: {[s.describe() for s in subchains]}")
    return SingularFimError(message, subchains)


def block_ldl(fim: BlockBandedFim) -> tuple[np.ndarray, np.ndarray]:
    """Block LDL^T factorization within the band.

    Returns:
        (lower, pivots): ``lower[s, i]`` is L_{i+s, i} for s = 1..k (index 0 unused)
        and ``pivots[i]`` is D_i.

    Raises:
        SingularFimError: A pivot is not positive definite and unanchored agents explain it.
        FactorizationError: A pivot breaks down for any other reason.
    """
    a = fim.bands
    g, b, k = fim.n_agents, fim.block_size, fim.block_bandwidth
    lower = np.zeros_like(a)
    pivots = np.zeros((g, b, b))
    pivot_inv = np.zeros((g, b, b))
    scale = _coordinate_scale(fim)
    outer = np.outer(scale, scale)

    for i in range(g):
        d_i = a[0, i].copy()
        for j in range(max(0, i - k), i):
            l_ij = lower[i - j, j]
            d_i -= l_ij @ pivots[j] @ l_ij.T
        d_i = 0.5 * (d_i + d_i.T)
        if np.linalg.eigvalsh(d_i / outer).min() <= settings.SINGULAR_PIVOT_TOL:
            subchains = _diagnose_unanchored(fim)
            message = f"Pivot of agent {i + 1} is not positive definite"
            if subchains:
                logger.error(f"{message}; unanchored subchains found")
                raise SingularFimError("FIM is singular", subchains)
            raise FactorizationError(message)
        pivots[i] = d_i
        pivot_inv[i] = np.linalg.inv(d_i)

        for r in range(i + 1, min(g, i + k + 1)):
            acc = a[r - i, i].copy()
            for j in range(max(0, r - k), i):
                acc -= lower[r - j, j] @ pivots[j] @ lower[i - j, j].T
            lower[r - i, i] = acc @ pivot_inv[i]
    return lower, pivots


def selected_inverse_diagonal(fim: BlockBandedFim) -> list[np.ndarray]:
    """Diagonal blocks of the inverse of a symmetric positive definite block-banded FIM."""
    return list(_selected_inverse(fim)[0])


def _selected_inverse(fim: BlockBandedFim) -> tuple[np.ndarray, float]:
    g, b, k = fim.n_agents, fim.block_size, fim.block_bandwidth
    lower, pivots = block_ldl(fim)
    # z[t, i] holds Z_{i+t, i} of the inverse within the band
    z = np.zeros_like(fim.bands)

    def z_block(r: int, c: int) -> np.ndarray:
        return z[r - c, c] if r >= c else z[c - r, r].T

    for i in range(g - 1, -1, -1):
        span = range(i + 1, min(g, i + k + 1))
        for j in span:
            acc = np.zeros((b, b))
            for s in span:
                acc -= z_block(j, s) @ lower[s - i, i]
            z[j - i, i] = acc
        diag = np.linalg.inv(pivots[i])
        for s in span:
            diag -= z[s - i, i].T @ lower[s - i, i]
        z[0, i] = 0.5 * (diag + diag.T)

    return z[0], _scaled_rcond(fim.bands[0], z[0])


def peb_all(fim: BlockBandedFim, solver: SolverPath | str = SolverPath.BANDED) -> PebReport:
    """Per-agent PEBs from the diagonal blocks of the inverse FIM.

    Args:
        fim: Assembled FIM.
        solver: ``banded`` for selected inversion or ``dense`` for a full
            inverse, kept as a reference for validation.

    Raises:
        SingularFimError: The FIM is singular or its reciprocal condition
            estimate is below ``settings.CONDITION_THRESHOLD``.
    """
    solver = SolverPath(solver)
    with SolverMetrics(solver.value):
        if solver is SolverPath.BANDED:
            blocks, rcond = _selected_inverse(fim)
        elif solver is SolverPath.DENSE:
            blocks, rcond = _dense_inverse_blocks(fim)
        else:
            raise ValueError(f"peb_all supports banded and dense solvers, got {solver.value}")

        if not np.isfinite(rcond) or rcond < settings.CONDITION_THRESHOLD:
            raise _singular(fim, f"FIM is ill-conditioned (reciprocal condition {rcond:.3e})")
        diagonals = np.diagonal(blocks, axis1=1, axis2=2)
        if np.any(diagonals <= 0):
            raise _singular(fim, "FIM inverse has non-positive variances")
    return PebReport.from_crb_diagonals(diagonals, solver, condition_estimate=rcond)


def _dense_inverse_blocks(fim: BlockBandedFim) -> tuple[np.ndarray, float]:
    try:
        inverse = np.linalg.inv(fim.to_dense())
    except np.linalg.LinAlgError as e:
        raise _singular(fim, f"Dense inversion failed: {e}") from e
    b = fim.block_size
    blocks = np.stack([inverse[i * b : (i + 1) * b, i * b : (i + 1) * b] for i in range(fim.n_agents)])
    return blocks, _scaled_rcond(fim.bands[0], blocks)


def peb_node(fim: BlockBandedFim, index: int) -> NodePeb:
    """Bounds of a single agent (1-based ``index``) via a banded Cholesky solve."""
    g, b = fim.n_agents, fim.block_size
    if not 1 <= index <= g:
        raise ValueError(f"Agent index must lie in [1, {g}], got {index}")
    rhs = np.zeros((g * b, b))
    rows = slice((index - 1) * b, index * b)
    rhs[rows] = np.eye(b)
    with SolverMetrics(SolverPath.BANDED_NODE.value):
        try:
            solution = linalg.solveh_banded(fim.to_lower_banded(), rhs, lower=True, check_finite=False)
        except linalg.LinAlgError as e:
            raise _singular(fim, f"Banded Cholesky failed: {e}") from e
    crb = solution[rows]
    variances = np.zeros(3)
    variances[:b] = np.diag(crb)
    if np.any(variances[:b] <= 0) or not np.all(np.isfinite(variances)):
        raise _singular(fim, f"Agent {index} has no finite bound")
    x, y, z = np.sqrt(variances)
    return NodePeb(index=index, total=float(math.sqrt(variances.sum())), x=float(x), y=float(y), z=float(z))


def footnote_factor(n_agents: int) -> float:
    """Centre CRB factor of the symmetric 1-hop line for any parity of G."""
    g1 = n_agents + 1
    return (2.0 * g1**2 - 1.0 + (-1.0) ** g1) / (4.0 * g1)


def even_factor(n_agents: int) -> float:
    """G(G + 2) / (2(G + 1)); equals ``footnote_factor`` for even G."""
    return n_agents * (n_agents + 2) / (2.0 * (n_agents + 1))


def closed_form_1hop_center(params: ClosedFormParams) -> CenterBound:
    """Centre CRB block of the symmetric 1-hop line: factor(G) * J_A^{-1}."""
    crb = footnote_factor(params.n_agents) * np.linalg.inv(params.j_a)
    return CenterBound(crb=crb, center_index=(params.n_agents + 1) // 2, solver_path=SolverPath.CLOSED_FORM_1HOP)


def toeplitz_center_inverse(d1: float, n: int, c: int | None = None) -> float:
    """[tri{d1, 1}^{-1}]_{c,c} for the n x n tridiagonal Toeplitz matrix, d1 > 2.

    Uses the determinant recursion theta_k = (s^{k+1} - s^{-(k+1)}) / (s - 1/s)
    with s = (d1 + sqrt(d1^2 - 4)) / 2, rewritten in powers of 1/s so large n
    does not overflow.
    """
    if d1 <= 2.0:
        raise ValueError(f"Diagonal d1 must exceed 2, got {d1}")
    c = (n + 1) // 2 if c is None else c
    s = (d1 + math.sqrt(d1 * d1 - 4.0)) / 2.0
    q = 1.0 / s
    return (
        (1.0 - q ** (2 * c))
        * (1.0 - q ** (2 * (n + 1 - c)))
        / ((s - q) * (1.0 - q ** (2 * (n + 1))))
    )


def two_hop_p(d1: float, n: int) -> float:
    """p(d1) = -1/2 [tri{d1, 1}^{-1}]_{c,c}."""
    return -0.5 * toeplitz_center_inverse(d1, n)


def closed_form_2hop_center(params: ClosedFormParams) -> CenterBound:
    """Approximate centre CRB block of the symmetric 2-hop line.

    Per coordinate the pentadiagonal FIM is -e K1 * 2 * T1 T2 with
    T1 = tri{1/e + 2, 1}, T2 = tri{-2, 1}, e = diag(4d, d, d) and K1 = J_A / 4.
    The centre inverse is approximated by [T2^{-1}]_cc [T1^{-1}]_cc (2 J_B)^{-1}
    with 2 J_B = -e J_A / 2, which gives factor(G) * p(d1) * (2 J_B)^{-1}.
    """
    if params.d is None:
        raise ValueError("The 2-hop closed form needs the information ratio d")
    g = params.n_agents
    e = np.array([4.0 * params.d, params.d, params.d])
    j_a = np.diag(params.j_a)
    two_j_b = -e * j_a / 2.0
    p = np.array([two_hop_p(1.0 / ec + 2.0, g) for ec in e])
    crb = np.diag(footnote_factor(g) * p / two_j_b)
    return CenterBound(crb=crb, center_index=(g + 1) // 2, solver_path=SolverPath.CLOSED_FORM_2HOP)


def two_hop_ratio(gamma_one_hop: float, gamma_two_hop: float) -> float:
    """d = gamma(2 delta) / (4 gamma(delta)); L0^-delta / 16 under free space with absorption."""
    return gamma_two_hop / (4.0 * gamma_one_hop)
