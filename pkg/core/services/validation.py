"""Cross-checks between the waveform-level oracle, the closed-form blocks and the solvers.

Every check returns a ``ValidationCheck`` with the largest relative error it
saw. Negative controls pass when the corruption they inject is detected.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np

from services.array_geometry import VERTICAL, ArraySpec, Orientation
from services.experiments import (
    HeightMode,
    MonteCarloSpec,
    OrientationMode,
    Scenario,
    closed_form_params,
    monte_carlo_peb,
)
from services.fim_core import BlockBandedFim, LinkParams, assemble_fim, fim_bidirectional_pair, fim_link_block
from services.link_budget import PathLossKind, PathLossModel, RadioConfig
from services.numeric_oracle import DerivativeMethod, DerivativeWrt, SignalModelContext, numeric_fim_block
from services.peb_solver import (
    SolverPath,
    closed_form_1hop_center,
    closed_form_2hop_center,
    peb_all,
    peb_node,
)
from services.topology import GeophoneNode, NodeRole, draw_trial_state
from services.waveform import effective_bandwidth, effective_bandwidth_closed_form
from utils.logging import get_logger
from utils.monitoring import track_stage_latency

# Setup logger
logger = get_logger("validation")

ORACLE_TOL = 1e-2
PHI_TOL = 1e-6
GRADIENT_TOL = 1e-4
ONE_HOP_TOL = 1e-9
TWO_HOP_TOL = 0.10
SOLVER_TOL = 1e-9
PSD_TOL = 1e-10
LOEWNER_TOL = 1e-12
BETA_TOL = 1e-8

BETA_ROLLOFFS = (0.0, 0.25, 0.6, 1.0)

TILTED = Orientation(varphi=math.pi / 3, vartheta=math.pi / 4)
DIAGONAL_NAMES = ("xx", "yy", "zz")


@dataclass(frozen=True)
class ValidationCheck:
    name: str
    passed: bool
    max_rel_error: float
    tolerance: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[ValidationCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[ValidationCheck]:
        return [c for c in self.checks if not c.passed]


@dataclass(frozen=True)
class ValidationPlan:
    """Scale of the validation run.

    Attributes:
        delta: Line spacing in meters.
        radio: Radio used by every check.
        path_loss: Propagation model of the solver checks.
        oracle_elements: Element counts paired in the oracle checks (N <= 36).
        one_hop_g_max: 1-hop closed-form check covers G = 1..one_hop_g_max.
        two_hop_g: Agent counts of the 2-hop approximation check.
        property_trials: Random scenarios drawn by the property checks.
        seed: Seed of the random scenarios.
    """

    delta: float = 25.0
    radio: RadioConfig = field(default_factory=RadioConfig)
    path_loss: PathLossModel = field(
        default_factory=lambda: PathLossModel(kind=PathLossKind.FREE_SPACE_ABSORPTION)
    )
    oracle_elements: tuple[int, ...] = (4, 9, 25)
    one_hop_g_max: int = 500
    two_hop_g: tuple[int, ...] = (20, 50, 100, 200)
    property_trials: int = 100
    seed: int = 0

    def __post_init__(self):
        if any(n > 36 for n in self.oracle_elements):
            raise ValueError(f"Oracle checks are limited to N <= 36, got {self.oracle_elements}")
        if self.one_hop_g_max > 1000 or any(g > 1000 for g in self.two_hop_g):
            raise ValueError("Solver checks are limited to G <= 1000")

    def array(self, n_elements: int) -> ArraySpec:
        return ArraySpec.square(n_elements, self.radio.wavelength / 2.0)

    def scenario(self, n_agents: int, n_anchors: int, hops: int, n_elements: int = 25) -> Scenario:
        array = self.array(n_elements)
        return Scenario(
            n_agents=n_agents,
            n_anchors=n_anchors,
            delta=self.delta,
            r_max=hops * self.delta,
            agent_array=array,
            anchor_array=array,
            radio=self.radio,
            path_loss=self.path_loss,
        )


def _node(index: int, x: float, array: ArraySpec, orientation: Orientation) -> GeophoneNode:
    return GeophoneNode(
        index=index,
        role=NodeRole.AGENT,
        position=np.array([x, 0.0, 0.0]),
        array=array,
        orientation=orientation,
    )


def _normalized_error(a: np.ndarray, b: np.ndarray) -> float:
    """max |a - b|_ij / sqrt(b_ii b_jj), insensitive to the range/angle scale gap."""
    scale = np.sqrt(np.outer(np.abs(np.diag(b)), np.abs(np.diag(b))))
    return float((np.abs(a - b) / np.maximum(scale, np.finfo(float).tiny)).max())


def _diagonal_error(numeric: np.ndarray, closed: np.ndarray) -> np.ndarray:
    return np.abs(np.diag(numeric) - np.diag(closed)) / np.abs(np.diag(closed))


def check_oracle_blocks(plan: ValidationPlan, corrupt_yy: float | None = None) -> ValidationCheck:
    """Oracle FIM diagonal against the closed-form block for every N, hop and orientation."""
    worst, where = 0.0, ""
    for n in plan.oracle_elements:
        for hops in (1, 2):
            for label, orientation in (("vertical", VERTICAL), ("tilted", TILTED)):
                rx = _node(1, 0.0, plan.array(n), orientation)
                tx = _node(2, hops * plan.delta, plan.array(n), orientation)
                numeric = numeric_fim_block(SignalModelContext.for_gamma(tx, rx, plan.radio, 1.0))
                closed = fim_link_block(rx, tx, 1.0, plan.radio.beta, plan.radio.f_c)
                if corrupt_yy is not None:
                    closed[1, 1] *= corrupt_yy
                errors = _diagonal_error(numeric, closed)
                if errors.max() > worst:
                    worst = float(errors.max())
                    where = f"N={n}, {hops} hop(s), {label}, entry {DIAGONAL_NAMES[int(errors.argmax())]}"
    name = "oracle_vs_closed_form" if corrupt_yy is None else "negative_control_corrupted_yy"
    return ValidationCheck(name, worst <= ORACLE_TOL, worst, ORACLE_TOL, f"worst at {where}")


def check_corrupted_yy(plan: ValidationPlan, factor: float = 1.5) -> ValidationCheck:
    """A corrupted yy factor must be caught, and only in the yy entry."""
    caught = check_oracle_blocks(plan, corrupt_yy=factor)
    detected = not caught.passed and caught.detail.endswith("entry yy")
    return replace(caught, passed=detected, detail=f"corruption x{factor} detected: {caught.detail}")


def check_role_swap(plan: ValidationPlan) -> ValidationCheck:
    """The reverse block of a link equals the oracle's transmitter-position FIM."""
    n_rx = max(plan.oracle_elements)
    u = _node(1, 0.0, plan.array(1), VERTICAL)
    g = _node(2, plan.delta, plan.array(n_rx), TILTED)
    _, reverse = fim_bidirectional_pair(u, g, LinkParams(1.0, plan.radio.beta, plan.radio.f_c))
    numeric = numeric_fim_block(
        SignalModelContext.for_gamma(u, g, plan.radio, 1.0), wrt=DerivativeWrt.TX_POSITION
    )
    worst = float(_diagonal_error(numeric, reverse).max())
    return ValidationCheck(
        "role_swap_vs_tx_derivative", worst <= ORACLE_TOL, worst, ORACLE_TOL, f"N_u=1, N_g={n_rx}"
    )


def check_phi_invariance(plan: ValidationPlan) -> ValidationCheck:
    """Rotating vertical arrays about their boardside axis leaves the oracle FIM unchanged."""
    worst = 0.0
    for n in plan.oracle_elements:
        blocks = []
        for phi in (0.0, 0.5, 1.3, 2.9):
            orientation = Orientation(Phi=phi)
            rx = _node(1, 0.0, plan.array(n), orientation)
            tx = _node(2, plan.delta, plan.array(n), orientation)
            blocks.append(numeric_fim_block(SignalModelContext.for_gamma(tx, rx, plan.radio, 1.0)))
        worst = max(worst, max(_normalized_error(b, blocks[0]) for b in blocks[1:]))
    return ValidationCheck("phi_invariance", worst <= PHI_TOL, worst, PHI_TOL)


def check_effective_bandwidth(plan: ValidationPlan) -> ValidationCheck:
    """Quadrature beta against the raised-cosine closed form over a range of roll-offs."""
    worst, where = 0.0, 0.0
    for rolloff in BETA_ROLLOFFS:
        spec = replace(plan.radio.pulse, rolloff=rolloff)
        error = abs(effective_bandwidth(spec) / effective_bandwidth_closed_form(spec) - 1.0)
        if error > worst:
            worst, where = error, rolloff
    return ValidationCheck(
        "effective_bandwidth_quadrature", worst <= BETA_TOL, worst, BETA_TOL, f"worst at rolloff={where}"
    )


def check_gradients(plan: ValidationPlan) -> ValidationCheck:
    """Analytic and finite-difference signal derivatives give the same FIM."""
    n = max(plan.oracle_elements)
    rx = _node(1, 0.0, plan.array(n), TILTED)
    tx = _node(2, plan.delta, plan.array(n), Orientation(varphi=0.4, vartheta=1.1))
    ctx = SignalModelContext.for_gamma(tx, rx, plan.radio, 1.0)
    worst = 0.0
    for wrt in DerivativeWrt:
        analytic = numeric_fim_block(ctx, wrt, DerivativeMethod.ANALYTIC)
        finite = numeric_fim_block(ctx, wrt, DerivativeMethod.FINITE_DIFFERENCE)
        worst = max(worst, _normalized_error(finite, analytic))
    return ValidationCheck("analytic_vs_finite_difference", worst <= GRADIENT_TOL, worst, GRADIENT_TOL)


def _center_variances(fim: BlockBandedFim, index: int) -> np.ndarray:
    node = peb_node(fim, index)
    return np.array([node.x, node.y, node.z]) ** 2


def check_one_hop_closed_form(plan: ValidationPlan, corrupt: float | None = None) -> ValidationCheck:
    """Exact 1-hop centre CRB against the banded solve for G = 1..one_hop_g_max."""
    fixed = MonteCarloSpec(n_trials=1, seed=plan.seed, height_mode=HeightMode.FIXED)
    worst, where = 0.0, 0
    for g in range(1, plan.one_hop_g_max + 1):
        scenario = plan.scenario(g, 2, 1)
        fim = assemble_fim(scenario.topology(), plan.radio, plan.path_loss)
        center = (g + 1) // 2
        if corrupt is not None:
            fim = fim.with_block_scaled(center - 1, corrupt)
        numeric = _center_variances(fim, center)
        closed = np.diag(closed_form_1hop_center(closed_form_params(scenario, fixed, g)).crb)
        error = float((np.abs(numeric - closed) / closed).max())
        if error > worst:
            worst, where = error, g
    name = "closed_form_1hop_vs_banded" if corrupt is None else "negative_control_scaled_block"
    return ValidationCheck(name, worst <= ONE_HOP_TOL, worst, ONE_HOP_TOL, f"worst at G={where}")


def check_scaled_block(plan: ValidationPlan, factor: float = 1.01) -> ValidationCheck:
    """A 1% change in the centre agent's diagonal block must break the 1-hop match."""
    caught = check_one_hop_closed_form(replace(plan, one_hop_g_max=min(plan.one_hop_g_max, 10)), factor)
    return replace(caught, passed=not caught.passed)


def check_two_hop_closed_form(plan: ValidationPlan) -> ValidationCheck:
    """Approximate 2-hop centre PEB against the pentadiagonal solve."""
    fixed = MonteCarloSpec(n_trials=1, seed=plan.seed, height_mode=HeightMode.FIXED)
    worst, where, ratio = 0.0, 0, float("nan")
    for g in plan.two_hop_g:
        scenario = plan.scenario(g, 2, 2)
        fim = assemble_fim(scenario.topology(), plan.radio, plan.path_loss)
        numeric = peb_node(fim, (g + 1) // 2).total
        params = closed_form_params(scenario, fixed, g)
        ratio = params.d
        closed = closed_form_2hop_center(params).peb
        error = abs(closed - numeric) / numeric
        if error > worst:
            worst, where = error, g
    return ValidationCheck(
        "closed_form_2hop_vs_banded", worst <= TWO_HOP_TOL, worst, TWO_HOP_TOL, f"worst at G={where}, d={ratio:.4f}"
    )


def _random_fims(plan: ValidationPlan) -> list[BlockBandedFim]:
    """FIMs of seeded random lines: W in {2, 3, 4}, 1 to 3 hops, random orientations."""
    rng = np.random.default_rng(plan.seed)
    fims = []
    for _ in range(plan.property_trials):
        g = int(rng.integers(2, 40))
        w = int(rng.integers(2, 5))
        hops = int(rng.integers(1, 4))
        n = int(rng.choice([4, 9, 16, 25]))
        scenario = plan.scenario(g, w, hops, n)
        slots = scenario.topology().slot_arrays()
        state = draw_trial_state(rng, slots["x"].size, True, None)
        fims.append(
            assemble_fim(
                scenario.topology(orientations=state.orientations()), plan.radio, plan.path_loss
            )
        )
    return fims


def check_symmetric_psd(plan: ValidationPlan) -> ValidationCheck:
    """Assembled FIMs are symmetric and positive semidefinite after diagonal scaling."""
    worst = 0.0
    for fim in _random_fims(plan):
        dense = fim.to_dense()
        scale = 1.0 / np.sqrt(np.diag(dense))
        scaled = dense * np.outer(scale, scale)
        asym = float(np.abs(scaled - scaled.T).max())
        negative = max(0.0, -float(np.linalg.eigvalsh(0.5 * (scaled + scaled.T)).min()))
        worst = max(worst, asym, negative)
    return ValidationCheck("fim_symmetric_psd", worst <= PSD_TOL, worst, PSD_TOL)


def check_banded_vs_dense(plan: ValidationPlan) -> ValidationCheck:
    worst = 0.0
    for fim in _random_fims(plan):
        banded = peb_all(fim, SolverPath.BANDED)
        dense = peb_all(fim, SolverPath.DENSE)
        for coord in ("peb_x", "peb_y", "peb_z"):
            a, b = getattr(banded, coord), getattr(dense, coord)
            worst = max(worst, float((np.abs(a - b) / b).max()))
    return ValidationCheck("banded_vs_dense", worst <= SOLVER_TOL, worst, SOLVER_TOL)


def check_loewner_monotonicity(plan: ValidationPlan) -> ValidationCheck:
    """Added links, elements or anchors never raise any agent's bound."""
    violations = []

    def compare(label: str, fewer: Scenario, more: Scenario):
        weak = peb_all(assemble_fim(fewer.topology(), plan.radio, plan.path_loss)).peb_total
        strong = peb_all(assemble_fim(more.topology(), plan.radio, plan.path_loss)).peb_total
        violations.append(float(np.max((strong - weak) / weak)))
        logger.debug(f"Loewner {label}: worst relative change {violations[-1]:.3e}")

    compare("added links", plan.scenario(30, 2, 1), plan.scenario(30, 2, 2))
    compare("added elements", plan.scenario(30, 3, 2, 9), plan.scenario(30, 3, 2, 25))
    compare(
        "added anchor",
        replace(plan.scenario(30, 2, 2), anchors_at=(0, 31)),
        replace(plan.scenario(30, 3, 2), anchors_at=(0, 31, 32)),
    )
    worst = max(0.0, max(violations))
    return ValidationCheck("loewner_monotonicity", worst <= LOEWNER_TOL, worst, LOEWNER_TOL)


def check_mirror_and_center(plan: ValidationPlan) -> ValidationCheck:
    """Symmetric lines give mirror-symmetric bounds that peak at the centre."""
    worst = 0.0
    center_ok = True
    for g in (15, 16):
        report = peb_all(assemble_fim(plan.scenario(g, 2, 2).topology(), plan.radio, plan.path_loss))
        peb = report.peb_total
        worst = max(worst, float((np.abs(peb - peb[::-1]) / peb).max()))
        center_ok &= bool(peb[report.center_index - 1] >= peb.max() * (1.0 - SOLVER_TOL))
    return ValidationCheck(
        "mirror_symmetry_center_maximal",
        worst <= SOLVER_TOL and center_ok,
        worst,
        SOLVER_TOL,
        "" if center_ok else "centre agent is not the maximum",
    )


def check_determinism(plan: ValidationPlan) -> ValidationCheck:
    mc = MonteCarloSpec(n_trials=5, seed=plan.seed, orientation_mode=OrientationMode.UNIFORM_RANDOM)
    scenario = plan.scenario(20, 3, 2)
    first = monte_carlo_peb(scenario, mc)
    second = monte_carlo_peb(scenario, mc)
    same = np.array_equal(first.peb_total, second.peb_total)
    return ValidationCheck("seeded_determinism", same, 0.0 if same else math.inf, 0.0)


ALL_CHECKS: tuple[Callable[[ValidationPlan], ValidationCheck], ...] = (
    check_effective_bandwidth,
    check_oracle_blocks,
    check_corrupted_yy,
    check_role_swap,
    check_phi_invariance,
    check_gradients,
    check_one_hop_closed_form,
    check_scaled_block,
    check_two_hop_closed_form,
    check_banded_vs_dense,
    check_symmetric_psd,
    check_loewner_monotonicity,
    check_mirror_and_center,
    check_determinism,
)


def run_validation(plan: ValidationPlan | None = None) -> ValidationReport:
    """Run every cross-check and collect the results; failures are reported, not raised."""
    plan = plan or ValidationPlan()
    report = ValidationReport()
    with track_stage_latency("validation"):
        for check in ALL_CHECKS:
            result = check(plan)
            report.checks.append(result)
            log = logger.info if result.passed else logger.error
            log(f"{result.name}: {'PASS' if result.passed else 'FAIL'} (max rel error {result.max_rel_error:.3e})")
    return report
