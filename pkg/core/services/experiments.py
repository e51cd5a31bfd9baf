"""Monte Carlo averaging, the max-G search and the UWB ranging baseline."""

import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from config import settings
from errors import NumericalError, ThresholdUnreachableError
from services.array_geometry import VERTICAL, ArraySpec, Orientation
from services.fim_core import assemble_from_slots, fim_link_block, link_gammas
from services.link_budget import PathLossModel, RadioConfig
from services.peb_solver import (
    ClosedFormParams,
    NodePeb,
    PebReport,
    SolverPath,
    closed_form_1hop_center,
    closed_form_2hop_center,
    peb_all,
    peb_node,
    two_hop_ratio,
)
from services.topology import GeophoneNode, NodeRole, Topology, TrialState, build_line_topology, draw_trial_state
from services.waveform import PulseSpec
from utils.logging import get_logger
from utils.monitoring import LAST_MAX_G, MONTE_CARLO_TRIALS_TOTAL, track_stage_latency
from utils.units import linear_to_db

# Setup logger
logger = get_logger("experiments")


class OrientationMode(str, Enum):
    VERTICAL = "vertical"
    UNIFORM_RANDOM = "uniform_random"


class HeightMode(str, Enum):
    RANDOM = "random"
    FIXED = "fixed"  # every node at the midpoint of the height range


class NodeSelector(str, Enum):
    CENTER = "center"
    WORST = "worst"


@dataclass(frozen=True)
class MonteCarloSpec:
    """Monte Carlo protocol.

    Attributes:
        n_trials: Number of trials averaged.
        seed: Master seed; trial t uses ``default_rng([seed, t])``.
        orientation_mode: Keep configured orientations or draw them uniformly per trial.
        height_range: Antenna height interval in meters, used by two-ray propagation.
        height_mode: Draw heights per trial or fix them at the midpoint.
    """

    n_trials: int = 1000
    seed: int = 0
    orientation_mode: OrientationMode = OrientationMode.VERTICAL
    height_range: tuple[float, float] = (0.1, 0.2)
    height_mode: HeightMode = HeightMode.RANDOM

    def __post_init__(self):
        object.__setattr__(self, "orientation_mode", OrientationMode(self.orientation_mode))
        object.__setattr__(self, "height_mode", HeightMode(self.height_mode))
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be at least 1, got {self.n_trials}")
        lo, hi = self.height_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError(f"Height range must satisfy 0 <= lo <= hi <= 1 m, got {self.height_range}")

    @property
    def random_orientation(self) -> bool:
        return self.orientation_mode is OrientationMode.UNIFORM_RANDOM

    @property
    def fixed_height(self) -> float:
        return 0.5 * (self.height_range[0] + self.height_range[1])


@dataclass(frozen=True)
class UwbBaselineSpec:
    """Ranging-only baseline radio."""

    f_c: float = 4e9
    tx_power_dbm: float = -8.0
    n_elements: int = 1
    bandwidth: float = 2.16e9
    rolloff: float = 0.6


@dataclass(frozen=True)
class Scenario:
    """A linear deployment together with its radio and propagation model.

    Either generated from counts (agents, anchors and the placement rule) or
    given as an explicit node list.
    """

    n_agents: int
    n_anchors: int
    delta: float
    r_max: float
    agent_array: ArraySpec
    anchor_array: ArraySpec
    radio: RadioConfig
    path_loss: PathLossModel
    anchors_at: tuple[int, ...] | None = None
    nodes: tuple[GeophoneNode, ...] | None = field(default=None, compare=False)

    @property
    def hop_limit(self) -> int:
        return int(math.floor(self.r_max / self.delta * (1.0 + 1e-12)))

    def topology(self, orientations: list[Orientation] | None = None, heights=None) -> Topology:
        if self.nodes is not None:
            return Topology(nodes=self.nodes, delta=self.delta, r_max=self.r_max)
        return build_line_topology(
            self.n_agents,
            self.n_anchors,
            self.delta,
            self.r_max,
            self.agent_array,
            self.anchor_array,
            anchors_at=self.anchors_at,
            orientations=orientations,
            heights=heights,
        )

    def with_agents(self, n_agents: int) -> "Scenario":
        if self.nodes is not None or self.anchors_at is not None:
            raise ValueError("Scenarios with explicit nodes or anchor slots cannot be resized")
        return replace(self, n_agents=n_agents)

    def with_radio(self, radio: RadioConfig, n_elements: int | None = None) -> "Scenario":
        if n_elements is None:
            return replace(self, radio=radio)
        array = ArraySpec.square(n_elements, self.agent_array.element_spacing)
        nodes = tuple(replace(n, array=array) for n in self.nodes) if self.nodes is not None else None
        return replace(self, radio=radio, agent_array=array, anchor_array=array, nodes=nodes)


def _draws_heights(scenario: Scenario, mc: MonteCarloSpec) -> bool:
    return scenario.path_loss.kind.is_two_ray and mc.height_mode is HeightMode.RANDOM


def is_deterministic(scenario: Scenario, mc: MonteCarloSpec) -> bool:
    """True when no trial draws anything, so one solve stands for every trial."""
    return not mc.random_orientation and not _draws_heights(scenario, mc)


def _base_slots(scenario: Scenario, mc: MonteCarloSpec) -> dict[str, np.ndarray]:
    slots = scenario.topology().slot_arrays()
    # explicit node lists carry their own heights
    if scenario.nodes is None and scenario.path_loss.kind.is_two_ray and mc.height_mode is HeightMode.FIXED:
        slots["height"] = np.full_like(slots["height"], mc.fixed_height)
    return slots


def _trial_slots(scenario: Scenario, mc: MonteCarloSpec, base: dict, trial: int) -> dict:
    rng = np.random.default_rng([mc.seed, trial])
    state: TrialState = draw_trial_state(
        rng,
        base["x"].size,
        mc.random_orientation,
        mc.height_range if _draws_heights(scenario, mc) else None,
    )
    return state.apply(base)


def _assemble(scenario: Scenario, slots: dict, ranging_only: bool, x_only: bool = False):
    fim = assemble_from_slots(
        slots, scenario.delta, scenario.hop_limit, scenario.radio, scenario.path_loss, ranging_only=ranging_only
    )
    return fim.coordinate(0) if x_only and not ranging_only else fim


def _fsum_mean(stack: np.ndarray) -> np.ndarray:
    """Mean over axis 0 with compensated summation."""
    n = stack.shape[0]
    flat = stack.reshape(n, -1)
    return np.array([math.fsum(flat[:, j]) / n for j in range(flat.shape[1])]).reshape(stack.shape[1:])


def monte_carlo_peb(
    scenario: Scenario,
    mc: MonteCarloSpec,
    *,
    ranging_only: bool = False,
    x_only: bool = False,
    solver: SolverPath = SolverPath.BANDED,
) -> PebReport:
    """Arithmetic mean of per-trial PEBs for every agent.

    Each trial draws orientations and heights for every node from its own
    generator, so the result depends only on the master seed. With ``x_only``
    just the x-coordinate system is solved, which stays regular for
    single-element arrays that carry no angular information.
    """
    base = _base_slots(scenario, mc)
    if is_deterministic(scenario, mc):
        report = peb_all(_assemble(scenario, base, ranging_only, x_only), solver)
        MONTE_CARLO_TRIALS_TOTAL.inc(mc.n_trials)
        return replace(
            report, n_trials=mc.n_trials, seed=mc.seed, peb_total_std=np.zeros_like(report.peb_total)
        )

    per_trial = []
    with track_stage_latency("monte_carlo"):
        for trial in range(mc.n_trials):
            slots = _trial_slots(scenario, mc, base, trial)
            report = peb_all(_assemble(scenario, slots, ranging_only, x_only), solver)
            per_trial.append(np.stack([report.peb_total, report.peb_x, report.peb_y, report.peb_z]))
            if trial and trial % 100 == 0:
                logger.debug(f"Monte Carlo trial {trial}/{mc.n_trials}")
    MONTE_CARLO_TRIALS_TOTAL.inc(mc.n_trials)

    stack = np.stack(per_trial)
    mean = _fsum_mean(stack)
    logger.info(f"Averaged {mc.n_trials} trials for G={scenario.n_agents} (seed {mc.seed})")
    return PebReport(
        peb_total=mean[0],
        peb_x=mean[1],
        peb_y=mean[2],
        peb_z=mean[3],
        solver_path=solver,
        n_trials=mc.n_trials,
        seed=mc.seed,
        peb_total_std=stack[:, 0, :].std(axis=0),
    )


def orientation_gap(vertical: PebReport, averaged: PebReport) -> float:
    """Mean relative PEB reduction across agents when orientations are vertical."""
    if vertical.n_agents != averaged.n_agents:
        raise ValueError("Reports cover different agent counts")
    return float(np.mean((averaged.peb_total - vertical.peb_total) / averaged.peb_total))


def _mean_node(nodes: list[NodePeb]) -> NodePeb:
    n = len(nodes)
    return NodePeb(
        index=nodes[0].index,
        total=math.fsum(p.total for p in nodes) / n,
        x=math.fsum(p.x for p in nodes) / n,
        y=math.fsum(p.y for p in nodes) / n,
        z=math.fsum(p.z for p in nodes) / n,
    )


def is_symmetric_line(scenario: Scenario, mc: MonteCarloSpec) -> bool:
    """Closed forms apply: deterministic, endpoint anchors only, uniform arrays."""
    return (
        is_deterministic(scenario, mc)
        and scenario.nodes is None
        and scenario.anchors_at is None
        and scenario.n_anchors == 2
        and scenario.agent_array.n_elements == scenario.anchor_array.n_elements
    )


def closed_form_params(scenario: Scenario, mc: MonteCarloSpec, n_agents: int | None = None) -> ClosedFormParams:
    """J_A and the 2-hop ratio d for a symmetric line with vertical arrays."""
    height = mc.fixed_height if scenario.path_loss.kind.is_two_ray else 0.0
    pair = [
        GeophoneNode(
            index=i + 1,
            role=NodeRole.AGENT,
            position=np.array([i * scenario.delta, 0.0, 0.0]),
            array=scenario.agent_array,
            orientation=VERTICAL,
            height=height,
            slot=i,
        )
        for i in range(2)
    ]
    radio = scenario.radio
    gamma_1, gamma_2 = link_gammas(
        radio, scenario.path_loss, np.array([scenario.delta, 2.0 * scenario.delta]), height, height
    )
    logger.debug(
        f"Closed-form link SNRs: {linear_to_db(float(gamma_1)):.1f} dB at delta, "
        f"{linear_to_db(float(gamma_2)):.1f} dB at 2 delta"
    )
    j_a = 4.0 * fim_link_block(pair[0], pair[1], float(gamma_1), radio.beta, radio.f_c)
    return ClosedFormParams(
        j_a=j_a,
        n_agents=n_agents or scenario.n_agents,
        d=two_hop_ratio(float(gamma_1), float(gamma_2)),
    )


def center_closed_form(scenario: Scenario, mc: MonteCarloSpec, n_agents: int | None = None):
    """Closed-form centre bound for 1-hop (exact) or 2-hop (approximate) symmetric lines."""
    params = closed_form_params(scenario, mc, n_agents)
    if scenario.hop_limit == 1:
        return closed_form_1hop_center(params)
    if scenario.hop_limit == 2:
        return closed_form_2hop_center(params)
    raise ValueError(f"No closed form for hop limit {scenario.hop_limit}")


def _evaluator(
    scenario: Scenario, mc: MonteCarloSpec, node: NodeSelector, statistic: str
) -> Callable[[int], NodePeb]:
    def evaluate(n_agents: int) -> NodePeb:
        sized = scenario.with_agents(n_agents)
        if node is NodeSelector.CENTER and sized.hop_limit == 1 and is_symmetric_line(sized, mc):
            return center_closed_form(sized, mc).as_node()

        base = _base_slots(sized, mc)
        center = (n_agents + 1) // 2
        deterministic = is_deterministic(sized, mc)
        trials = 1 if deterministic else mc.n_trials
        results = []
        for trial in range(trials):
            slots = base if deterministic else _trial_slots(sized, mc, base, trial)
            fim = _assemble(sized, slots, ranging_only=False)
            if node is NodeSelector.CENTER:
                results.append(peb_node(fim, center))
            else:
                results.append(peb_all(fim))
        MONTE_CARLO_TRIALS_TOTAL.inc(trials)
        if node is NodeSelector.CENTER:
            return _mean_node(results)
        averaged = [
            _mean_node([r.node(i) for r in results]) for i in range(1, n_agents + 1)
        ]
        return max(averaged, key=lambda p: p.statistic(statistic))

    return evaluate


def _search_solver_path(scenario: Scenario, mc: MonteCarloSpec, node: NodeSelector) -> SolverPath:
    if node is NodeSelector.WORST:
        return SolverPath.BANDED
    if scenario.hop_limit == 1 and is_symmetric_line(scenario, mc):
        return SolverPath.CLOSED_FORM_1HOP
    return SolverPath.BANDED_NODE


@dataclass(frozen=True)
class MaxGResult:
    """Outcome of the max-G search.

    Attributes:
        g_max: Largest even G whose acceptance statistic stays within the threshold.
        accepted: Averaged bounds of the accepted node at g_max.
        rejected: Averaged bounds at the first rejected G (g_max + 2), when evaluated.
        evaluations: Statistic value per evaluated G.
    """

    g_max: int
    threshold: float
    statistic: str
    node: NodeSelector
    accepted: NodePeb
    rejected: NodePeb | None
    evaluations: dict[int, float]
    solver_path: SolverPath


def max_g_search(
    scenario: Scenario,
    mc: MonteCarloSpec,
    threshold: float = 1.0,
    statistic: str = "per_coordinate",
    node: NodeSelector | str = NodeSelector.CENTER,
) -> MaxGResult:
    """Largest even G with the acceptance statistic at or below ``threshold``.

    Doubles G from 2 until the threshold is exceeded, then bisects on even
    values. Symmetric deterministic 1-hop lines use the closed form for the
    centre node; everything else is solved numerically and averaged over trials.

    Raises:
        ThresholdUnreachableError: The statistic already exceeds the threshold at G = 2.
        NumericalError: The threshold is still met at ``settings.MAX_G_LIMIT``.
    """
    node = NodeSelector(node)
    if statistic not in ("total", "per_coordinate"):
        raise ValueError(f"Unknown statistic {statistic!r}")
    evaluate = _evaluator(scenario, mc, node, statistic)
    solver_path = _search_solver_path(scenario, mc, node)
    cache: dict[int, NodePeb] = {}

    def value(g: int) -> float:
        if g not in cache:
            cache[g] = evaluate(g)
            logger.debug(f"G={g}: {statistic} bound {cache[g].statistic(statistic):.4f} m")
        return cache[g].statistic(statistic)

    with track_stage_latency("max_g_search"):
        if value(2) > threshold:
            raise ThresholdUnreachableError(
                f"Bound {value(2):.4f} m at G=2 already exceeds the {threshold} m threshold"
            )
        lo, hi = 2, 4
        while value(hi) <= threshold:
            lo, hi = hi, hi * 2
            if hi > settings.MAX_G_LIMIT:
                raise NumericalError(f"Threshold still met at G={lo}; raise MAX_G_LIMIT to search further")
        logger.info(f"Bracketed max G in [{lo}, {hi}]")
        while hi - lo > 2:
            mid = (lo + hi) // 4 * 2
            if value(mid) <= threshold:
                lo = mid
            else:
                hi = mid

    LAST_MAX_G.set(lo)
    return MaxGResult(
        g_max=lo,
        threshold=threshold,
        statistic=statistic,
        node=node,
        accepted=cache[lo],
        rejected=cache.get(lo + 2),
        evaluations={g: cache[g].statistic(statistic) for g in sorted(cache)},
        solver_path=solver_path,
    )


def uwb_scenario(scenario: Scenario, spec: UwbBaselineSpec) -> Scenario:
    """The same line operated by the ranging-only baseline radio.

    Oxygen absorption is a 60 GHz effect, so the baseline keeps only the
    spreading part of the configured propagation model.
    """
    radio = RadioConfig(
        f_c=spec.f_c,
        tx_power_dbm=spec.tx_power_dbm,
        noise_figure_db=scenario.radio.noise_figure_db,
        system_temp=scenario.radio.system_temp,
        pulse=PulseSpec(bandwidth=spec.bandwidth, rolloff=spec.rolloff),
    )
    path_loss = replace(scenario.path_loss, kind=scenario.path_loss.kind.without_absorption())
    return replace(scenario.with_radio(radio, spec.n_elements), path_loss=path_loss)


def uwb_toa_peb(scenario: Scenario, spec: UwbBaselineSpec, mc: MonteCarloSpec) -> PebReport:
    """x-coordinate bounds of the ranging-only baseline on the same line.

    Each directed link carries range information 8 pi^2 beta^2 gamma N_t N_r / c^2,
    the inverse squared TOA accuracy c / (2 sqrt(2) pi beta sqrt(SNR)) with the
    SNR raised by beamforming at both ends.
    """
    return monte_carlo_peb(uwb_scenario(scenario, spec), mc, ranging_only=True)


def matched_snr_ratio(scenario: Scenario, mc: MonteCarloSpec, n_elements: int) -> tuple[float, float]:
    """Measured and predicted ratio of array x-bounds to single-antenna ranging bounds.

    Both systems share the radio, noise and per-link SNR; the prediction is
    1 / (N sqrt(1 + f_c^2 / beta^2)).
    """
    single = scenario.with_radio(scenario.radio, 1)
    arrayed = scenario.with_radio(scenario.radio, n_elements)
    fixed = replace(mc, orientation_mode=OrientationMode.VERTICAL, height_mode=HeightMode.FIXED)
    ranging = monte_carlo_peb(single, fixed, ranging_only=True)
    mmwave = monte_carlo_peb(arrayed, fixed)
    center = ranging.center_index
    measured = mmwave.node(center).x / ranging.node(center).x
    beta, f_c = scenario.radio.beta, scenario.radio.f_c
    predicted = 1.0 / (n_elements * math.sqrt(1.0 + f_c**2 / beta**2))
    return measured, predicted


def center_peb_sweep(scenario: Scenario, mc: MonteCarloSpec, g_values: list[int]) -> list[dict]:
    """Centre bound against G from the closed form and from the banded solve."""
    fixed = replace(mc, orientation_mode=OrientationMode.VERTICAL, height_mode=HeightMode.FIXED)
    rows = []
    for g in g_values:
        sized = scenario.with_agents(g)
        fim = _assemble(sized, _base_slots(sized, fixed), ranging_only=False)
        numeric = peb_node(fim, (g + 1) // 2)
        row = {"n_agents": g, "center_index": numeric.index, "peb_banded_m": numeric.total}
        if is_symmetric_line(sized, fixed) and sized.hop_limit in (1, 2):
            bound = center_closed_form(sized, fixed)
            row["peb_closed_form_m"] = bound.peb
            row["closed_form"] = bound.solver_path.value
            row["relative_error"] = abs(bound.peb - numeric.total) / numeric.total
        rows.append(row)
    return rows
