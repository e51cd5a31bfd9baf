"""Linear topologies: agents and anchors on the x-axis at spacing delta."""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from services.array_geometry import VERTICAL, ArraySpec, Orientation
from utils.logging import get_logger

# Setup logger
logger = get_logger("topology")


class NodeRole(str, Enum):
    AGENT = "agent"
    ANCHOR = "anchor"


@dataclass(frozen=True)
class GeophoneNode:
    """One radio node on the line.

    Attributes:
        index: Agents are numbered 1..G and anchors G+1..G+W.
        role: Agent (unknown position) or anchor (known position).
        position: Array centroid in meters; (slot * delta, 0, 0) on the line.
        array: Uniform planar array carried by the node.
        orientation: Array orientation angles.
        height: Antenna height above ground in meters, used by two-ray propagation.
        slot: Position on the line in units of delta.
    """

    index: int
    role: NodeRole
    position: np.ndarray = field(compare=False)
    array: ArraySpec
    orientation: Orientation = VERTICAL
    height: float = 0.0
    slot: int = 0

    @property
    def n_elements(self) -> int:
        return self.array.n_elements

    @property
    def is_agent(self) -> bool:
        return self.role is NodeRole.AGENT


@dataclass(frozen=True)
class Topology:
    """Nodes of a linear deployment ordered by slot.

    Attributes:
        nodes: Every node, sorted by slot.
        delta: Inter-node spacing in meters.
        r_max: Maximum feasible link length in meters.
    """

    nodes: tuple[GeophoneNode, ...]
    delta: float
    r_max: float

    @property
    def agents(self) -> list[GeophoneNode]:
        return sorted((n for n in self.nodes if n.is_agent), key=lambda n: n.index)

    @property
    def anchors(self) -> list[GeophoneNode]:
        return sorted((n for n in self.nodes if not n.is_agent), key=lambda n: n.index)

    @property
    def n_agents(self) -> int:
        return sum(1 for n in self.nodes if n.is_agent)

    @property
    def n_anchors(self) -> int:
        return len(self.nodes) - self.n_agents

    @property
    def hop_limit(self) -> int:
        """Largest slot separation with a feasible link, floor(r_max / delta)."""
        return int(math.floor(self.r_max / self.delta * (1.0 + 1e-12)))

    @property
    def center_agent(self) -> int:
        """1-based index of the centre agent, ceil(G / 2)."""
        return (self.n_agents + 1) // 2

    def slot_arrays(self) -> dict[str, np.ndarray]:
        """Per-slot node attributes as arrays, for vectorized assembly."""
        ordered = sorted(self.nodes, key=lambda n: n.slot)
        return {
            "x": np.array([n.position[0] for n in ordered]),
            "is_agent": np.array([n.is_agent for n in ordered]),
            "n_elements": np.array([n.n_elements for n in ordered], dtype=float),
            "varphi": np.array([n.orientation.varphi for n in ordered]),
            "vartheta": np.array([n.orientation.vartheta for n in ordered]),
            "height": np.array([n.height for n in ordered]),
        }


def anchor_slots(n_agents: int, n_anchors: int) -> list[int]:
    """Line slots of the anchors: both endpoints plus evenly spaced interior slots.

    Anchor k (1-based) sits at round((k - 1)(G + W - 1) / (W - 1)) with halves
    rounded up. A single anchor takes slot 0.
    """
    if n_anchors < 1:
        raise ValueError(f"At least one anchor is required, got {n_anchors}")
    if n_anchors == 1:
        return [0]
    last = n_agents + n_anchors - 1
    slots = [math.floor((k - 1) * last / (n_anchors - 1) + 0.5) for k in range(1, n_anchors + 1)]
    if len(set(slots)) != len(slots):
        raise ValueError(f"Cannot place {n_anchors} anchors among {n_agents} agents")
    return slots


def build_line_topology(
    n_agents: int,
    n_anchors: int,
    delta: float,
    r_max: float,
    agent_array: ArraySpec,
    anchor_array: ArraySpec | None = None,
    *,
    anchors_at: Sequence[int] | None = None,
    orientations: Sequence[Orientation] | None = None,
    heights: Sequence[float] | None = None,
) -> Topology:
    """Lay G agents and W anchors on the x-axis.

    Args:
        n_agents: Number of agents G.
        n_anchors: Number of anchors W.
        delta: Spacing between adjacent slots in meters.
        r_max: Maximum link length in meters; must be at least delta.
        agent_array: Array carried by every agent.
        anchor_array: Array carried by every anchor; defaults to the agent array.
        anchors_at: Explicit anchor slots overriding the default placement.
        orientations: Per-slot orientations (length G + W); vertical when omitted.
        heights: Per-slot antenna heights (length G + W); zero when omitted.
    """
    if n_agents < 1:
        raise ValueError(f"At least one agent is required, got {n_agents}")
    if delta <= 0:
        raise ValueError(f"Spacing must be positive, got {delta}")
    if r_max < delta:
        raise ValueError(f"r_max ({r_max}) must be at least the spacing ({delta})")

    n_slots = n_agents + n_anchors
    slots = list(anchors_at) if anchors_at is not None else anchor_slots(n_agents, n_anchors)
    if len(slots) != n_anchors or len(set(slots)) != n_anchors:
        raise ValueError(f"Expected {n_anchors} distinct anchor slots, got {slots}")
    if any(s < 0 or s >= n_slots for s in slots):
        raise ValueError(f"Anchor slots must lie in [0, {n_slots - 1}], got {slots}")
    if orientations is not None and len(orientations) != n_slots:
        raise ValueError(f"Expected {n_slots} orientations, got {len(orientations)}")
    if heights is not None and len(heights) != n_slots:
        raise ValueError(f"Expected {n_slots} heights, got {len(heights)}")

    anchor_array = anchor_array or agent_array
    anchor_set = set(slots)
    nodes = []
    next_agent, next_anchor = 1, n_agents + 1
    for slot in range(n_slots):
        is_anchor = slot in anchor_set
        if is_anchor:
            index, next_anchor = next_anchor, next_anchor + 1
        else:
            index, next_agent = next_agent, next_agent + 1
        nodes.append(
            GeophoneNode(
                index=index,
                role=NodeRole.ANCHOR if is_anchor else NodeRole.AGENT,
                position=np.array([slot * delta, 0.0, 0.0]),
                array=anchor_array if is_anchor else agent_array,
                orientation=orientations[slot] if orientations is not None else VERTICAL,
                height=float(heights[slot]) if heights is not None else 0.0,
                slot=slot,
            )
        )

    topology = Topology(nodes=tuple(nodes), delta=delta, r_max=r_max)
    logger.debug(
        f"Built topology with {n_agents} agents, {n_anchors} anchors at slots {sorted(slots)}, "
        f"hop limit {topology.hop_limit}"
    )
    return topology


@dataclass(frozen=True)
class TrialState:
    """Per-slot random draws of one Monte Carlo trial; None keeps the configured value."""

    varphi: np.ndarray | None = None
    vartheta: np.ndarray | None = None
    Phi: np.ndarray | None = None  # noqa: N815
    height: np.ndarray | None = None

    def apply(self, slots: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Copy of ``slots`` with the drawn attributes substituted."""
        updated = dict(slots)
        for key in ("varphi", "vartheta", "height"):
            value = getattr(self, key)
            if value is not None:
                updated[key] = value
        return updated

    def orientations(self) -> list[Orientation] | None:
        if self.varphi is None:
            return None
        return [
            Orientation(varphi=a, vartheta=b, Phi=c)
            for a, b, c in zip(self.varphi, self.vartheta, self.Phi, strict=True)
        ]


def draw_trial_state(
    rng: np.random.Generator,
    n_slots: int,
    random_orientation: bool,
    height_range: tuple[float, float] | None,
) -> TrialState:
    """Draw per-slot orientations and heights for one Monte Carlo trial.

    Orientations draw varphi, vartheta and Phi uniformly on [0, 2*pi); Phi is
    drawn even though the bound does not depend on it. Heights draw uniformly
    on ``height_range``. Draw order is fixed so a trial depends only on its generator.
    """
    varphi = vartheta = phi_x = height = None
    if random_orientation:
        angles = rng.uniform(0.0, 2.0 * np.pi, size=(n_slots, 3))
        varphi, vartheta, phi_x = angles[:, 0], angles[:, 1], angles[:, 2]
    if height_range is not None:
        height = rng.uniform(height_range[0], height_range[1], size=n_slots)
    return TrialState(varphi=varphi, vartheta=vartheta, Phi=phi_x, height=height)
