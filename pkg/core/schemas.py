"""JSON scenario configuration.

Every model forbids unknown keys, so a typo is a hard error rather than a
silently ignored setting. Angles always carry an explicit unit.
"""

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from services.array_geometry import ArraySpec, Orientation, is_perfect_square
from services.experiments import (
    HeightMode,
    MonteCarloSpec,
    NodeSelector,
    OrientationMode,
    Scenario,
    UwbBaselineSpec,
)
from services.link_budget import OXYGEN_L0_60GHZ, PathLossKind, PathLossModel, RadioConfig
from services.topology import GeophoneNode, NodeRole
from services.waveform import PulseSpec
from utils.units import to_radians, wavelength


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _perfect_square(value: int) -> int:
    if not is_perfect_square(value):
        raise ValueError(f"element count must be a perfect square, got {value}")
    return value


class OrientationConfig(StrictModel):
    unit: Literal["deg", "rad"]
    varphi: float = 0.0
    vartheta: float = 0.0
    Phi: float = 0.0  # noqa: N815

    def to_orientation(self) -> Orientation:
        return Orientation(
            varphi=to_radians(self.varphi, self.unit),
            vartheta=to_radians(self.vartheta, self.unit),
            Phi=to_radians(self.Phi, self.unit),
        )


class RadioSection(StrictModel):
    f_c_hz: float = Field(default=60e9, gt=0)
    tx_power_dbm: float = 20.0
    noise_figure_db: float = 4.0
    system_temp_k: float = Field(default=300.0, gt=0)
    bandwidth_hz: float = Field(default=2.16e9, gt=0)
    rolloff: float = Field(default=0.6, ge=0, le=1)

    def to_radio(self) -> RadioConfig:
        return RadioConfig(
            f_c=self.f_c_hz,
            tx_power_dbm=self.tx_power_dbm,
            noise_figure_db=self.noise_figure_db,
            system_temp=self.system_temp_k,
            pulse=PulseSpec(bandwidth=self.bandwidth_hz, rolloff=self.rolloff),
        )


class PathLossSection(StrictModel):
    kind: PathLossKind = PathLossKind.FREE_SPACE
    l0: float = Field(default=OXYGEN_L0_60GHZ, ge=1.0)
    reflection_coefficient: float = -1.0

    def to_model(self) -> PathLossModel:
        return PathLossModel(kind=self.kind, l0=self.l0, reflection_coefficient=self.reflection_coefficient)


class MonteCarloSection(StrictModel):
    n_trials: int = Field(default=1000, ge=1)
    seed: int | None = Field(default=None, ge=0)
    orientation_mode: OrientationMode = OrientationMode.VERTICAL
    height_range_m: tuple[float, float] = (0.1, 0.2)
    height_mode: HeightMode = HeightMode.RANDOM

    @field_validator("height_range_m")
    @classmethod
    def check_height_range(cls, value):
        lo, hi = value
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError(f"height range must satisfy 0 <= lo <= hi <= 1 m, got {value}")
        return value


class NodeConfig(StrictModel):
    """One explicitly placed node; its position is slot * delta on the x-axis."""

    role: NodeRole
    slot: int = Field(ge=0)
    n_elements: int = 25
    orientation: OrientationConfig | None = None
    height_m: float | None = Field(default=None, ge=0.0, le=1.0)  # None: midpoint of the height range

    @field_validator("n_elements")
    @classmethod
    def check_elements(cls, value):
        return _perfect_square(value)


class MaxGSection(StrictModel):
    threshold_m: float = Field(default=1.0, gt=0)
    statistic: Literal["per_coordinate", "total"] = "per_coordinate"
    node: NodeSelector = NodeSelector.CENTER


class TableSection(StrictModel):
    """Grid of max-G cells: every combination of the listed values."""

    orientation_modes: list[OrientationMode] = [OrientationMode.VERTICAL, OrientationMode.UNIFORM_RANDOM]
    n_anchors: list[int] = [2, 4]
    n_elements: list[int] = [25, 36]
    hops: list[int] = [1, 2]
    n_trials: int = Field(default=200, ge=1)

    @field_validator("n_elements")
    @classmethod
    def check_elements(cls, value):
        for n in value:
            _perfect_square(n)
        return value

    @field_validator("n_anchors", "hops")
    @classmethod
    def check_positive(cls, value):
        if not value or any(v < 1 for v in value):
            raise ValueError(f"values must be positive integers, got {value}")
        return value


class UwbSection(StrictModel):
    f_c_hz: float = Field(default=4e9, gt=0)
    tx_power_dbm: float = -8.0
    n_elements: list[int] = [1, 25]
    bandwidth_hz: float = Field(default=2.16e9, gt=0)
    rolloff: float = Field(default=0.6, ge=0, le=1)

    @field_validator("n_elements")
    @classmethod
    def check_elements(cls, value):
        for n in value:
            _perfect_square(n)
        return value

    def to_specs(self) -> list[UwbBaselineSpec]:
        return [
            UwbBaselineSpec(
                f_c=self.f_c_hz,
                tx_power_dbm=self.tx_power_dbm,
                n_elements=n,
                bandwidth=self.bandwidth_hz,
                rolloff=self.rolloff,
            )
            for n in self.n_elements
        ]


class OutputsSection(StrictModel):
    csv_name: str = "peb.csv"
    manifest_name: str = "manifest.json"


class ScenarioConfig(StrictModel):
    """A linear deployment and the experiments to run on it.

    Attributes:
        n_agents: Number of agents G (ignored in favour of ``nodes`` when given).
        n_anchors: Number of anchors W.
        delta_m: Node spacing in meters.
        r_max_m: Maximum link length; an integer multiple of ``delta_m``.
        n_elements: Elements per agent array, a perfect square.
        anchor_n_elements: Elements per anchor array; defaults to ``n_elements``.
        anchors_at: Explicit anchor slots overriding the default placement.
        nodes: Explicit node list; replaces the generated line.
        curves: Orientation modes evaluated by ``peb``, one curve each.
        r_max_sweep_m: Extra r_max values evaluated by ``peb``.
        g_sweep: Agent counts of the centre-PEB-versus-G data.
    """

    name: str = "scenario"
    n_agents: int = Field(default=160, ge=1)
    n_anchors: int = Field(default=4, ge=1)
    delta_m: float = Field(default=25.0, gt=0)
    r_max_m: float = Field(default=25.0, gt=0)
    n_elements: int = 25
    anchor_n_elements: int | None = None
    anchors_at: list[int] | None = None
    nodes: list[NodeConfig] | None = None
    radio: RadioSection = RadioSection()
    path_loss: PathLossSection = PathLossSection()
    monte_carlo: MonteCarloSection = MonteCarloSection()
    curves: list[OrientationMode] | None = None
    r_max_sweep_m: list[float] | None = None
    g_sweep: list[int] | None = None
    max_g: MaxGSection = MaxGSection()
    table: TableSection | None = None
    uwb: UwbSection = UwbSection()
    outputs: OutputsSection = OutputsSection()

    @field_validator("n_elements")
    @classmethod
    def check_elements(cls, value):
        return _perfect_square(value)

    @field_validator("anchor_n_elements")
    @classmethod
    def check_anchor_elements(cls, value):
        return None if value is None else _perfect_square(value)

    @field_validator("g_sweep")
    @classmethod
    def check_g_sweep(cls, value):
        if value is not None and any(g < 1 for g in value):
            raise ValueError(f"agent counts must be positive, got {value}")
        return value

    @model_validator(mode="after")
    def check_geometry(self):
        for r_max in [self.r_max_m, *(self.r_max_sweep_m or [])]:
            hops = r_max / self.delta_m
            if hops < 1.0 - 1e-9:
                raise ValueError(f"r_max ({r_max} m) must be at least delta ({self.delta_m} m)")
            if abs(hops - round(hops)) > 1e-9:
                raise ValueError(f"r_max ({r_max} m) must be an integer multiple of delta ({self.delta_m} m)")
        if self.nodes is not None:
            slots = [n.slot for n in self.nodes]
            if sorted(slots) != list(range(len(slots))):
                raise ValueError(f"explicit nodes must fill slots 0..{len(slots) - 1} once each, got {sorted(slots)}")
            roles = [n.role for n in self.nodes]
            if NodeRole.AGENT not in roles or NodeRole.ANCHOR not in roles:
                raise ValueError("explicit node lists need at least one agent and one anchor")
            if self.path_loss.kind.is_two_ray and any(n.height_m == 0.0 for n in self.nodes):
                raise ValueError("two-ray propagation needs antennas above ground; height_m must be positive")
            self.n_agents = roles.count(NodeRole.AGENT)
            self.n_anchors = roles.count(NodeRole.ANCHOR)
        elif self.anchors_at is not None and len(self.anchors_at) != self.n_anchors:
            raise ValueError(f"anchors_at lists {len(self.anchors_at)} slots for {self.n_anchors} anchors")
        if self.g_sweep and (self.nodes is not None or self.anchors_at is not None):
            raise ValueError("g_sweep needs a generated line; drop nodes and anchors_at")
        return self

    @property
    def spacing(self) -> float:
        return wavelength(self.radio.f_c_hz) / 2.0

    def curve_modes(self) -> list[OrientationMode]:
        return list(self.curves or [self.monte_carlo.orientation_mode])

    def monte_carlo_spec(self, seed: int, **overrides) -> MonteCarloSpec:
        section = self.monte_carlo
        values = {
            "n_trials": section.n_trials,
            "seed": seed,
            "orientation_mode": section.orientation_mode,
            "height_range": tuple(section.height_range_m),
            "height_mode": section.height_mode,
        }
        values.update(overrides)
        return MonteCarloSpec(**values)

    def _explicit_nodes(self, agent_array: ArraySpec) -> tuple[GeophoneNode, ...]:
        ordered = sorted(self.nodes, key=lambda n: n.slot)
        n_agents = sum(1 for n in ordered if n.role is NodeRole.AGENT)
        next_agent, next_anchor = 1, n_agents + 1
        midpoint = 0.5 * sum(self.monte_carlo.height_range_m)
        built = []
        for node in ordered:
            if node.role is NodeRole.AGENT:
                index, next_agent = next_agent, next_agent + 1
            else:
                index, next_anchor = next_anchor, next_anchor + 1
            built.append(
                GeophoneNode(
                    index=index,
                    role=node.role,
                    position=np.array([node.slot * self.delta_m, 0.0, 0.0]),
                    array=ArraySpec.square(node.n_elements, agent_array.element_spacing),
                    orientation=node.orientation.to_orientation() if node.orientation else Orientation(),
                    height=node.height_m if node.height_m is not None else midpoint,
                    slot=node.slot,
                )
            )
        return tuple(built)

    def to_scenario(self, r_max_m: float | None = None) -> Scenario:
        agent_array = ArraySpec.square(self.n_elements, self.spacing)
        anchor_array = ArraySpec.square(self.anchor_n_elements or self.n_elements, self.spacing)
        return Scenario(
            n_agents=self.n_agents,
            n_anchors=self.n_anchors,
            delta=self.delta_m,
            r_max=r_max_m or self.r_max_m,
            agent_array=agent_array,
            anchor_array=anchor_array,
            radio=self.radio.to_radio(),
            path_loss=self.path_loss.to_model(),
            anchors_at=tuple(self.anchors_at) if self.anchors_at is not None else None,
            nodes=self._explicit_nodes(agent_array) if self.nodes is not None else None,
        )

    def hop_count(self, r_max_m: float | None = None) -> int:
        return int(round((r_max_m or self.r_max_m) / self.delta_m))


def unknown_keys(error) -> list[str]:
    """Dotted locations of every ``extra_forbidden`` error in a pydantic ValidationError."""
    return [
        ".".join(str(part) for part in item["loc"])
        for item in error.errors()
        if item["type"] == "extra_forbidden"
    ]
