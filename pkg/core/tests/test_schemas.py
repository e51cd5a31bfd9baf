"""Tests for the JSON scenario configuration."""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from schemas import OrientationConfig, ScenarioConfig, unknown_keys
from services.experiments import HeightMode, OrientationMode, monte_carlo_peb
from services.link_budget import PathLossKind
from services.topology import NodeRole

PRESETS = Path(__file__).parent.parent / "presets"


def explicit_nodes(*roles):
    return [{"role": role, "slot": slot, "n_elements": 9} for slot, role in enumerate(roles)]


class TestScenarioConfig:
    """Tests for ScenarioConfig validation."""

    def test_defaults(self):
        config = ScenarioConfig()
        assert config.n_agents == 160
        assert config.n_anchors == 4
        assert config.radio.f_c_hz == 60e9
        assert config.path_loss.kind is PathLossKind.FREE_SPACE
        assert config.monte_carlo.seed is None
        assert config.curve_modes() == [OrientationMode.VERTICAL]
        assert config.hop_count() == 1

    def test_unknown_keys_are_reported_with_their_path(self):
        with pytest.raises(ValidationError) as exc_info:
            ScenarioConfig.model_validate({"radio": {"bogus": 1}, "n_agents": 4})
        assert unknown_keys(exc_info.value) == ["radio.bogus"]

    def test_orientation_needs_a_unit(self):
        with pytest.raises(ValidationError):
            OrientationConfig.model_validate({"varphi": 30})

    def test_orientation_units(self):
        degrees = OrientationConfig(unit="deg", varphi=90.0).to_orientation()
        radians = OrientationConfig(unit="rad", varphi=math.pi / 2).to_orientation()
        assert degrees.varphi == pytest.approx(radians.varphi)

    @pytest.mark.parametrize(
        "values",
        [
            {"n_elements": 24},
            {"anchor_n_elements": 50},
            {"r_max_m": 30.0},
            {"r_max_m": 10.0},
            {"r_max_sweep_m": [50.0, 60.0]},
            {"n_agents": 0},
            {"g_sweep": [10, 0]},
            {"monte_carlo": {"n_trials": 0}},
            {"monte_carlo": {"height_range_m": [0.2, 0.1]}},
            {"n_anchors": 3, "anchors_at": [0, 5]},
            {"anchors_at": [0, 5, 9, 12], "g_sweep": [10, 20]},
        ],
    )
    def test_invalid_configs(self, values):
        with pytest.raises(ValidationError):
            ScenarioConfig.model_validate(values)

    def test_r_max_multiple_within_rounding(self):
        assert ScenarioConfig(delta_m=0.1, r_max_m=0.30000000000000004).hop_count() == 3

    def test_explicit_nodes_set_counts(self):
        config = ScenarioConfig(nodes=explicit_nodes("anchor", "agent", "agent", "anchor"))
        assert config.n_agents == 2
        assert config.n_anchors == 2

    @pytest.mark.parametrize(
        "nodes",
        [
            [{"role": "anchor", "slot": 0}, {"role": "agent", "slot": 2}],
            [{"role": "agent", "slot": 0}, {"role": "agent", "slot": 1}],
            [{"role": "anchor", "slot": 0}, {"role": "agent", "slot": 0}],
        ],
    )
    def test_explicit_nodes_must_be_contiguous_with_both_roles(self, nodes):
        with pytest.raises(ValidationError):
            ScenarioConfig(nodes=nodes)


class TestToScenario:
    """Tests for converting a configuration into a Scenario."""

    def test_generated_line(self):
        config = ScenarioConfig(n_agents=8, n_anchors=2, r_max_m=50.0, n_elements=9, anchor_n_elements=36)
        scenario = config.to_scenario()
        assert scenario.hop_limit == 2
        assert scenario.agent_array.n_elements == 9
        assert scenario.anchor_array.n_elements == 36
        assert scenario.agent_array.element_spacing == pytest.approx(0.0025, rel=1e-3)
        topo = scenario.topology()
        assert topo.n_agents == 8

    def test_r_max_override(self):
        assert ScenarioConfig(r_max_m=25.0).to_scenario(75.0).hop_limit == 3

    def test_explicit_nodes(self):
        nodes = explicit_nodes("anchor", "agent", "anchor", "agent", "agent", "anchor")
        nodes[1]["orientation"] = {"unit": "deg", "varphi": 90.0}
        topo = ScenarioConfig(nodes=nodes).to_scenario().topology()
        by_slot = sorted(topo.nodes, key=lambda n: n.slot)
        assert [n.index for n in by_slot] == [4, 1, 5, 2, 3, 6]
        assert [n.role for n in by_slot][:2] == [NodeRole.ANCHOR, NodeRole.AGENT]
        assert by_slot[1].orientation.varphi == pytest.approx(math.pi / 2)
        assert float(by_slot[5].position[0]) == 125.0

    def test_explicit_node_height_defaults_to_range_midpoint(self):
        nodes = explicit_nodes("anchor", "agent", "anchor")
        nodes[2]["height_m"] = 0.3
        config = ScenarioConfig(nodes=nodes, monte_carlo={"height_range_m": [0.1, 0.2]})
        heights = [n.height for n in sorted(config.to_scenario().topology().nodes, key=lambda n: n.slot)]
        assert heights == pytest.approx([0.15, 0.15, 0.3])

    def test_explicit_nodes_on_the_ground_rejected_under_two_ray(self):
        nodes = explicit_nodes("anchor", "agent", "anchor")
        nodes[1]["height_m"] = 0.0
        with pytest.raises(ValidationError, match="above ground"):
            ScenarioConfig(nodes=nodes, path_loss={"kind": "two_ray_breakpoint"})
        assert ScenarioConfig(nodes=nodes).n_agents == 1

    def test_explicit_nodes_solve_under_two_ray_with_fixed_heights(self):
        config = ScenarioConfig(
            nodes=explicit_nodes("anchor", "agent", "agent", "anchor"),
            path_loss={"kind": "two_ray"},
            monte_carlo={"n_trials": 3, "height_mode": "fixed"},
        )
        report = monte_carlo_peb(config.to_scenario(), config.monte_carlo_spec(seed=1))
        assert np.all(np.isfinite(report.peb_total))
        assert np.all(report.peb_total > 0)

    def test_fixed_height_mode_keeps_explicit_heights(self):
        """Lower antennas past the break lose gain, so their bounds grow."""
        nodes = explicit_nodes("anchor", "agent", "agent", "anchor")
        lowered = [dict(n, height_m=0.11) for n in nodes]
        midpoint, low = (
            monte_carlo_peb(config.to_scenario(), config.monte_carlo_spec(seed=1)).peb_total
            for config in (
                ScenarioConfig(
                    nodes=n, path_loss={"kind": "two_ray_breakpoint"}, monte_carlo={"height_mode": "fixed"}
                )
                for n in (nodes, lowered)
            )
        )
        assert np.all(low > midpoint)

    def test_monte_carlo_spec_with_overrides(self):
        config = ScenarioConfig(monte_carlo={"n_trials": 7, "height_mode": "fixed"})
        mc = config.monte_carlo_spec(seed=42)
        assert (mc.n_trials, mc.seed, mc.height_mode) == (7, 42, HeightMode.FIXED)
        overridden = config.monte_carlo_spec(seed=42, orientation_mode=OrientationMode.UNIFORM_RANDOM)
        assert overridden.random_orientation

    def test_radio_section(self):
        radio = ScenarioConfig(radio={"tx_power_dbm": -8.0, "rolloff": 0.25}).radio.to_radio()
        assert radio.tx_power == pytest.approx(10 ** (-8.0 / 10) * 1e-3)
        assert radio.pulse.rolloff == 0.25

    def test_uwb_specs(self):
        specs = ScenarioConfig(uwb={"n_elements": [1, 4]}).uwb.to_specs()
        assert [s.n_elements for s in specs] == [1, 4]
        assert all(s.f_c == 4e9 for s in specs)


@pytest.mark.parametrize("path", sorted(PRESETS.glob("*.json")), ids=lambda p: p.stem)
def test_presets_validate(path):
    """Every shipped preset is a valid configuration named after its file."""
    config = ScenarioConfig.model_validate(json.loads(path.read_text()))
    assert config.name == path.stem
    config.to_scenario()


def test_presets_exist():
    assert len(list(PRESETS.glob("*.json"))) == 7
