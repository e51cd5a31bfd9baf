"""Tests for the banded solvers, the closed forms and singularity diagnosis."""

import math

import numpy as np
import pytest

from errors import SingularFimError, UnanchoredSubchain
from services.array_geometry import Orientation
from services.experiments import closed_form_params
from services.fim_core import assemble_fim
from services.peb_solver import (
    ClosedFormParams,
    NodePeb,
    PebReport,
    SolverPath,
    closed_form_1hop_center,
    closed_form_2hop_center,
    even_factor,
    footnote_factor,
    peb_all,
    peb_node,
    selected_inverse_diagonal,
    toeplitz_center_inverse,
    two_hop_p,
    two_hop_ratio,
)
from services.topology import build_line_topology


@pytest.fixture
def random_fim(radio, free_space, make_array):
    """FIM of a 12-agent, 3-anchor, 2-hop line with random orientations."""
    rng = np.random.default_rng(11)
    orientations = [Orientation(varphi=a, vartheta=b) for a, b in rng.uniform(0, 2 * math.pi, (15, 2))]
    topo = build_line_topology(12, 3, 25.0, 50.0, make_array(16), orientations=orientations)
    return assemble_fim(topo, radio, free_space)


class TestFactors:
    """Tests for the scalar closed-form factors."""

    def test_footnote_factor_small_values(self):
        """One agent between two anchors has factor 1; three agents give 2."""
        assert footnote_factor(1) == pytest.approx(1.0)
        assert footnote_factor(3) == pytest.approx(2.0)

    def test_two_agents_give_four_thirds(self):
        bound = closed_form_1hop_center(ClosedFormParams(j_a=np.diag([2.0, 3.0, 5.0]), n_agents=2))
        assert np.allclose(bound.crb, 4.0 / 3.0 * np.diag([1 / 2.0, 1 / 3.0, 1 / 5.0]), rtol=1e-15)
        assert bound.center_index == 1

    @pytest.mark.parametrize("g", [2, 4, 10, 160, 1000])
    def test_even_factor_agrees_for_even_g(self, g):
        assert footnote_factor(g) == pytest.approx(even_factor(g), rel=1e-14)

    @pytest.mark.parametrize("d1,n,c", [(2.5, 7, None), (2.5, 8, None), (3.1, 9, 2), (17.6, 50, None)])
    def test_toeplitz_center_inverse(self, d1, n, c):
        """Matches the dense inverse of tri{d1, 1}."""
        t = np.diag(np.full(n, d1)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
        index = ((n + 1) // 2 if c is None else c) - 1
        assert toeplitz_center_inverse(d1, n, c) == pytest.approx(np.linalg.inv(t)[index, index], rel=1e-12)

    def test_toeplitz_large_n_does_not_overflow(self):
        value = toeplitz_center_inverse(2.01, 100_000)
        assert math.isfinite(value)
        assert value > 0.0

    def test_toeplitz_requires_dominant_diagonal(self):
        with pytest.raises(ValueError):
            toeplitz_center_inverse(2.0, 5)

    def test_two_hop_p_is_negative_half(self):
        assert two_hop_p(4.0, 11) == pytest.approx(-0.5 * toeplitz_center_inverse(4.0, 11))

    def test_two_hop_ratio(self):
        assert two_hop_ratio(1.0, 0.2) == pytest.approx(0.05)


class TestPebReport:
    """Tests for PebReport and NodePeb."""

    def test_from_diagonals_pads_missing_coordinates(self):
        report = PebReport.from_crb_diagonals(np.array([[4.0], [9.0]]), SolverPath.BANDED)
        assert report.peb_x.tolist() == [2.0, 3.0]
        assert report.peb_y.tolist() == [0.0, 0.0]
        assert report.peb_total.tolist() == [2.0, 3.0]

    def test_center_and_worst(self):
        report = PebReport.from_crb_diagonals(np.array([[1.0, 1.0, 1.0], [4.0, 1.0, 4.0], [1.0, 9.0, 1.0], [1.0, 0.0, 0.0]]), SolverPath.DENSE)
        assert report.center_index == 2
        assert report.center().total == pytest.approx(3.0)
        assert report.worst("total").index == 3
        assert report.worst("per_coordinate").index == 3

    def test_statistic(self):
        p = NodePeb(index=1, total=5.0, x=1.0, y=4.0, z=3.0)
        assert p.statistic("total") == 5.0
        assert p.statistic("per_coordinate") == 4.0
        with pytest.raises(ValueError):
            p.statistic("median")


class TestSolvers:
    """Tests for peb_all and peb_node."""

    def test_banded_matches_dense(self, random_fim):
        banded = peb_all(random_fim, SolverPath.BANDED)
        dense = peb_all(random_fim, "dense")
        for coord in ("peb_x", "peb_y", "peb_z", "peb_total"):
            assert np.allclose(getattr(banded, coord), getattr(dense, coord), rtol=1e-9, atol=0)
        assert banded.solver_path is SolverPath.BANDED
        assert dense.solver_path is SolverPath.DENSE
        assert banded.condition_estimate > 0.0

    def test_selected_inverse_blocks(self, random_fim):
        """Diagonal blocks equal those of the dense inverse."""
        inverse = np.linalg.inv(random_fim.to_dense())
        for i, block in enumerate(selected_inverse_diagonal(random_fim)):
            expected = inverse[3 * i : 3 * i + 3, 3 * i : 3 * i + 3]
            scale = np.sqrt(np.outer(np.diag(expected), np.diag(expected)))
            assert np.all(np.abs(block - expected) <= 1e-8 * scale)

    def test_node_matches_all(self, random_fim):
        report = peb_all(random_fim)
        for index in (1, 6, 12):
            single = peb_node(random_fim, index)
            assert single.total == pytest.approx(report.node(index).total, rel=1e-9)
            assert single.y == pytest.approx(report.node(index).y, rel=1e-9)

    def test_node_index_range(self, random_fim):
        with pytest.raises(ValueError):
            peb_node(random_fim, 0)
        with pytest.raises(ValueError):
            peb_node(random_fim, 13)

    def test_unsupported_solver_path(self, random_fim):
        with pytest.raises(ValueError):
            peb_all(random_fim, SolverPath.CLOSED_FORM_1HOP)

    def test_ranging_only_report(self, radio, free_space, make_array):
        topo = build_line_topology(6, 2, 25.0, 25.0, make_array(1))
        report = peb_all(assemble_fim(topo, radio, free_space, ranging_only=True))
        assert np.all(report.peb_x > 0.0)
        assert np.all(report.peb_y == 0.0)
        assert np.array_equal(report.peb_total, report.peb_x)


class TestSingularFim:
    """Tests for the unanchored-subchain diagnosis."""

    @pytest.fixture
    def no_y_information(self, radio, free_space, make_array):
        """Every array turned so that no link carries y information."""
        topo = build_line_topology(
            5, 2, 25.0, 25.0, make_array(9), orientations=[Orientation(varphi=math.pi / 2)] * 7
        )
        fim = assemble_fim(topo, radio, free_space)
        fim.bands[..., 1, 1] = 0.0
        return fim

    def test_banded_names_unanchored_coordinate(self, no_y_information):
        with pytest.raises(SingularFimError) as exc_info:
            peb_all(no_y_information)
        subchains = exc_info.value.subchains
        assert subchains == [UnanchoredSubchain(first=1, last=5, coordinates=("y",))]
        assert "agents 1..5 (no anchor information in y)" in str(exc_info.value)

    def test_node_solver_reports_singularity(self, no_y_information):
        with pytest.raises(SingularFimError):
            peb_node(no_y_information, 3)

    def test_describe_single_agent(self):
        assert UnanchoredSubchain(4, 4, ("x", "z")).describe() == "agent 4 (no anchor information in x, z)"


class TestClosedForms:
    """Tests for the centre-agent closed forms against the banded solve."""

    @pytest.mark.parametrize("g", [1, 2, 7, 16, 41])
    def test_one_hop_is_exact(self, make_scenario, vertical_mc, radio, free_space, g):
        scenario = make_scenario(n_agents=g, n_anchors=2, hops=1)
        fim = assemble_fim(scenario.topology(), radio, free_space)
        center = (g + 1) // 2
        numeric = peb_node(fim, center)
        bound = closed_form_1hop_center(closed_form_params(scenario, vertical_mc))
        assert bound.center_index == center
        assert bound.solver_path is SolverPath.CLOSED_FORM_1HOP
        assert np.allclose(np.diag(bound.crb), [numeric.x**2, numeric.y**2, numeric.z**2], rtol=1e-9)
        assert bound.as_node().total == pytest.approx(numeric.total, rel=1e-9)

    @pytest.mark.parametrize("g", [20, 60, 200])
    def test_two_hop_within_ten_percent(self, make_scenario, vertical_mc, radio, absorbing, g):
        scenario = make_scenario(n_agents=g, n_anchors=2, hops=2, path_loss=absorbing)
        numeric = peb_node(assemble_fim(scenario.topology(), radio, absorbing), (g + 1) // 2).total
        params = closed_form_params(scenario, vertical_mc)
        assert params.d == pytest.approx(0.0567, abs=1e-4)
        bound = closed_form_2hop_center(params)
        assert abs(bound.peb - numeric) / numeric <= 0.10

    def test_two_hop_needs_ratio(self):
        with pytest.raises(ValueError):
            closed_form_2hop_center(ClosedFormParams(j_a=np.eye(3), n_agents=10))

    def test_params_validation(self):
        with pytest.raises(ValueError):
            ClosedFormParams(j_a=np.eye(3), n_agents=0)
        with pytest.raises(ValueError):
            ClosedFormParams(j_a=np.eye(3), n_agents=4, d=0.0)
