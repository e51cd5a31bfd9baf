"""Shared fixtures for unit tests."""

import pytest

from services.array_geometry import ArraySpec
from services.experiments import MonteCarloSpec, Scenario
from services.link_budget import PathLossKind, PathLossModel, RadioConfig


@pytest.fixture
def radio():
    """IEEE 802.11ad-style radio: 60 GHz, 2.16 GHz, roll-off 0.6, 20 dBm."""
    return RadioConfig()


@pytest.fixture
def free_space():
    return PathLossModel(kind=PathLossKind.FREE_SPACE)


@pytest.fixture
def absorbing():
    return PathLossModel(kind=PathLossKind.FREE_SPACE_ABSORPTION)


@pytest.fixture
def make_array(radio):
    """Factory for square arrays at half-wavelength spacing."""

    def _make(n_elements: int = 25) -> ArraySpec:
        return ArraySpec.square(n_elements, radio.wavelength / 2.0)

    return _make


@pytest.fixture
def make_scenario(radio, free_space, make_array):
    """Factory for generated lines with uniform arrays."""

    def _make(
        n_agents: int = 10,
        n_anchors: int = 2,
        hops: int = 1,
        n_elements: int = 25,
        path_loss: PathLossModel | None = None,
        **kwargs,
    ) -> Scenario:
        array = make_array(n_elements)
        return Scenario(
            n_agents=n_agents,
            n_anchors=n_anchors,
            delta=25.0,
            r_max=hops * 25.0,
            agent_array=array,
            anchor_array=array,
            radio=radio,
            path_loss=path_loss or free_space,
            **kwargs,
        )

    return _make


@pytest.fixture
def vertical_mc():
    """Deterministic protocol: vertical arrays, heights fixed at the midpoint."""
    return MonteCarloSpec(n_trials=1, seed=0, height_mode="fixed")
