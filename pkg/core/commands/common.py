"""Helpers shared by the subcommands: config loading, seeds, CSV rows and manifests."""

import json
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from config import settings
from errors import ConfigError
from schemas import ScenarioConfig, unknown_keys
from services.experiments import Scenario
from services.peb_solver import PebReport
from services.topology import NodeRole
from utils.logging import get_logger

# Setup logger
logger = get_logger("commands")

NODE_HEADER = ["node_index", "x_m", "role", "peb_total_m", "peb_x_m", "peb_y_m", "peb_z_m"]


def add_common_arguments(parser, *, seed: bool = True, config_required: bool = True) -> None:
    parser.add_argument("--config", required=config_required, help="Scenario configuration (JSON)")
    if seed:
        parser.add_argument("--seed", type=int, default=None, help="Master seed; generated when omitted")
    parser.add_argument("--out", default=None, help="Output directory (default RESULTS_DIR/<config name>)")


def load_config(path: str | Path) -> ScenarioConfig:
    """Read and validate a scenario configuration.

    Raises:
        ConfigError: The file is unreadable, not JSON, has unknown keys or fails validation.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}") from e
    try:
        config = ScenarioConfig.model_validate(data)
    except ValidationError as e:
        unknown = unknown_keys(e)
        if unknown:
            raise ConfigError(f"Unknown config keys in {path}: {', '.join(unknown)}") from e
        raise ConfigError(f"Invalid config {path}: {e}") from e
    logger.info(f"Loaded scenario {config.name!r} from {path}")
    return config


def build_scenario(config: ScenarioConfig, r_max_m: float | None = None) -> Scenario:
    """Scenario of a validated config, checked for feasibility before any work starts."""
    try:
        scenario = config.to_scenario(r_max_m)
        scenario.topology()
    except ValueError as e:
        raise ConfigError(f"Infeasible scenario {config.name!r}: {e}") from e
    return scenario


def resolve_seed(cli_seed: int | None, config: ScenarioConfig) -> int:
    """The --seed flag, else the config's seed, else a fresh 64-bit seed."""
    if cli_seed is not None:
        if cli_seed < 0:
            raise ConfigError(f"Seeds must be non-negative, got {cli_seed}")
        return cli_seed
    if config.monte_carlo.seed is not None:
        return config.monte_carlo.seed
    seed = int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
    logger.info(f"No seed given; generated {seed}")
    return seed


def output_dir(out: str | None, config: ScenarioConfig) -> Path:
    return Path(out) if out else Path(settings.RESULTS_DIR) / config.name


def node_rows(scenario: Scenario, report: PebReport) -> list[list]:
    """One row per node in line order; anchors have zero bounds."""
    rows = []
    for node in sorted(scenario.topology().nodes, key=lambda n: n.slot):
        if node.role is NodeRole.ANCHOR:
            bounds = [0.0, 0.0, 0.0, 0.0]
        else:
            p = report.node(node.index)
            bounds = [p.total, p.x, p.y, p.z]
        rows.append([node.index, float(node.position[0]), node.role.value, *bounds])
    return rows


def config_echo(config: ScenarioConfig, seed: int) -> dict:
    """The config as JSON with the resolved seed filled in, so the run can be repeated from it."""
    echo = config.model_dump(mode="json")
    echo["monte_carlo"]["seed"] = seed
    return echo


def build_manifest(
    command: str,
    config: ScenarioConfig | None,
    seed: int | None,
    solver_path: str | list[str],
    files: list[str],
    wall_time_s: float,
    **extra,
) -> dict:
    manifest = {
        "schema_version": settings.MANIFEST_SCHEMA_VERSION,
        "app_version": settings.APP_VERSION,
        "environment": settings.ENVIRONMENT,
        "command": command,
        "config": config_echo(config, seed) if config is not None else None,
        "seed": seed,
        "solver_path": solver_path,
        "files": files,
        "wall_time_s": wall_time_s,
    }
    manifest.update(extra)
    return manifest
