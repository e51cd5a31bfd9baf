"""``mc``: Monte Carlo mean bounds and their across-trial spread."""

import time

from commands.common import (
    NODE_HEADER,
    add_common_arguments,
    build_manifest,
    build_scenario,
    load_config,
    node_rows,
    output_dir,
    resolve_seed,
)
from errors import ConfigError
from services.experiments import monte_carlo_peb
from utils.io import OutputStage
from utils.logging import get_logger

# Setup logger
logger = get_logger("mc_command")


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("mc", help="Monte Carlo averaged bounds")
    add_common_arguments(parser)
    parser.add_argument("--trials", type=int, default=None, help="Number of trials (overrides the config)")
    parser.set_defaults(handler=run)


def run(args) -> int:
    config = load_config(args.config)
    scenario = build_scenario(config)
    seed = resolve_seed(args.seed, config)
    if args.trials is not None and args.trials < 1:
        raise ConfigError(f"--trials must be at least 1, got {args.trials}")
    if args.trials is not None:
        # echo the override so the manifest config reproduces this run
        section = config.monte_carlo.model_copy(update={"n_trials": args.trials})
        config = config.model_copy(update={"monte_carlo": section})
    mc = config.monte_carlo_spec(seed)
    start = time.perf_counter()

    report = monte_carlo_peb(scenario, mc)
    rows = node_rows(scenario, report)
    std = {i + 1: float(s) for i, s in enumerate(report.peb_total_std)}
    for row in rows:
        row.append(std.get(row[0], 0.0) if row[2] == "agent" else 0.0)
    logger.info(f"Mean centre PEB {report.center().total:.4f} m over {mc.n_trials} trials")

    with OutputStage(output_dir(args.out, config)) as stage:
        stage.write_csv(config.outputs.csv_name, [*NODE_HEADER, "peb_total_std_m"], rows)
        manifest = build_manifest(
            "mc",
            config,
            seed,
            report.solver_path.value,
            [config.outputs.csv_name],
            time.perf_counter() - start,
            n_trials=mc.n_trials,
            orientation_mode=mc.orientation_mode.value,
            height_mode=mc.height_mode.value,
        )
        stage.write_json(config.outputs.manifest_name, manifest)
        stage.commit()
    return 0
