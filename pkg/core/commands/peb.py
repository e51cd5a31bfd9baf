"""``peb``: per-node bounds for every configured curve, r_max and G sweep."""

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
from schemas import ScenarioConfig
from services.experiments import OrientationMode, center_peb_sweep, orientation_gap
from tasks.sweeps import peb_curve, report_from_payload, run_group
from utils.io import OutputStage
from utils.logging import get_logger

# Setup logger
logger = get_logger("peb_command")

SWEEP_HEADER = ["n_agents", "center_index", "peb_banded_m", "peb_closed_form_m", "closed_form", "relative_error"]


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("peb", help="Per-node position error bounds")
    add_common_arguments(parser)
    parser.set_defaults(handler=run)


def curve_file_name(config: ScenarioConfig, mode: str, r_max_m: float, single: bool) -> str:
    if single:
        return config.outputs.csv_name
    stem = config.outputs.csv_name.removesuffix(".csv")
    return f"{stem}_{mode}_rmax{r_max_m:g}m.csv"


def run(args) -> int:
    config = load_config(args.config)
    r_values = [config.r_max_m, *(config.r_max_sweep_m or [])]
    scenarios = {r: build_scenario(config, r) for r in r_values}
    seed = resolve_seed(args.seed, config)
    modes = config.curve_modes()
    start = time.perf_counter()

    calls = [
        {"config": config.model_dump(mode="json"), "seed": seed, "orientation_mode": mode.value, "r_max_m": r}
        for r in r_values
        for mode in modes
    ]
    results = run_group(peb_curve, calls)
    single = len(results) == 1

    with OutputStage(output_dir(args.out, config)) as stage:
        files, gaps, reports = [], {}, {}
        for result in results:
            report = report_from_payload(result["report"])
            reports[(result["orientation_mode"], result["r_max_m"])] = report
            name = curve_file_name(config, result["orientation_mode"], result["r_max_m"], single)
            stage.write_csv(name, NODE_HEADER, node_rows(scenarios[result["r_max_m"]], report))
            files.append(name)

        for r in r_values:
            vertical = reports.get((OrientationMode.VERTICAL.value, r))
            averaged = reports.get((OrientationMode.UNIFORM_RANDOM.value, r))
            if vertical is not None and averaged is not None:
                gaps[f"{r:g}"] = orientation_gap(vertical, averaged)
                logger.info(f"Vertical orientation lowers the mean PEB by {100 * gaps[f'{r:g}']:.1f}% at r_max={r:g} m")

        if config.g_sweep:
            mc = config.monte_carlo_spec(seed)
            rows = center_peb_sweep(scenarios[config.r_max_m], mc, sorted(config.g_sweep))
            stage.write_csv(
                "center_peb_vs_g.csv",
                SWEEP_HEADER,
                [[row.get(key, "") for key in SWEEP_HEADER] for row in rows],
            )
            files.append("center_peb_vs_g.csv")

        manifest = build_manifest(
            "peb",
            config,
            seed,
            sorted({report.solver_path.value for report in reports.values()}),
            files,
            time.perf_counter() - start,
            n_trials=config.monte_carlo.n_trials,
            curves=[m.value for m in modes],
            r_max_m=r_values,
            orientation_gap=gaps,
        )
        stage.write_json(config.outputs.manifest_name, manifest)
        stage.commit()
    return 0
