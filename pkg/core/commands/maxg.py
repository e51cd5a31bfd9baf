"""``maxg``: largest even agent count whose bound stays under the threshold."""

import itertools
import time

from commands.common import add_common_arguments, build_manifest, build_scenario, load_config, output_dir, resolve_seed
from errors import ConfigError
from services.experiments import max_g_search
from tasks.sweeps import max_g_cell, run_group
from utils.io import OutputStage
from utils.logging import get_logger

# Setup logger
logger = get_logger("maxg_command")

TABLE_HEADER = [
    "orientation_mode",
    "n_anchors",
    "n_elements",
    "hops",
    "r_max_m",
    "status",
    "g_max",
    "solver_path",
    "peb_per_coordinate_at_g_max_m",
    "peb_total_at_g_max_m",
    "peb_per_coordinate_at_g_max_plus_2_m",
    "peb_total_at_g_max_plus_2_m",
]


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("maxg", help="Maximum agent count under a PEB threshold")
    add_common_arguments(parser)
    parser.add_argument("--threshold", type=float, default=None, help="PEB threshold in meters (default 1.0)")
    parser.set_defaults(handler=run)


def _row(cell: dict, delta: float, result: dict) -> list:
    accepted = result.get("accepted") or {}
    rejected = result.get("rejected") or {}
    return [
        cell["orientation_mode"],
        cell["n_anchors"],
        cell["n_elements"],
        cell["hops"],
        cell["hops"] * delta,
        result["status"],
        result.get("g_max", 0),
        result.get("solver_path", ""),
        accepted.get("per_coordinate", ""),
        accepted.get("total", ""),
        rejected.get("per_coordinate", ""),
        rejected.get("total", ""),
    ]


def run(args) -> int:
    config = load_config(args.config)
    if args.threshold is not None:
        if args.threshold <= 0:
            raise ConfigError(f"--threshold must be positive, got {args.threshold}")
        config = config.model_copy(
            update={"max_g": config.max_g.model_copy(update={"threshold_m": args.threshold})}
        )
    if config.nodes is not None or config.anchors_at is not None:
        raise ConfigError("maxg resizes the line; drop nodes and anchors_at from the config")
    scenario = build_scenario(config)
    seed = resolve_seed(args.seed, config)
    start = time.perf_counter()

    if config.table is not None:
        table = config.table
        cells = [
            {"orientation_mode": mode.value, "n_anchors": w, "n_elements": n, "hops": hops}
            for mode, w, n, hops in itertools.product(
                table.orientation_modes, table.n_anchors, table.n_elements, table.hops
            )
        ]
        payload = config.model_dump(mode="json")
        results = run_group(max_g_cell, [{"config": payload, "seed": seed, "cell": cell} for cell in cells])
    else:
        mc = config.monte_carlo_spec(seed)
        found = max_g_search(
            scenario,
            mc,
            threshold=config.max_g.threshold_m,
            statistic=config.max_g.statistic,
            node=config.max_g.node,
        )
        cell = {
            "orientation_mode": mc.orientation_mode.value,
            "n_anchors": config.n_anchors,
            "n_elements": config.n_elements,
            "hops": config.hop_count(),
        }
        node_payload = {
            key: None if p is None else {"per_coordinate": p.statistic("per_coordinate"), "total": p.total}
            for key, p in (("accepted", found.accepted), ("rejected", found.rejected))
        }
        results = [
            {"cell": cell, "status": "ok", "g_max": found.g_max, "solver_path": found.solver_path.value, **node_payload}
        ]

    name = config.outputs.csv_name
    with OutputStage(output_dir(args.out, config)) as stage:
        stage.write_csv(name, TABLE_HEADER, [_row(r["cell"], config.delta_m, r) for r in results])
        manifest = build_manifest(
            "maxg",
            config,
            seed,
            sorted({r["solver_path"] for r in results if r["status"] == "ok"}),
            [name],
            time.perf_counter() - start,
            threshold_m=config.max_g.threshold_m,
            statistic=config.max_g.statistic,
            node=config.max_g.node.value,
            cells=[{**r["cell"], "status": r["status"], "g_max": r.get("g_max")} for r in results],
        )
        stage.write_json(config.outputs.manifest_name, manifest)
        stage.commit()
    for r in results:
        logger.info(f"{r['cell']}: {r['status']} g_max={r.get('g_max')}")
    return 0
