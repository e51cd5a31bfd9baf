"""``validate``: oracle and solver cross-checks."""

import time
from pathlib import Path

from commands.common import add_common_arguments, build_manifest, load_config, output_dir
from config import settings
from errors import ValidationFailure
from services.peb_solver import SolverPath
from services.validation import ValidationPlan, run_validation
from utils.io import OutputStage
from utils.logging import get_logger

# Setup logger
logger = get_logger("validate_command")

REPORT_HEADER = ["check", "passed", "max_rel_error", "tolerance", "detail"]


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("validate", help="Run the validation suite")
    add_common_arguments(parser, seed=False, config_required=False)
    parser.set_defaults(handler=run)


def run(args) -> int:
    config = load_config(args.config) if args.config else None
    if config is not None:
        # the config contributes its radio and spacing; the plan keeps its own line sizes
        plan = ValidationPlan(delta=config.delta_m, radio=config.radio.to_radio())
        out = output_dir(args.out, config)
    else:
        plan = ValidationPlan()
        out = Path(args.out) if args.out else Path(settings.RESULTS_DIR) / "validate"
    start = time.perf_counter()

    report = run_validation(plan)

    rows = [[c.name, c.passed, c.max_rel_error, c.tolerance, c.detail] for c in report.checks]
    with OutputStage(out) as stage:
        stage.write_csv("validation.csv", REPORT_HEADER, rows)
        manifest = build_manifest(
            "validate",
            config,
            config.monte_carlo.seed if config is not None else None,
            [path.value for path in SolverPath],
            ["validation.csv"],
            time.perf_counter() - start,
            passed=report.passed,
            failed_checks=[c.name for c in report.failed()],
        )
        stage.write_json("manifest.json", manifest)
        stage.commit()

    if not report.passed:
        raise ValidationFailure(
            "Validation failed: " + "; ".join(f"{c.name} ({c.max_rel_error:.3e} > {c.tolerance:g})" for c in report.failed())
        )
    logger.info(f"All {len(report.checks)} validation checks passed")
    return 0
