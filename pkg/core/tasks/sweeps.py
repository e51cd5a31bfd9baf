import numpy as np
from celery import group, shared_task

import celery_app  # noqa: F401  # binds shared tasks to the configured app
from errors import ThresholdUnreachableError
from schemas import ScenarioConfig
from services.experiments import max_g_search, monte_carlo_peb
from services.peb_solver import NodePeb, PebReport, SolverPath
from utils.logging import get_logger

logger = get_logger("sweeps")


def report_to_payload(report: PebReport) -> dict:
    return {
        "peb_total": report.peb_total.tolist(),
        "peb_x": report.peb_x.tolist(),
        "peb_y": report.peb_y.tolist(),
        "peb_z": report.peb_z.tolist(),
        "peb_total_std": None if report.peb_total_std is None else report.peb_total_std.tolist(),
        "solver_path": report.solver_path.value,
        "n_trials": report.n_trials,
        "seed": report.seed,
    }


def report_from_payload(payload: dict) -> PebReport:
    std = payload.get("peb_total_std")
    return PebReport(
        peb_total=np.asarray(payload["peb_total"]),
        peb_x=np.asarray(payload["peb_x"]),
        peb_y=np.asarray(payload["peb_y"]),
        peb_z=np.asarray(payload["peb_z"]),
        solver_path=SolverPath(payload["solver_path"]),
        n_trials=payload["n_trials"],
        seed=payload["seed"],
        peb_total_std=None if std is None else np.asarray(std),
    )


def _node_payload(node: NodePeb | None) -> dict | None:
    if node is None:
        return None
    return {
        "index": node.index,
        "total": node.total,
        "x": node.x,
        "y": node.y,
        "z": node.z,
        "per_coordinate": node.statistic("per_coordinate"),
    }


@shared_task
def peb_curve(config: dict, seed: int, orientation_mode: str, r_max_m: float) -> dict:
    """
    Monte Carlo PEB of every agent for one orientation mode and one r_max.

    Args:
        config: Validated scenario configuration, JSON-dumped.
        seed: Master seed of the run.
        orientation_mode: Orientation mode of this curve.
        r_max_m: Maximum link length of this curve.
    """
    scenario_config = ScenarioConfig.model_validate(config)
    mc = scenario_config.monte_carlo_spec(seed, orientation_mode=orientation_mode)
    report = monte_carlo_peb(scenario_config.to_scenario(r_max_m), mc)
    logger.info(f"Curve {orientation_mode} at r_max={r_max_m} m done ({mc.n_trials} trials)")
    return {"orientation_mode": orientation_mode, "r_max_m": r_max_m, "report": report_to_payload(report)}


@shared_task
def max_g_cell(config: dict, seed: int, cell: dict) -> dict:
    """
    Max-G search for one table cell.

    A cell overrides the orientation mode, anchor count, element count and hop
    limit of the base configuration. An unreachable threshold is reported in
    the result instead of failing the whole table.
    """
    base = ScenarioConfig.model_validate(config)
    cell_config = ScenarioConfig.model_validate(
        {
            **config,
            "n_anchors": cell["n_anchors"],
            "n_elements": cell["n_elements"],
            "anchor_n_elements": None,
            "anchors_at": None,
            "nodes": None,
            "r_max_m": cell["hops"] * base.delta_m,
            "r_max_sweep_m": None,
        }
    )
    n_trials = base.table.n_trials if base.table is not None else base.monte_carlo.n_trials
    mc = cell_config.monte_carlo_spec(seed, orientation_mode=cell["orientation_mode"], n_trials=n_trials)
    try:
        result = max_g_search(
            cell_config.to_scenario(),
            mc,
            threshold=base.max_g.threshold_m,
            statistic=base.max_g.statistic,
            node=base.max_g.node,
        )
    except ThresholdUnreachableError as e:
        logger.warning(f"Cell {cell}: {e}")
        return {"cell": cell, "status": "unreachable", "message": str(e)}

    logger.info(f"Cell {cell}: max G = {result.g_max}")
    return {
        "cell": cell,
        "status": "ok",
        "g_max": result.g_max,
        "solver_path": result.solver_path.value,
        "accepted": _node_payload(result.accepted),
        "rejected": _node_payload(result.rejected),
        "evaluations": {str(g): v for g, v in result.evaluations.items()},
    }


def run_group(task, kwargs_list: list[dict]) -> list[dict]:
    """Fan the calls out as a Celery group and collect the results in order."""
    job = group(task.s(**kwargs) for kwargs in kwargs_list).apply_async()
    # member results, since eager results have no backend to join on
    return [result.get() for result in job.results]
