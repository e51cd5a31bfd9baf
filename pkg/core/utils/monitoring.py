import time
from contextlib import contextmanager

from prometheus_client import REGISTRY, Counter, Gauge, Histogram, write_to_textfile

from config import settings
from utils.logging import get_logger

# Setup logger
logger = get_logger("monitoring")

# Counters
FIM_ASSEMBLIES_TOTAL = Counter("fim_assemblies_total", "Total number of assembled FIMs")
SOLVES_TOTAL = Counter("solves_total", "Total number of PEB solves", ["solver_path"])
SOLVER_FAILURES_TOTAL = Counter(
    "solver_failures_total", "Total number of failed PEB solves", ["solver_path", "error_type"]
)
MONTE_CARLO_TRIALS_TOTAL = Counter(
    "monte_carlo_trials_total", "Total number of Monte Carlo trials evaluated"
)
ORACLE_EVALUATIONS_TOTAL = Counter(
    "oracle_evaluations_total", "Total number of numeric FIM block evaluations", ["wrt"]
)

# Gauges
ACTIVE_SOLVES = Gauge("active_solves", "Number of solves in progress")
LAST_MAX_G = Gauge("last_max_g", "Largest agent count found by the last threshold search")

# Histograms
SOLVE_LATENCY = Histogram("solve_latency_seconds", "PEB solve latency in seconds", ["solver_path"])
STAGE_LATENCY = Histogram(
    "stage_latency_seconds", "Latency of pipeline stages in seconds", ["stage"]
)


@contextmanager
def track_stage_latency(stage):
    """
    Context manager to track the latency of a named pipeline stage.
    """
    start_time = time.perf_counter()
    try:
        yield
    finally:
        latency = time.perf_counter() - start_time
        STAGE_LATENCY.labels(stage=stage).observe(latency)
        logger.debug(f"Stage {stage} took {latency:.4f} seconds")


class SolverMetrics:
    """
    Context manager to track solver metrics.
    """

    def __init__(self, solver_path):
        self.solver_path = solver_path
        self.start_time: float | None = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        SOLVES_TOTAL.labels(solver_path=self.solver_path).inc()
        ACTIVE_SOLVES.inc()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.start_time is None:
            return False

        latency = time.perf_counter() - self.start_time
        SOLVE_LATENCY.labels(solver_path=self.solver_path).observe(latency)
        ACTIVE_SOLVES.dec()

        if exc_type is not None:
            error_type = exc_type.__name__
            SOLVER_FAILURES_TOTAL.labels(solver_path=self.solver_path, error_type=error_type).inc()
            logger.warning(f"Solver {self.solver_path} failed: {error_type} - {exc_val}")
        else:
            logger.debug(f"Solver {self.solver_path} completed in {latency:.4f} seconds")

        return False  # Don't suppress exceptions


def export_metrics(path: str | None = None) -> str | None:
    """
    Write the default registry in Prometheus text format for node-exporter style scraping.

    Falls back to settings.METRICS_TEXTFILE; does nothing when neither is set.
    """
    target = path or settings.METRICS_TEXTFILE
    if not target:
        return None
    write_to_textfile(target, REGISTRY)
    logger.info(f"Metrics written to {target}")
    return target
