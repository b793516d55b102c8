from __future__ import annotations

import multiprocessing
import time
import typing

from stirring_py_utils.stirring_logging import get_logger

from ..tree_core import StirringError
from .constants import EstimatorName
from .estimators import aggregate, run_single
from .records import EstimateRecord, ExperimentConfig, RunOutcome

logger = get_logger(__name__)

RNG_PROVENANCE = {
    "bit_generator": "Philox",
    "edge_streams": "SeedSequence(entropy=run_seed, spawn_key=vertex key words + redraw)",
    "run_seed": "blake2b(f'{master_seed}:{run_index}', digest_size=8), little-endian",
}


def _run_task(task: typing.Tuple[str, int]) -> RunOutcome:
    config_json, run_index = task
    return run_single(ExperimentConfig.parse_raw(config_json), run_index)


def run_outcomes(cfg: ExperimentConfig, jobs: int = 1) -> typing.List[RunOutcome]:
    """
    :return: The outcome of every run, in run-index order whatever the number of jobs.
    """
    config_json = cfg.json()
    tasks = [(config_json, run_index) for run_index in range(cfg.n_runs)]
    if 1 == jobs:
        return [_run_task(task) for task in tasks]
    chunk_size = max(1, len(tasks) // (4 * jobs))
    with multiprocessing.Pool(jobs) as pool:
        return list(pool.imap(_run_task, tasks, chunksize=chunk_size))


def run_experiment(
    cfg: ExperimentConfig, jobs: int = 1
) -> typing.Tuple[typing.List[RunOutcome], EstimateRecord]:
    start_time = time.time()
    logger.info(f"Running {cfg.n_runs} runs of {cfg.estimator} at T={cfg.T} with {jobs} jobs.")
    outcomes = run_outcomes(cfg, jobs)
    estimate = aggregate(cfg, outcomes)
    duration = time.time() - start_time
    logger.info(
        f"{cfg.estimator} at T={cfg.T}: {estimate.successes}/{estimate.n}"
        f" (censored depth={estimate.censored_depth}, budget={estimate.censored_budget},"
        f" horizon={estimate.censored_horizon}) in {duration:.2f}s."
    )
    if estimate.violates_bound():
        logger.error(
            f"{cfg.estimator} at T={cfg.T}: estimate {estimate.estimate:.4f} is below the"
            f" proved bound {estimate.bound:.4f} by more than three standard errors."
        )
    return outcomes, estimate


def sweep_T(
    cfg: ExperimentConfig, grid: typing.List[float], jobs: int = 1
) -> typing.Tuple[typing.List[RunOutcome], typing.List[EstimateRecord]]:
    """
    Runs the configured estimator at every T of the grid. Runs share their seeds across the
    grid, so each run's environments are nested in T. A cell that cannot run is reported in
    the table with its error.
    """
    if 0 == len(grid):
        raise ValueError("The grid cannot be empty.")
    if any(later <= earlier for earlier, later in zip(grid, grid[1:])):
        raise ValueError("The grid must be strictly increasing.")

    all_outcomes = []
    records = []
    for T in grid:
        try:
            cell_cfg = cfg.with_T(T)
            outcomes, estimate = run_experiment(cell_cfg, jobs)
        except (StirringError, ValueError) as ex:
            logger.error(f"Sweep cell T={T} failed: {ex}")
            records.append(EstimateRecord.from_error(cfg.estimator, T, cfg.master_seed, str(ex)))
            continue
        all_outcomes.extend(outcomes)
        records.append(estimate)
    return all_outcomes, records


def _estimate_with(cfg: ExperimentConfig, jobs: int, **updates) -> EstimateRecord:
    values = cfg.dict()
    values.update(updates)
    _, estimate = run_experiment(ExperimentConfig.parse_obj(values), jobs)
    return estimate


def estimate_useful_bar_count(cfg: ExperimentConfig, jobs: int = 1) -> EstimateRecord:
    """:return: The estimate, whose histogram holds the observed |U_{0,T}|."""
    return _estimate_with(cfg, jobs, estimator=EstimatorName.USEFUL_BAR_COUNT)


def estimate_frontier_departure(cfg: ExperimentConfig, jobs: int = 1) -> EstimateRecord:
    return _estimate_with(cfg, jobs, estimator=EstimatorName.FRONTIER_DEPARTURE)


def estimate_return_probability(
    cfg: ExperimentConfig, s0: float, jobs: int = 1
) -> EstimateRecord:
    """:return: The estimated probability of no return to the root in [s0, horizon]."""
    return _estimate_with(cfg, jobs, estimator=EstimatorName.RETURN_PROBABILITY, s0=s0)


def cycle_length_survey(cfg: ExperimentConfig, jobs: int = 1) -> EstimateRecord:
    """
    :return: The histogram of finite root-cycle lengths, in periods, with the censored mass
    as the estimate.
    """
    return _estimate_with(cfg, jobs, estimator=EstimatorName.CYCLE_LENGTH_SURVEY)
