#!/usr/bin/env python3

import argparse
import csv
import json
import logging
import pathlib
import sys
import time
import typing
from importlib import metadata

from stirring_py_utils.core import read_yaml_config_file
from stirring_py_utils.stirring_config import (
    LOG_FILE_NAME,
    load_stirring_config,
    RUN_RECORD_FILE_NAME,
    StirringConfig,
)
from stirring_py_utils.stirring_logging import (
    add_file_handler,
    get_logger,
    get_valid_logging_level,
    set_logging_level,
)

from stirring_sim.bar_process import BarStore, FixedBarStore, load_bar_file, realized_bars
from stirring_sim.bounds import BOUNDS_CSV_HEADER, classify_T
from stirring_sim.experiments.constants import EstimatorName, ExitStatus, WINDOW_ESTIMATORS
from stirring_sim.experiments.estimators import run_trajectory
from stirring_sim.experiments.executor import RNG_PROVENANCE, run_experiment, sweep_T
from stirring_sim.experiments.records import (
    EstimateRecord,
    ExperimentConfig,
    load_run_record,
    RunOutcome,
    RunRecord,
    write_bounds_csv,
    write_histogram_csv,
    write_run_record,
    write_sweep_csv,
)
from stirring_sim.meander import QueryBeyondHorizon, run_meander, write_trajectory_dump
from stirring_sim.renewal import srg_density_estimate, strong_renewal_density
from stirring_sim.stirring_perm import (
    compose_transpositions,
    meander_permutation,
    permutation_to_json,
    write_permutation,
)
from stirring_sim.tree_core import (
    PRESET_TREES,
    StirringError,
    TreeHandle,
    TreeKind,
    TreeSpec,
)
from stirring_sim.useful_bars import check_report, useful_bars_at, useful_bars_between

logger = get_logger("stirring")

PACKAGE_LOGGER_PREFIX = "stirring_sim"
CODE_VERSION_FALLBACK = "0.0.3-dev"
# Horizon, in periods, used when a window estimator is run without one
DEFAULT_HORIZON_PERIODS = 50
HISTOGRAM_FILE_NAME = "histogram.csv"
SWEEP_FILE_NAME = "sweep.csv"
BOUNDS_FILE_NAME = "bounds.csv"
PERMUTATION_FILE_NAME = "permutation.json"
USEFUL_FILE_NAME = "useful.json"
RENEWAL_FILE_NAME = "renewal.json"
REPLAY_FILE_NAME = "replay.json"


def _code_version() -> str:
    try:
        return metadata.version("stirring-sim")
    except metadata.PackageNotFoundError:
        return CODE_VERSION_FALLBACK


def _setup_logging(config: StirringConfig):
    log_file_handler = add_file_handler(logger, config.out / LOG_FILE_NAME)
    set_logging_level(logger, config.logging_level)
    for name, package_logger in logging.root.manager.loggerDict.items():
        if not name.startswith(PACKAGE_LOGGER_PREFIX):
            continue
        if not isinstance(package_logger, logging.Logger):
            continue
        package_logger.addHandler(log_file_handler)
        set_logging_level(package_logger, config.logging_level)


def build_tree_spec(config: StirringConfig) -> TreeSpec:
    """
    :return: The tree named by config.tree (a preset name, a YAML tree file or an inline
    mapping), or the regular tree given by d0 or d.
    """
    tree = config.tree
    if tree is None:
        if config.d0 is not None:
            return TreeSpec(kind=TreeKind.ANGEL_REGULAR, d0=config.d0, depth_cap=config.depth_cap)
        return TreeSpec(kind=TreeKind.REGULAR_OFFSPRING, d=config.d, depth_cap=config.depth_cap)
    if isinstance(tree, str):
        if tree in PRESET_TREES:
            return PRESET_TREES[tree]()
        tree_file_path = pathlib.Path(tree)
        if not tree_file_path.exists():
            raise ValueError(f"'{tree}' is neither a preset tree nor a tree file.")
        tree = read_yaml_config_file(tree_file_path)
    values = dict(tree)
    if TreeKind.EXPLICIT_FINITE != values.get("kind"):
        values.setdefault("depth_cap", config.depth_cap)
    return TreeSpec.parse_obj(values)


def build_experiment_config(
    config: StirringConfig,
    estimator: EstimatorName,
    starred: typing.Optional[bool],
    longest_T: typing.Optional[float] = None,
) -> ExperimentConfig:
    longest_T = config.T if longest_T is None else longest_T
    horizon = config.horizon
    needs_horizon = estimator in WINDOW_ESTIMATORS or EstimatorName.RETURN_PROBABILITY == estimator
    if horizon is None and needs_horizon:
        horizon = DEFAULT_HORIZON_PERIODS * longest_T
    return ExperimentConfig(
        tree=build_tree_spec(config),
        T=config.T,
        n_runs=config.runs,
        budget=config.budget,
        horizon=horizon,
        master_seed=config.seed,
        estimator=estimator,
        s0=config.s0,
        starred=starred,
        max_episodes=config.max_episodes,
        bars_file=None if config.bars is None else str(config.bars),
    )


def _make_record(
    command: str,
    cfg: ExperimentConfig,
    grid: typing.Optional[typing.List[float]],
    outcomes: typing.List[RunOutcome],
    estimates: typing.List[EstimateRecord],
    start_time: float,
) -> RunRecord:
    return RunRecord(
        command=command,
        experiment_config=cfg,
        grid=grid,
        code_version=_code_version(),
        outcomes=outcomes,
        estimates=estimates,
        wall_clock_seconds=time.time() - start_time,
        rng=RNG_PROVENANCE,
    )


def _check_results(
    cfg: ExperimentConfig,
    outcomes: typing.List[RunOutcome],
    estimates: typing.List[EstimateRecord],
    out_dir: pathlib.Path,
) -> int:
    offending = next((outcome for outcome in outcomes if outcome.violations), None)
    if offending is not None:
        for violation in offending.violations:
            logger.error(f"Run {offending.run_index}: {violation}")
        dump_file_path = out_dir / f"violation-run-{offending.run_index}.tsv"
        traj = run_trajectory(cfg.with_T(offending.T), offending.run_seed)
        write_trajectory_dump(dump_file_path, traj, offending.run_seed)
        logger.error(f"Offending trajectory written to {dump_file_path}.")
        return ExitStatus.INVARIANT_VIOLATION
    if any(estimate.violates_bound() for estimate in estimates):
        return ExitStatus.INVARIANT_VIOLATION
    return ExitStatus.SUCCESS


def _estimator_from(config: StirringConfig, default: typing.Optional[EstimatorName]):
    if config.estimator is None:
        if default is None:
            raise ValueError(f"estimator is required; one of {'|'.join(EstimatorName)}.")
        return default
    return EstimatorName(config.estimator)


def simulate(config: StirringConfig, parsed_args: argparse.Namespace) -> int:
    estimator = _estimator_from(config, EstimatorName.CYCLE_LENGTH_SURVEY)
    cfg = build_experiment_config(config, estimator, parsed_args.starred)
    start_time = time.time()
    outcomes, estimate = run_experiment(cfg, config.jobs)
    write_run_record(
        config.out / RUN_RECORD_FILE_NAME,
        _make_record("simulate", cfg, None, outcomes, [estimate], start_time),
    )
    if estimate.histogram:
        write_histogram_csv(config.out / HISTOGRAM_FILE_NAME, estimate.histogram)
    print(estimate.json())
    return _check_results(cfg, outcomes, [estimate], config.out)


def sweep(config: StirringConfig, parsed_args: argparse.Namespace) -> int:
    estimator = _estimator_from(config, None)
    if config.grid is None:
        raise ValueError("grid is required for a sweep.")
    grid = config.grid
    cfg = build_experiment_config(
        config.with_overrides({"T": grid[0]}), estimator, parsed_args.starred, grid[-1]
    )
    start_time = time.time()
    outcomes, records = sweep_T(cfg, grid, config.jobs)
    write_run_record(
        config.out / RUN_RECORD_FILE_NAME,
        _make_record("sweep", cfg, grid, outcomes, records, start_time),
    )
    write_sweep_csv(config.out / SWEEP_FILE_NAME, records)
    for record in records:
        print(",".join(record.sweep_row()))
    return _check_results(cfg, outcomes, records, config.out)


def replay(config: StirringConfig, parsed_args: argparse.Namespace) -> int:
    record = load_run_record(pathlib.Path(parsed_args.record))
    cfg = record.experiment_config
    start_time = time.time()
    if record.grid is None:
        outcomes, estimate = run_experiment(cfg, config.jobs)
        estimates = [estimate]
    else:
        outcomes, estimates = sweep_T(cfg, record.grid, config.jobs)
    replayed = _make_record(record.command, cfg, record.grid, outcomes, estimates, start_time)
    write_run_record(config.out / REPLAY_FILE_NAME, replayed)
    if replayed.tallies() != record.tallies():
        logger.error(f"Replay of {parsed_args.record} does not reproduce its tallies.")
        return ExitStatus.INVARIANT_VIOLATION
    logger.info(f"Replay of {parsed_args.record} reproduced its tallies.")
    return ExitStatus.SUCCESS


def perm(config: StirringConfig, parsed_args: argparse.Namespace) -> int:
    tree = TreeHandle(build_tree_spec(config))
    if not tree.spec.is_finite:
        raise ValueError("perm needs a finite tree.")
    if config.bars is not None:
        bars = load_bar_file(config.bars, tree)
    else:
        bars = realized_bars(BarStore(tree, config.T, config.seed), tree.vertices())

    by_meander = meander_permutation(tree, bars, config.T)
    by_composition = compose_transpositions(tree, bars)
    write_permutation(config.out / PERMUTATION_FILE_NAME, by_meander)
    print(permutation_to_json(by_meander))
    if by_meander != by_composition:
        logger.error(
            f"Meander and composition disagree: {by_meander} versus {by_composition}."
        )
        return ExitStatus.INVARIANT_VIOLATION
    return ExitStatus.SUCCESS


def useful(config: StirringConfig, parsed_args: argparse.Namespace) -> int:
    t = parsed_args.t
    s = parsed_args.s
    if not t > 0:
        raise ValueError("t must be greater than 0.")
    tree = TreeHandle(build_tree_spec(config))
    if config.bars is not None:
        store = FixedBarStore(tree, config.T, load_bar_file(config.bars, tree))
    else:
        store = BarStore(tree, config.T, config.seed)
    horizon = config.horizon if config.horizon is not None else t + config.T
    traj = run_meander(store, (tree.root, 0.0), budget=config.budget, horizon=horizon)
    try:
        if s is None:
            report = useful_bars_at(traj, t)
        else:
            report = useful_bars_between(traj, s, t)
    except QueryBeyondHorizon:
        logger.error(f"The run ended with {traj.verdict.to_str()} before time {t}.")
        return ExitStatus.USAGE_ERROR

    config.out.mkdir(parents=True, exist_ok=True)
    with open(config.out / USEFUL_FILE_NAME, "w") as useful_file:
        json.dump(report.to_dict(), useful_file, indent=2)
    print(json.dumps(report.to_dict()))

    violations = check_report(report)
    if violations:
        for violation in violations:
            logger.error(violation)
        write_trajectory_dump(config.out / "violation.tsv", traj, config.seed)
        return ExitStatus.INVARIANT_VIOLATION
    return ExitStatus.SUCCESS


def renewal(config: StirringConfig, parsed_args: argparse.Namespace) -> int:
    estimate = srg_density_estimate(config.beta, config.n, config.replicas, config.seed)
    result = {
        "beta": config.beta,
        "n": config.n,
        "replicas": config.replicas,
        "seed": config.seed,
        "mean": estimate.mean,
        "lo99": estimate.lo99,
        "hi99": estimate.hi99,
        "standard_error": estimate.standard_error,
        "limit": strong_renewal_density(config.beta),
    }
    config.out.mkdir(parents=True, exist_ok=True)
    with open(config.out / RENEWAL_FILE_NAME, "w") as renewal_file:
        json.dump(result, renewal_file, indent=2)
    print(json.dumps(result))
    return ExitStatus.SUCCESS


def bounds(config: StirringConfig, parsed_args: argparse.Namespace) -> int:
    d0 = config.d0 if config.d0 is not None else config.d + 1
    grid = config.grid if config.grid is not None else [config.T]
    rows = [(d0, T, classify_T(d0, T, config.quad_tol)) for T in grid]
    config.out.mkdir(parents=True, exist_ok=True)
    write_bounds_csv(config.out / BOUNDS_FILE_NAME, rows)
    writer = csv.writer(sys.stdout)
    writer.writerow(BOUNDS_CSV_HEADER)
    for row_d0, T, classification in rows:
        writer.writerow(classification.csv_row(row_d0, T))
    return ExitStatus.SUCCESS


COMMANDS = {
    "simulate": simulate,
    "perm": perm,
    "useful": useful,
    "renewal": renewal,
    "bounds": bounds,
    "sweep": sweep,
    "replay": replay,
}


def _common_args_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", "-c", help="Config file: flat `key = value`, or YAML (.yml/.yaml)."
    )
    common.add_argument("--d", type=int, help="Offspring per vertex of the regular tree.")
    common.add_argument("--d0", type=int, help="Vertex degree of the regular tree.")
    common.add_argument("--T", type=float, help="Period of cyclic time.")
    common.add_argument("--runs", type=int, help="Number of independent runs.")
    common.add_argument("--seed", type=int, help="Master seed.")
    common.add_argument("--depth-cap", type=int, help="Depth at which runs are censored.")
    common.add_argument("--budget", type=int, help="Maximum crossings recorded per run.")
    common.add_argument("--horizon", type=float, help="Clock at which runs are censored.")
    common.add_argument("--jobs", type=int, help="Number of worker processes.")
    common.add_argument("--out", type=pathlib.Path, help="Output directory.")
    common.add_argument("--tree", help="Preset tree name or YAML tree file.")
    common.add_argument("--bars", type=pathlib.Path, help="Bar file fixing the environment.")
    common.add_argument(
        "--estimator", choices=[str(name) for name in EstimatorName], help="Estimator to run."
    )
    common.add_argument("--grid", help="Comma-separated, increasing values of T.")
    common.add_argument("--s0", type=float, help="Start of the return or frontier window.")
    common.add_argument("--max-episodes", type=int, help="Return episodes examined per run.")
    common.add_argument(
        "--starred",
        action="store_const",
        const=True,
        help="Use the quantitative constants regardless of (d, T).",
    )
    common.add_argument("--beta", type=float, help="Bias of the reflected walk.")
    common.add_argument("--n", type=int, help="Length of each walk path.")
    common.add_argument("--replicas", type=int, help="Number of walk paths.")
    common.add_argument("--quad-tol", type=float, help="Absolute quadrature tolerance.")
    common.add_argument(
        "--logging-level", choices=get_valid_logging_level(), help="Logging level."
    )
    return common


def main(argv: typing.List[str]) -> int:
    common = _common_args_parser()
    args_parser = argparse.ArgumentParser(
        description="Simulates the random stirring model and checks its bounds."
    )
    subparsers = args_parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("simulate", parents=[common], help="Run an estimator.")
    subparsers.add_parser("perm", parents=[common], help="Stirring permutation of a finite tree.")
    useful_parser = subparsers.add_parser("useful", parents=[common], help="Useful bars at t.")
    useful_parser.add_argument("--t", type=float, required=True, help="Time of the report.")
    useful_parser.add_argument("--s", type=float, help="Start time, for U_{s,t}.")
    subparsers.add_parser("renewal", parents=[common], help="Strong renewal density.")
    subparsers.add_parser("bounds", parents=[common], help="Classify T for a regular tree.")
    subparsers.add_parser("sweep", parents=[common], help="Run an estimator over a grid of T.")
    replay_parser = subparsers.add_parser("replay", parents=[common], help="Replay a run record.")
    replay_parser.add_argument("--record", required=True, help="Run record JSON file.")
    parsed_args = args_parser.parse_args(argv[1:])

    # Validate and load config file
    try:
        config_file_path = None if parsed_args.config is None else pathlib.Path(parsed_args.config)
        config = load_stirring_config(config_file_path)
        overrides = {
            key: value
            for key, value in vars(parsed_args).items()
            if key in StirringConfig.__fields__
        }
        config = config.with_overrides(overrides)
        config.validate_out_dir()
    except Exception:
        logger.exception("Failed to load config.")
        args_parser.print_usage(sys.stderr)
        return ExitStatus.USAGE_ERROR

    # Setup logging
    _setup_logging(config)

    try:
        return COMMANDS[parsed_args.command](config, parsed_args)
    except (StirringError, ValueError) as ex:
        logger.error(f"{parsed_args.command} failed: {ex}")
        return ExitStatus.USAGE_ERROR


def entry_point():
    sys.exit(main(sys.argv))


if "__main__" == __name__:
    entry_point()
