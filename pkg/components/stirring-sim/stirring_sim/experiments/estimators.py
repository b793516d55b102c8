"""
Per-run Monte Carlo estimators and the fold that turns their outcomes into an
EstimateRecord. Every run is determined by (config, run index).
"""

from __future__ import annotations

import hashlib
import math
import pathlib
import typing
from collections import Counter

from ..bar_process import BarStore, FixedBarStore, load_bar_file
from ..bounds import c1, c1_star, c2, c2_star, useful_bar_tail_bound
from ..meander import (
    check_trajectory,
    CrossingEvent,
    cycle_verdict,
    CycleOutcome,
    frontier_times,
    hitting_time,
    HitStatus,
    QueryBeyondHorizon,
    run_meander,
    Trajectory,
    TrajectoryVerdict,
)
from ..tree_core import TreeHandle
from ..useful_bars import (
    check_lemma4,
    check_report,
    is_regeneration_time,
    iterate_return_episodes,
    lemma8_lost_bars,
    makes_rapid_advance,
    PreconditionViolated,
    ReturnOutcome,
    stays_in_descendant_tree,
    useful_bars_at,
    useful_bars_between,
    UsefulBarTracker,
)
from .constants import EstimatorName, RunCategory, STANDARD_ERROR_SLACK
from .records import EstimateRecord, ExperimentConfig, RunOutcome

# Violations kept per run; the count is always exact
MAX_REPORTED_VIOLATIONS = 10
RAPID_ADVANCE_BOUND = 0.75
USEFUL_BAR_COUNT_BOUND = 0.8


def derive_run_seed(master_seed: int, run_index: int) -> int:
    digest = hashlib.blake2b(f"{master_seed}:{run_index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_store(cfg: ExperimentConfig, run_seed: int) -> BarStore:
    tree = TreeHandle(cfg.tree)
    if cfg.bars_file is not None:
        bars = load_bar_file(pathlib.Path(cfg.bars_file), tree)
        return FixedBarStore(tree, cfg.T, bars)
    return BarStore(tree, cfg.T, run_seed)


def _run_from_root(cfg: ExperimentConfig, store: BarStore, horizon: float) -> Trajectory:
    return run_meander(store, (store.tree.root, 0.0), budget=cfg.budget, horizon=horizon)


def run_trajectory(cfg: ExperimentConfig, run_seed: int) -> Trajectory:
    """:return: The root trajectory a run with this seed examines, for dumps and replays."""
    horizon = cfg.T if EstimatorName.USEFUL_BAR_COUNT == cfg.estimator else cfg.horizon
    return _run_from_root(cfg, make_store(cfg, run_seed), horizon=horizon)


def _censoring_category(traj: Trajectory) -> typing.Optional[RunCategory]:
    if TrajectoryVerdict.DEPTH_CAP_HIT == traj.verdict:
        return RunCategory.CENSORED_DEPTH
    if TrajectoryVerdict.BUDGET_EXHAUSTED == traj.verdict:
        return RunCategory.CENSORED_BUDGET
    return None


def _rapid_advance_constant(cfg: ExperimentConfig) -> float:
    if cfg.is_starred():
        return c1_star(cfg.offspring)
    return c1(cfg.offspring, cfg.T)


def _window_end(cfg: ExperimentConfig, traj: Trajectory) -> float:
    return min(cfg.horizon, traj.covered_until)


def run_useful_bar_count(cfg: ExperimentConfig, run_index: int, run_seed: int) -> RunOutcome:
    store = make_store(cfg, run_seed)
    traj = _run_from_root(cfg, store, horizon=cfg.T)
    category = _censoring_category(traj)
    if category is not None:
        return RunOutcome(
            run_index=run_index,
            run_seed=run_seed,
            T=cfg.T,
            category=category,
            verdict=traj.verdict.to_str(),
        )

    count = len(useful_bars_between(traj, 0.0, cfg.T)) if cfg.T > 0 else 0
    threshold = math.ceil(cfg.T * cfg.offspring / 18)
    return RunOutcome(
        run_index=run_index,
        run_seed=run_seed,
        T=cfg.T,
        category=RunCategory.OBSERVED,
        verdict=traj.verdict.to_str(),
        trials=1,
        successes=int(count >= threshold),
        value=count,
    )


def _run_episode_estimator(
    cfg: ExperimentConfig,
    run_index: int,
    run_seed: int,
    tally: typing.Callable[[ReturnOutcome, typing.Optional[bool]], typing.Optional[bool]],
) -> RunOutcome:
    """
    Follows the return-episode chain of one run and tallies every episode whose bar does
    not hang from the root. tally maps (outcome, frontier departure) to a success flag, or
    None when the episode is censored for this estimator.
    """
    store = make_store(cfg, run_seed)
    traj = _run_from_root(cfg, store, horizon=cfg.horizon)
    trials = 0
    successes = 0
    episodes_censored = 0
    c = _rapid_advance_constant(cfg)
    for episode in iterate_return_episodes(traj, c, cfg.horizon, cfg.max_episodes):
        if episode.bar.upper.is_root:
            continue
        classification = episode.classification
        if ReturnOutcome.NO_RETURN_OBSERVED == classification.outcome:
            continue
        success = tally(classification.outcome, classification.frontier_departure)
        if success is None:
            episodes_censored += 1
            continue
        trials += 1
        successes += int(success)

    if trials > 0:
        category = RunCategory.OBSERVED
    else:
        category = _censoring_category(traj) or RunCategory.DISCARDED
    return RunOutcome(
        run_index=run_index,
        run_seed=run_seed,
        T=cfg.T,
        category=category,
        verdict=traj.verdict.to_str(),
        trials=trials,
        successes=successes,
        episodes_censored=episodes_censored,
    )


def _tally_frontier_departure(outcome: ReturnOutcome, frontier: typing.Optional[bool]):
    return frontier


def _tally_good_return(outcome: ReturnOutcome, frontier: typing.Optional[bool]):
    if ReturnOutcome.CENSORED == outcome:
        return None
    return ReturnOutcome.GOOD_RETURN == outcome


def run_frontier_departure(cfg: ExperimentConfig, run_index: int, run_seed: int) -> RunOutcome:
    return _run_episode_estimator(cfg, run_index, run_seed, _tally_frontier_departure)


def run_good_return(cfg: ExperimentConfig, run_index: int, run_seed: int) -> RunOutcome:
    return _run_episode_estimator(cfg, run_index, run_seed, _tally_good_return)


def run_rapid_advance(cfg: ExperimentConfig, run_index: int, run_seed: int) -> RunOutcome:
    """Examines the first frontier time at or after s0 whose window [f, f + T] is covered."""
    store = make_store(cfg, run_seed)
    traj = _run_from_root(cfg, store, horizon=cfg.horizon)
    window_end = _window_end(cfg, traj)
    s0 = cfg.s0 or 0.0
    candidates = [f for f in frontier_times(traj) if f >= s0 and f + cfg.T <= window_end]
    if 0 == len(candidates):
        return RunOutcome(
            run_index=run_index,
            run_seed=run_seed,
            T=cfg.T,
            category=_censoring_category(traj) or RunCategory.DISCARDED,
            verdict=traj.verdict.to_str(),
        )

    f = candidates[0]
    success = makes_rapid_advance(
        traj, f, _rapid_advance_constant(cfg)
    ) and is_regeneration_time(traj, f, f + cfg.T)
    return RunOutcome(
        run_index=run_index,
        run_seed=run_seed,
        T=cfg.T,
        category=RunCategory.OBSERVED,
        verdict=traj.verdict.to_str(),
        trials=1,
        successes=int(success),
    )


def run_return_probability(cfg: ExperimentConfig, run_index: int, run_seed: int) -> RunOutcome:
    store = make_store(cfg, run_seed)
    traj = _run_from_root(cfg, store, horizon=cfg.horizon)
    s0 = cfg.s0 or 0.0
    try:
        hit = hitting_time(traj, s0, {store.tree.root})
    except QueryBeyondHorizon:
        hit = None

    if hit is not None and hit.is_hit:
        category = RunCategory.RETURNED
    elif hit is not None and HitStatus.NEVER_HIT == hit.status:
        category = RunCategory.NOT_RETURNED
    elif TrajectoryVerdict.HORIZON_REACHED == traj.verdict:
        category = RunCategory.NOT_RETURNED
    else:
        category = _censoring_category(traj)

    observed = category in (RunCategory.RETURNED, RunCategory.NOT_RETURNED)
    return RunOutcome(
        run_index=run_index,
        run_seed=run_seed,
        T=cfg.T,
        category=category,
        verdict=traj.verdict.to_str(),
        trials=int(observed),
        successes=int(RunCategory.NOT_RETURNED == category),
    )


def run_cycle_length_survey(cfg: ExperimentConfig, run_index: int, run_seed: int) -> RunOutcome:
    """Each run is one trial; a success is a censored, candidate-infinite root cycle."""
    store = make_store(cfg, run_seed)
    traj = _run_from_root(cfg, store, horizon=cfg.horizon)
    verdict = cycle_verdict(traj)
    categories = {
        CycleOutcome.FINITE_CYCLE: RunCategory.OBSERVED,
        CycleOutcome.CENSORED_AT_DEPTH: RunCategory.CENSORED_DEPTH,
        CycleOutcome.CENSORED_AT_BUDGET: RunCategory.CENSORED_BUDGET,
        CycleOutcome.CENSORED_AT_HORIZON: RunCategory.CENSORED_HORIZON,
    }
    return RunOutcome(
        run_index=run_index,
        run_seed=run_seed,
        T=cfg.T,
        category=categories[verdict.outcome],
        verdict=traj.verdict.to_str(),
        trials=1,
        successes=int(not verdict.is_finite),
        value=verdict.length,
    )


def trajectory_violations(
    traj: Trajectory, window_end: float
) -> typing.Tuple[int, typing.List[str]]:
    """
    Checks the trajectory and useful-bar report structure, the incremental tracker, the
    containment of U_{0,t} in U_t and the bound on lost useful bars at every crossing in
    (0, window_end), then the disjoint containment of U_s and U_{s,t} in U_t for every
    regeneration pair.

    :return: The number of checks made and the violations found.
    """
    violations = check_trajectory(traj)
    checks = 1
    events = [event for event in traj.events_until(window_end) if 0 < event.clock < window_end]
    tracker = UsefulBarTracker(traj)
    for event in events:
        t = event.clock
        tracker.feed(event)
        checks += 1
        if tracker.report().bars() != useful_bars_at(traj, t, right_limit=True).bars():
            violations.append(f"Tracker disagrees with U_{t}+.")

        report = useful_bars_at(traj, t)
        checks += 1
        violations.extend(check_report(report))

        if len(report) > 0:
            try:
                lost = lemma8_lost_bars(traj, t)
                checks += 1
                if len(lost) > 2:
                    violations.append(f"{len(lost)} useful bars lost after {t}.")
            except PreconditionViolated:
                pass

        checks += 1
        if not useful_bars_between(traj, 0.0, t).bars() <= report.bars():
            violations.append(f"U_0,{t} is not contained in U_{t}.")

    checks_made, containment_violations = _containment_violations(traj, events, window_end)
    return checks + checks_made, violations + containment_violations


def _containment_violations(
    traj: Trajectory, events: typing.List[CrossingEvent], window_end: float
) -> typing.Tuple[int, typing.List[str]]:
    """
    Checks that U_s and U_{s,t} are disjoint subsets of U_t for every pair of crossing
    times s < t, and t = window_end, at which s is a t-regeneration time after which Y stays
    in the descendant tree of Y(s). Both conditions fail for good once they fail, so each s
    is followed only until the first t where one does.
    """
    times = [0.0] + [event.clock for event in events]
    checks = 0
    violations = []
    for i, s in enumerate(times):
        for t in times[i + 1 :] + [window_end]:
            if not t > s:
                continue
            if not is_regeneration_time(traj, s, t) or not stays_in_descendant_tree(traj, s, t):
                break
            checks += 1
            if not check_lemma4(traj, s, t):
                violations.append(f"U_{s} and U_{s},{t} break disjoint containment.")
    return checks, violations


def run_invariants(cfg: ExperimentConfig, run_index: int, run_seed: int) -> RunOutcome:
    store = make_store(cfg, run_seed)
    traj = _run_from_root(cfg, store, horizon=cfg.horizon)
    window_end = _window_end(cfg, traj)
    checks, violations = trajectory_violations(traj, window_end)
    return RunOutcome(
        run_index=run_index,
        run_seed=run_seed,
        T=cfg.T,
        category=RunCategory.OBSERVED,
        verdict=traj.verdict.to_str(),
        trials=checks,
        successes=checks - len(violations),
        violations=violations[:MAX_REPORTED_VIOLATIONS],
    )


RUN_FUNCTIONS = {
    EstimatorName.USEFUL_BAR_COUNT: run_useful_bar_count,
    EstimatorName.FRONTIER_DEPARTURE: run_frontier_departure,
    EstimatorName.RAPID_ADVANCE: run_rapid_advance,
    EstimatorName.GOOD_RETURN: run_good_return,
    EstimatorName.RETURN_PROBABILITY: run_return_probability,
    EstimatorName.CYCLE_LENGTH_SURVEY: run_cycle_length_survey,
    EstimatorName.INVARIANTS: run_invariants,
}


def run_single(cfg: ExperimentConfig, run_index: int) -> RunOutcome:
    run_seed = derive_run_seed(cfg.master_seed, run_index)
    return RUN_FUNCTIONS[cfg.estimator](cfg, run_index, run_seed)


def _bound_and_probe(
    cfg: ExperimentConfig, outcomes: typing.List[RunOutcome]
) -> typing.Tuple[typing.Optional[float], typing.Dict[str, float]]:
    estimator = cfg.estimator
    probe = {}
    if EstimatorName.USEFUL_BAR_COUNT == estimator:
        d = cfg.offspring
        counts = [outcome.value for outcome in outcomes if outcome.value is not None]
        if counts:
            probe["histogram_mean"] = sum(counts) / len(counts)
        probe["asymptotic_rate"] = (
            d**2 * (d - 1) / (d + 1) ** 2 * -math.expm1(-(d + 1) * cfg.T / 2) * cfg.T
        )
        if cfg.T * d >= 2 * math.log(2):
            probe["tail_bound"] = useful_bar_tail_bound(d, cfg.T)
        bound = USEFUL_BAR_COUNT_BOUND if cfg.T * d >= 429 else None
        return bound, probe
    if EstimatorName.FRONTIER_DEPARTURE == estimator:
        d = cfg.offspring
        return (d - 1) / (d + 1) * -math.expm1(-(d - 1) * cfg.T / 2), probe
    if EstimatorName.RAPID_ADVANCE == estimator:
        return (RAPID_ADVANCE_BOUND if cfg.is_starred() else None), probe
    if EstimatorName.GOOD_RETURN == estimator:
        d = cfg.offspring
        return (c2_star(d, cfg.T) if cfg.is_starred() else c2(d, cfg.T)), probe
    return None, probe


def aggregate(cfg: ExperimentConfig, outcomes: typing.List[RunOutcome]) -> EstimateRecord:
    """Folds run outcomes, in run-index order, into an estimate."""
    categories = Counter(outcome.category for outcome in outcomes)
    histogram = Counter(outcome.value for outcome in outcomes if outcome.value is not None)
    bound, probe = _bound_and_probe(cfg, outcomes)
    return EstimateRecord.from_tallies(
        cfg.estimator,
        cfg.T,
        cfg.master_seed,
        successes=sum(outcome.successes for outcome in outcomes),
        n=sum(outcome.trials for outcome in outcomes),
        censored_depth=categories[RunCategory.CENSORED_DEPTH],
        censored_budget=categories[RunCategory.CENSORED_BUDGET],
        censored_horizon=categories[RunCategory.CENSORED_HORIZON],
        discarded=categories[RunCategory.DISCARDED],
        episodes_censored=sum(outcome.episodes_censored for outcome in outcomes),
        bound=bound,
        histogram=dict(sorted(histogram.items())),
        probe=probe,
    )


class ProbeResult(typing.NamedTuple):
    label: str
    difference: float
    pooled_standard_error: float
    passed: bool


def monotonicity_probe(lower_T: EstimateRecord, higher_T: EstimateRecord) -> ProbeResult:
    """
    Heuristic check that an estimate does not decrease in T by more than three pooled
    standard errors. No theorem backs it.
    """
    pooled = math.sqrt(lower_T.standard_error**2 + higher_T.standard_error**2)
    difference = higher_T.estimate - lower_T.estimate
    return ProbeResult("probe", difference, pooled, difference >= -STANDARD_ERROR_SLACK * pooled)
