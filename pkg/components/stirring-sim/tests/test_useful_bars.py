import pytest

from stirring_sim.bar_process import BarStore, FixedBarStore
from stirring_sim.experiments.estimators import trajectory_violations
from stirring_sim.meander import run_meander
from stirring_sim.useful_bars import (
    check_lemma4,
    check_lemma8,
    check_report,
    classify_return,
    is_regeneration_time,
    iterate_return_episodes,
    lemma8_lost_bars,
    makes_rapid_advance,
    NotAUsefulBar,
    PreconditionViolated,
    ReturnOutcome,
    stays_in_descendant_tree,
    useful_bars_at,
    useful_bars_between,
    UsefulBarTracker,
)

from .helpers import bar, chain_tree, regular_tree


@pytest.fixture
def chain():
    tree = chain_tree()
    heights = {"a": 0.1, "b": 0.2, "c": 0.3}
    bars = {label: bar(tree, label, height) for label, height in heights.items()}
    traj = run_meander(FixedBarStore(tree, 1.0, bars.values()), (tree.root, 0.0))
    return tree, bars, traj


def test_figure_one_has_no_useful_bar_at_half_period(fig1_tree, fig1_store):
    traj = run_meander(fig1_store, (fig1_tree.root, 0.0))
    assert 0 == len(useful_bars_at(traj, 0.5))


def test_useful_bars_on_descent(chain):
    tree, bars, traj = chain
    report = useful_bars_at(traj, 0.5)
    assert [bars["a"], bars["b"]] == [member.bar for member in report]
    first = report.members[0]
    assert 0.0 == first.upper_hit
    assert 0.1 == pytest.approx(first.lower_hit)
    assert 0.2 == pytest.approx(first.dwell_end)
    assert bars["b"] == report.last_crossed().bar
    assert [] == check_report(report)


def test_bar_joins_only_after_leaving_its_child_vertex(chain):
    tree, bars, traj = chain
    assert set() == useful_bars_at(traj, 0.15).bars()
    # The crossing to b at 0.2 makes the bar to a useful just after 0.2
    assert set() == useful_bars_at(traj, 0.2).bars()
    assert {bars["a"]} == useful_bars_at(traj, 0.2, right_limit=True).bars()


def test_revisit_removes_bars(chain):
    tree, bars, traj = chain
    assert {bars["a"]} == useful_bars_at(traj, 1.5).bars()
    assert set() == useful_bars_at(traj, 3.5).bars()


def test_empty_before_time_zero(chain):
    tree, bars, traj = chain
    assert 0 == len(useful_bars_at(traj, 0.0))


def test_useful_bars_between(chain):
    tree, bars, traj = chain
    # The bar hanging from Y(s) = phi itself does not count
    assert {bars["b"]} == useful_bars_between(traj, 0.05, 0.5).bars()
    assert set() == useful_bars_between(traj, 0.15, 0.5).bars()
    with pytest.raises(ValueError):
        useful_bars_between(traj, 0.5, 0.5)


def test_regeneration_and_descendant_tree(chain):
    tree, bars, traj = chain
    assert is_regeneration_time(traj, 0.15, 0.5)
    assert not is_regeneration_time(traj, 1.5, 2.5)
    assert stays_in_descendant_tree(traj, 0.15, 0.5)
    assert not stays_in_descendant_tree(traj, 0.15, 3.5)


def test_lemma4(chain):
    tree, bars, traj = chain
    assert check_lemma4(traj, 0.15, 0.5)
    with pytest.raises(PreconditionViolated):
        check_lemma4(traj, 1.5, 2.5)
    with pytest.raises(PreconditionViolated):
        check_lemma4(traj, 0.15, 2.5)


def test_lemma8(chain):
    tree, bars, traj = chain
    assert {bars["a"], bars["b"]} == lemma8_lost_bars(traj, 0.5)
    assert check_lemma8(traj, 0.5)
    with pytest.raises(PreconditionViolated):
        lemma8_lost_bars(traj, 3.5)


def test_tracker_matches_right_limit(chain):
    tree, bars, traj = chain
    tracker = UsefulBarTracker(traj)
    for event in traj.events_until(10.0):
        tracker.feed(event)
        expected = useful_bars_at(traj, event.clock, right_limit=True).bars()
        assert expected == tracker.report().bars()


def test_tracker_matches_on_random_environments():
    for seed in range(10):
        tree = regular_tree(d=4, depth_cap=500)
        traj = run_meander(BarStore(tree, 2.0, seed), (tree.root, 0.0), horizon=40.0)
        tracker = UsefulBarTracker(traj)
        for event in traj.events_until(traj.covered_until):
            tracker.feed(event)
            expected = useful_bars_at(traj, event.clock, right_limit=True)
            assert expected.bars() == tracker.report().bars()
            assert [] == check_report(expected)


def test_classify_return(chain):
    tree, bars, traj = chain
    # Y comes back to b at 1.3 and leaves the edge upward at 3.1, to a visited vertex
    assert ReturnOutcome.BAD_RETURN == classify_return(traj, bars["b"], 0.5, 0.1)
    with pytest.raises(NotAUsefulBar):
        classify_return(traj, bars["c"], 0.5, 0.1)


def test_rapid_advance(chain):
    tree, bars, traj = chain
    # On [0, 1] Y descends to c and stays below phi
    assert makes_rapid_advance(traj, 0.0, 0.5)
    assert not makes_rapid_advance(traj, 0.0, 2.0)
    # Y climbs from b to a at 2.2
    assert not makes_rapid_advance(traj, 2.0, 0.0)


def test_return_episodes(chain):
    tree, bars, traj = chain
    episodes = list(iterate_return_episodes(traj, 0.1, 10.0, 50))
    assert 1 == len(episodes)
    episode = episodes[0]
    assert 0.3 == pytest.approx(episode.start)
    assert bars["b"] == episode.bar
    assert ReturnOutcome.BAD_RETURN == episode.classification.outcome


def test_containment_is_checked_at_every_regeneration_pair(chain):
    tree, bars, traj = chain
    checks, violations = trajectory_violations(traj, 1.0)
    assert [] == violations
    # One structural check, three per crossing at 0.1, 0.2 and 0.3, and ten (s, t) pairs:
    # s = 0 with four later times, 0.1 with three, 0.2 with two and 0.3 with t = 1
    assert 1 + 3 * 3 + 10 == checks


@pytest.fixture
def ladder():
    """
    Y descends phi.0, phi.0.0 and phi.0.0.0, comes back to phi.0.0 at 1.3, leaves for the
    fresh offspring phi.0.0.1 at 1.5 and descends three more levels by 1.8.
    """
    tree = regular_tree(d=2, depth_cap=7, truncate=True)
    heights = {
        "phi.0": 0.1,
        "phi.0.0": 0.2,
        "phi.0.0.0": 0.3,
        "phi.0.0.1": 0.5,
        "phi.0.0.1.0": 0.6,
        "phi.0.0.1.0.0": 0.7,
        "phi.0.0.1.0.0.0": 0.8,
    }
    bars = {label: bar(tree, label, height) for label, height in heights.items()}
    return tree, bars, FixedBarStore(tree, 1.0, bars.values())


def test_good_return_on_ladder(ladder):
    tree, bars, store = ladder
    traj = run_meander(store, (tree.root, 0.0))
    assert {bars["phi.0"], bars["phi.0.0"]} == useful_bars_at(traj, 0.5).bars()
    assert ReturnOutcome.GOOD_RETURN == classify_return(traj, bars["phi.0.0"], 0.5, 1.0)
    # Only the bar on phi.0.0.1.0.0 is useful relative to the frontier time
    assert ReturnOutcome.BAD_RETURN == classify_return(traj, bars["phi.0.0"], 0.5, 2.0)


def test_return_after_horizon_is_not_observed(ladder):
    tree, bars, store = ladder
    traj = run_meander(store, (tree.root, 0.0), horizon=1.0)
    assert ReturnOutcome.NO_RETURN_OBSERVED == classify_return(traj, bars["phi.0.0"], 0.5, 1.0)
