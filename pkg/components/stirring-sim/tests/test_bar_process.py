import math
import typing

import numpy as np
import pytest
from scipy import stats

from stirring_sim.bar_process import (
    Bar,
    BarStore,
    FixedBarStore,
    HeightCollision,
    load_bar_file,
    realized_bars,
    write_bar_file,
)

from .helpers import bar, regular_tree, vertex


def test_figure_one_next_joint(fig1_tree, fig1_store):
    joint = fig1_store.next_joint(fig1_tree.root, 0.0)
    assert vertex(fig1_tree, "v") == joint.target
    assert 0.3 == pytest.approx(joint.height)
    assert 0.3 == pytest.approx(joint.gap)

    # After the bar at 0.3 the next joint is on the edge to w
    joint = fig1_store.next_joint(fig1_tree.root, 0.3)
    assert vertex(fig1_tree, "w") == joint.target
    assert 0.3 == pytest.approx(joint.gap)

    # From the top of the pole the search wraps around
    joint = fig1_store.next_joint(fig1_tree.root, 0.6)
    assert vertex(fig1_tree, "v") == joint.target
    assert 0.7 == pytest.approx(joint.gap)


def test_inclusive_joint_is_met_immediately(fig1_tree, fig1_store):
    joint = fig1_store.next_joint(fig1_tree.root, 0.3, inclusive=True)
    assert vertex(fig1_tree, "v") == joint.target
    assert 0 == joint.gap

    v = vertex(fig1_tree, "v")
    joint = fig1_store.next_joint(v, 0.3)
    assert fig1_tree.root == joint.target
    assert 1.0 == pytest.approx(joint.gap)


def test_pole_without_joints(fig1_tree, fig1_store):
    assert fig1_store.next_joint(vertex(fig1_tree, "v1"), 0.5) is None


def test_environment_is_reproducible():
    tree = regular_tree()
    first = BarStore(tree, 2.0, 17)
    second = BarStore(regular_tree(), 2.0, 17)
    v = tree.vertex_from_string("phi.2.1")
    assert first.pole(v) == second.pole(v)
    assert first.pole(tree.root) != BarStore(tree, 2.0, 18).pole(tree.root)


def test_environment_does_not_depend_on_query_order():
    tree = regular_tree()
    deep = tree.vertex_from_string("phi.1.1.1")
    first = BarStore(tree, 3.0, 5)
    first.pole(deep)
    second = BarStore(tree, 3.0, 5)
    for name in ["phi.0", "phi.2.2", "phi.1", "phi.1.1.1"]:
        second.pole(tree.vertex_from_string(name))
    assert first.pole(deep) == second.pole(deep)


def test_environments_are_nested_in_T():
    tree = regular_tree()
    short = BarStore(tree, 1.0, 3)
    long = BarStore(tree, 4.0, 3)
    for index in range(3):
        e = tree.child(tree.root, index)
        short_heights = short.bars_on_edge(e)
        long_heights = [h for h in long.bars_on_edge(e) if h < 1.0]
        assert short_heights == pytest.approx(long_heights)


def test_poles_share_edge_bars():
    tree = regular_tree()
    store = BarStore(tree, 5.0, 11)
    e = tree.vertex_from_string("phi.1")
    from_parent = store.bars_on_edge(e)
    pole = store.pole(e)
    from_child = [h for h, label in zip(pole.heights, pole.labels) if -1 == label]
    assert from_parent == from_child
    assert pole.heights == sorted(pole.heights)


def test_bar_counts_are_poisson():
    tree = regular_tree(d=50)
    store = BarStore(tree, 2.0, 23)
    counts = [len(store.bars_on_edge(tree.child(tree.root, k))) for k in range(50)]
    assert 2.0 == pytest.approx(np.mean(counts), abs=0.8)


def test_zero_period_has_no_bars():
    tree = regular_tree()
    store = BarStore(tree, 0.0, 1)
    assert store.next_joint(tree.root, 0.0) is None


def test_fixed_store_rejects_duplicates(fig1_tree):
    bars = [bar(fig1_tree, "v", 0.3), bar(fig1_tree, "w", 0.3)]
    store = FixedBarStore(fig1_tree, 1.0, bars)
    with pytest.raises(HeightCollision):
        store.pole(fig1_tree.root)


def test_fixed_store_rejects_heights_outside_period(fig1_tree):
    with pytest.raises(ValueError):
        FixedBarStore(fig1_tree, 1.0, [bar(fig1_tree, "v", 1.0)])


def test_bar_file_round_trip(tmp_path, fig1_tree, fig1_bars):
    assert {Bar(vertex(fig1_tree, "v"), 0.3), Bar(vertex(fig1_tree, "w"), 0.6)} == set(fig1_bars)
    bar_file_path = tmp_path / "copy.bars"
    write_bar_file(bar_file_path, fig1_bars)
    assert set(fig1_bars) == set(load_bar_file(bar_file_path, fig1_tree))


def test_malformed_bar_file(tmp_path, fig1_tree):
    bar_file_path = tmp_path / "bad.bars"
    bar_file_path.write_text("v 0.3\n")
    with pytest.raises(ValueError):
        load_bar_file(bar_file_path, fig1_tree)


def test_realized_bars(fig1_tree, fig1_store, fig1_bars):
    assert set(fig1_bars) == set(realized_bars(fig1_store, fig1_tree.vertices()))


def child_edge_bar_counts(store: BarStore, parents) -> typing.Tuple[np.ndarray, np.ndarray]:
    """:return: The bar count of every child edge of the parents, and all their heights."""
    counts = []
    heights = []
    for p in parents:
        pole = store.pole(p)
        labels = np.asarray(pole.labels)
        below = labels >= 0
        counts.append(np.bincount(labels[below], minlength=store.tree.offspring_count(p)))
        heights.append(np.asarray(pole.heights)[below])
    return np.concatenate(counts), np.concatenate(heights)


@pytest.mark.slow
def test_bar_statistics_over_many_edges():
    tree = regular_tree(d=1000, depth_cap=5)
    parents = [tree.root] + [tree.child(tree.root, k) for k in range(99)]
    counts, heights = child_edge_bar_counts(BarStore(tree, 3.0, 29), parents)
    assert 100000 == len(counts)
    assert 3.0 == pytest.approx(np.mean(counts), abs=0.03)
    assert 3.0 == pytest.approx(np.var(counts), abs=0.08)
    assert stats.kstest(heights, "uniform", args=(0.0, 3.0)).pvalue > 0.001

    counts, _ = child_edge_bar_counts(BarStore(tree, math.log(2), 31), parents)
    assert 0.5 == pytest.approx(np.mean(0 == counts), abs=0.01)
