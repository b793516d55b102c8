import pickle

import pytest
from pydantic import ValidationError

from stirring_sim.tree_core import (
    DepthCapExceeded,
    graph_distance,
    meet,
    ROOT_LABEL,
    TreeHandle,
    TreeKind,
    TreeSpec,
)

from .helpers import regular_tree


def test_regular_tree_offspring():
    tree = regular_tree(d=3)
    assert 3 == len(tree.children(tree.root))
    child = tree.child(tree.root, 2)
    assert 3 == len(tree.children(child))
    assert 1 == child.depth
    assert (2,) == child.path


def test_angel_root_conventions():
    full = TreeHandle(TreeSpec(kind=TreeKind.ANGEL_REGULAR, d0=4, depth_cap=5))
    assert 4 == full.offspring_count(full.root)
    assert 3 == full.offspring_count(full.child(full.root, 0))

    reduced = TreeHandle(
        TreeSpec(kind=TreeKind.ANGEL_REGULAR, d0=4, depth_cap=5, angel_root="reduced-degree")
    )
    assert 3 == reduced.offspring_count(reduced.root)


def test_depth_cap_raises_unless_truncated():
    tree = regular_tree(d=2, depth_cap=2)
    deep = tree.child(tree.child(tree.root, 0), 1)
    with pytest.raises(DepthCapExceeded):
        tree.children(deep)

    truncated = regular_tree(d=2, depth_cap=2, truncate=True)
    deep = truncated.child(truncated.child(truncated.root, 0), 1)
    assert [] == truncated.children(deep)
    assert 7 == len(truncated.vertices())


def test_infinite_trees_need_depth_cap():
    with pytest.raises(ValidationError):
        TreeSpec(kind=TreeKind.REGULAR_OFFSPRING, d=2)


def test_explicit_tree_validation():
    with pytest.raises(ValidationError):
        TreeSpec(kind=TreeKind.EXPLICIT_FINITE, offspring={"a": ["b"]})
    with pytest.raises(ValidationError):
        TreeSpec(kind=TreeKind.EXPLICIT_FINITE, offspring={ROOT_LABEL: ["a", "a"]})
    with pytest.raises(ValidationError):
        TreeSpec(kind=TreeKind.EXPLICIT_FINITE, offspring={ROOT_LABEL: ["a"], "x": ["y"]})


def test_figure_one_vertices(fig1_tree):
    labels = [str(v) for v in fig1_tree.vertices()]
    assert ["phi", "v", "v1", "v2", "w", "w1", "w2"] == labels


def test_vertex_identity_is_positional():
    tree = regular_tree()
    other = regular_tree()
    a = tree.vertex_from_string("phi.1.2")
    b = other.vertex_from_string("phi.1.2")
    assert a == b
    assert hash(a) == hash(b)
    assert a is tree.vertex_from_string("phi.1.2")
    assert "phi.1.2" == str(a)
    assert a == pickle.loads(pickle.dumps(a))


def test_descendants_meet_and_distance():
    tree = regular_tree()
    a = tree.vertex_from_string("phi.0.1")
    b = tree.vertex_from_string("phi.0.2.1")
    parent = tree.vertex_from_string("phi.0")
    assert a.is_descendant_of(parent)
    assert a.is_descendant_of(a)
    assert not a.is_strict_descendant_of(a)
    assert not a.is_descendant_of(b)
    assert parent == meet(a, b)
    assert 3 == graph_distance(a, b)
    assert 0 == graph_distance(a, a)


def test_vertex_from_string_rejects_missing_vertices(fig1_tree):
    with pytest.raises(ValueError):
        fig1_tree.vertex_from_string("u")
    tree = regular_tree(d=2)
    with pytest.raises(ValueError):
        tree.vertex_from_string("phi.2")
    with pytest.raises(ValueError):
        tree.vertex_from_string("root.0")
