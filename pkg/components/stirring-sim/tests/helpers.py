from stirring_sim.bar_process import Bar
from stirring_sim.tree_core import TreeHandle, TreeKind, TreeSpec, VertexId


def vertex(tree: TreeHandle, label: str) -> VertexId:
    return tree.vertex_from_string(label)


def bar(tree: TreeHandle, label: str, height: float) -> Bar:
    return Bar(tree.vertex_from_string(label), height)


def regular_tree(d: int = 3, depth_cap: int = 50, truncate: bool = False) -> TreeHandle:
    spec = TreeSpec(
        kind=TreeKind.REGULAR_OFFSPRING, d=d, depth_cap=depth_cap, truncate=truncate
    )
    return TreeHandle(spec)


def chain_tree() -> TreeHandle:
    """The path phi - a - b - c."""
    return TreeHandle(
        TreeSpec(kind=TreeKind.EXPLICIT_FINITE, offspring={"phi": ["a"], "a": ["b"], "b": ["c"]})
    )
