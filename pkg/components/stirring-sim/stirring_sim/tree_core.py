"""
Rooted trees for the stirring simulator.

Infinite trees are grown lazily: a vertex exists only once something asks for
it, and it is addressed by the child indices leading to it from the root.
"""

from __future__ import annotations

import hashlib
import typing
from collections import deque
from enum import auto

from pydantic import BaseModel, root_validator, validator
from strenum import KebabCaseStrEnum

ROOT_LABEL = "phi"
VERTEX_KEY_SIZE = 16


class StirringError(Exception):
    """Base class for errors raised by the simulator."""


class DepthCapExceeded(StirringError):
    pass


class TreeKind(KebabCaseStrEnum):
    REGULAR_OFFSPRING = auto()
    ANGEL_REGULAR = auto()
    EXPLICIT_FINITE = auto()


class AngelRootConvention(KebabCaseStrEnum):
    # The root has d0 offspring, so every vertex has degree d0
    FULL_DEGREE = auto()
    # The root has d0 - 1 offspring like every other vertex
    REDUCED_DEGREE = auto()


class TreeSpec(BaseModel):
    kind: TreeKind
    d: typing.Optional[int] = None
    d0: typing.Optional[int] = None
    # Label -> ordered child labels; the root is labelled ROOT_LABEL
    offspring: typing.Optional[typing.Dict[str, typing.List[str]]] = None
    depth_cap: typing.Optional[int] = None
    # Vertices at depth_cap become leaves instead of raising DepthCapExceeded
    truncate: bool = False
    angel_root: AngelRootConvention = AngelRootConvention.FULL_DEGREE

    class Config:
        allow_mutation = False

    @validator("depth_cap")
    def validate_depth_cap(cls, field):
        if field is not None and not field > 0:
            raise ValueError("depth_cap must be greater than 0.")
        return field

    @root_validator(skip_on_failure=True)
    def validate_kind_parameters(cls, values):
        kind = values["kind"]
        if TreeKind.REGULAR_OFFSPRING == kind:
            d = values.get("d")
            if d is None or not d > 0:
                raise ValueError("regular-offspring trees need a positive d.")
        elif TreeKind.ANGEL_REGULAR == kind:
            d0 = values.get("d0")
            if d0 is None or d0 < 2:
                raise ValueError("angel-regular trees need d0 of at least 2.")
        else:
            _validate_offspring_lists(values.get("offspring"))
            return values

        if values.get("depth_cap") is None:
            raise ValueError("Infinite trees need a depth_cap.")
        return values

    @property
    def is_finite(self) -> bool:
        return TreeKind.EXPLICIT_FINITE == self.kind or self.truncate

    def offspring_count(self, v: VertexId) -> int:
        """
        :param v:
        :return: The number of offspring of v.
        :raise DepthCapExceeded: If v sits at the depth cap of an untruncated tree.
        """
        if self.depth_cap is not None and v.depth >= self.depth_cap:
            if self.truncate:
                return 0
            raise DepthCapExceeded(f"Vertex {v} is at the depth cap {self.depth_cap}.")
        if TreeKind.REGULAR_OFFSPRING == self.kind:
            return self.d
        if TreeKind.ANGEL_REGULAR == self.kind:
            if v.parent is None and AngelRootConvention.FULL_DEGREE == self.angel_root:
                return self.d0
            return self.d0 - 1
        return len(self.offspring.get(v.label, []))

    def child_label(self, v: VertexId, index: int) -> typing.Optional[str]:
        if TreeKind.EXPLICIT_FINITE != self.kind:
            return None
        return self.offspring[v.label][index]


def _validate_offspring_lists(offspring):
    if not offspring:
        raise ValueError("explicit-finite trees need offspring lists.")
    if ROOT_LABEL not in offspring:
        raise ValueError(f"offspring lists must include the root '{ROOT_LABEL}'.")
    seen_children = set()
    for children in offspring.values():
        for child in children:
            if ROOT_LABEL == child:
                raise ValueError("The root cannot be an offspring.")
            if child in seen_children:
                raise ValueError(f"Vertex '{child}' has more than one parent.")
            seen_children.add(child)
    reachable = {ROOT_LABEL}
    pending = deque([ROOT_LABEL])
    while pending:
        for child in offspring.get(pending.popleft(), []):
            reachable.add(child)
            pending.append(child)
    unreachable = set(offspring.keys()) - reachable
    if unreachable:
        raise ValueError(f"Vertices not connected to the root: {sorted(unreachable)}")


class VertexId:
    """
    A vertex, linked to its parent. Equality is by position in the tree; the
    128-bit key is a digest of the child-index path and seeds the vertex's
    random stream.
    """

    __slots__ = ("parent", "index", "depth", "key", "label", "_hash", "_children")

    def __init__(
        self,
        parent: typing.Optional[VertexId],
        index: int,
        label: typing.Optional[str] = None,
    ):
        self.parent = parent
        self.index = index
        self.label = label
        self._children: typing.Dict[int, VertexId] = {}
        if parent is None:
            self.depth = 0
            self.key = hashlib.blake2b(ROOT_LABEL.encode(), digest_size=VERTEX_KEY_SIZE).digest()
        else:
            self.depth = parent.depth + 1
            self.key = hashlib.blake2b(
                parent.key + index.to_bytes(4, "little"), digest_size=VERTEX_KEY_SIZE
            ).digest()
        self._hash = int.from_bytes(self.key[:8], "little")

    @staticmethod
    def root() -> VertexId:
        return VertexId(None, 0, ROOT_LABEL)

    @property
    def path(self) -> typing.Tuple[int, ...]:
        indices = []
        current = self
        while current.parent is not None:
            indices.append(current.index)
            current = current.parent
        return tuple(reversed(indices))

    @property
    def is_root(self) -> bool:
        return self.parent is None

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, VertexId):
            return NotImplemented
        return self.depth == other.depth and self.key == other.key

    def __lt__(self, other: VertexId):
        return self.path < other.path

    def __str__(self):
        if self.label is not None:
            return self.label
        return ".".join([ROOT_LABEL] + [str(i) for i in self.path])

    def __repr__(self):
        return f"VertexId({self})"

    def __reduce__(self):
        return (_vertex_from_path, (self.path, self._labels()))

    def _labels(self):
        labels = []
        current = self
        while current is not None:
            labels.append(current.label)
            current = current.parent
        return tuple(reversed(labels))

    def is_descendant_of(self, other: VertexId) -> bool:
        """Whether other lies on the path from the root to this vertex (inclusive)."""
        current = self
        while current is not None and current.depth > other.depth:
            current = current.parent
        return current is not None and current.key == other.key

    def is_strict_descendant_of(self, other: VertexId) -> bool:
        return self.depth > other.depth and self.is_descendant_of(other)


def _vertex_from_path(path, labels):
    vertex = VertexId(None, 0, labels[0])
    for index, label in zip(path, labels[1:]):
        vertex = VertexId(vertex, index, label)
    return vertex


# Edges are identified by their child vertex: the edge (parent(v), v)
EdgeId = VertexId


def edge_upper(e: EdgeId) -> VertexId:
    return e.parent


def edge_lower(e: EdgeId) -> VertexId:
    return e


class TreeHandle:
    """
    A tree being grown lazily from its spec. Children created through the
    handle are cached, so the same position always yields the same object.
    """

    def __init__(self, spec: TreeSpec):
        self.spec = spec
        self.root = VertexId.root()

    def offspring_count(self, v: VertexId) -> int:
        return self.spec.offspring_count(v)

    def child(self, v: VertexId, index: int) -> VertexId:
        child = v._children.get(index)
        if child is None:
            child = VertexId(v, index, self.spec.child_label(v, index))
            v._children[index] = child
        return child

    def children(self, v: VertexId) -> typing.List[VertexId]:
        return [self.child(v, i) for i in range(self.offspring_count(v))]

    def vertices(self) -> typing.List[VertexId]:
        """
        :return: Every vertex of a finite tree, in lexicographic order.
        :raise ValueError: If the tree is infinite.
        """
        if not self.spec.is_finite:
            raise ValueError("Only finite trees can be enumerated.")
        ordered = []
        pending = [self.root]
        while pending:
            v = pending.pop()
            ordered.append(v)
            pending.extend(reversed(self.children(v)))
        return ordered

    def vertex_from_string(self, text: str) -> VertexId:
        text = text.strip()
        if TreeKind.EXPLICIT_FINITE == self.spec.kind:
            for v in self.vertices():
                if str(v) == text:
                    return v
            raise ValueError(f"Unknown vertex '{text}'.")

        parts = text.split(".")
        if ROOT_LABEL != parts[0]:
            raise ValueError(f"Vertex '{text}' must start with '{ROOT_LABEL}'.")
        v = self.root
        for part in parts[1:]:
            index = int(part)
            if index < 0 or index >= self.offspring_count(v):
                raise ValueError(f"Vertex '{text}' does not exist.")
            v = self.child(v, index)
        return v


def children(tree: TreeSpec, v: VertexId) -> typing.List[VertexId]:
    return [VertexId(v, i, tree.child_label(v, i)) for i in range(tree.offspring_count(v))]


def meet(v: VertexId, w: VertexId) -> VertexId:
    """:return: The deepest common ancestor of v and w."""
    while v.depth > w.depth:
        v = v.parent
    while w.depth > v.depth:
        w = w.parent
    while v.key != w.key:
        v = v.parent
        w = w.parent
    return v


def graph_distance(v: VertexId, w: VertexId) -> int:
    return v.depth + w.depth - 2 * meet(v, w).depth


def figure_one_tree() -> TreeSpec:
    """The seven-vertex tree with root children v and w, each with two children."""
    return TreeSpec(
        kind=TreeKind.EXPLICIT_FINITE,
        offspring={
            ROOT_LABEL: ["v", "w"],
            "v": ["v1", "v2"],
            "w": ["w1", "w2"],
        },
    )


PRESET_TREES = {
    "fig1": figure_one_tree,
}
