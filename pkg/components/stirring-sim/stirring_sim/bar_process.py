"""
The Poisson bar environment.

Bars on the edges from a vertex p to its offspring are realized together, from
a counter-based stream keyed by (master seed, p). Each pole is assembled once
from its parent edge and its child edges and then cached.
"""

from __future__ import annotations

import bisect
import pathlib
import typing

import numpy as np
from stirring_py_utils.stirring_logging import get_logger

from .tree_core import EdgeId, StirringError, TreeHandle, VertexId

logger = get_logger(__name__)

# Exponential gaps are drawn per edge in chunks of this size until every edge
# of the batch has passed T; the stream prefix below any T is shared across T.
GAP_CHUNK_SIZE = 16
MAX_REDRAW_ATTEMPTS = 8
# Pole labels: PARENT_EDGE marks the edge to the parent, k >= 0 the edge to child k
PARENT_EDGE = -1


class HeightCollision(StirringError):
    pass


class Bar(typing.NamedTuple):
    edge: EdgeId
    height: float

    @property
    def upper(self) -> VertexId:
        return self.edge.parent

    @property
    def lower(self) -> VertexId:
        return self.edge


class Joint(typing.NamedTuple):
    edge: EdgeId
    height: float
    gap: float
    # The vertex on the other end of the bar
    target: VertexId

    @property
    def bar(self) -> Bar:
        return Bar(self.edge, self.height)


class Pole(typing.NamedTuple):
    heights: typing.List[float]
    labels: typing.List[int]


class BarStore:
    """
    Lazily realized Poisson(1) bars on E(G) x [0, T).
    """

    def __init__(self, tree: TreeHandle, T: float, master_seed: int):
        if not T >= 0:
            raise ValueError("T cannot be negative.")
        self.tree = tree
        self.T = T
        self.master_seed = master_seed
        self.collision_count = 0
        self._poles: typing.Dict[VertexId, Pole] = {}

    def _realize_child_edges(self, p: VertexId, count: int) -> typing.List[np.ndarray]:
        """
        :return: For each of the count child edges of p, the bar heights in increasing order.
        """
        if 0 == count or 0 == self.T:
            return [np.empty(0) for _ in range(count)]
        rng = _make_generator(self.master_seed, p.key)
        chunks = []
        last = np.zeros(count)
        while True:
            chunk = last[:, None] + np.cumsum(rng.exponential(size=(count, GAP_CHUNK_SIZE)), axis=1)
            chunks.append(chunk)
            last = chunk[:, -1]
            if np.all(last >= self.T):
                break
        points = np.concatenate(chunks, axis=1)
        return [row[row < self.T] for row in points]

    def _redraw(self, p: VertexId, attempt: int, size: int) -> np.ndarray:
        rng = _make_generator(self.master_seed, p.key, attempt + 1)
        return rng.uniform(0.0, self.T, size=size)

    def pole(self, v: VertexId) -> Pole:
        """
        :return: The joints on the pole at v, sorted by height.
        :raise DepthCapExceeded: If the offspring of v cannot be materialized.
        :raise HeightCollision: If two joints on the pole could not be separated.
        """
        pole = self._poles.get(v)
        if pole is not None:
            return pole

        # Ancestor poles fix the bars on the parent edge
        pending = []
        current = v
        while current is not None and current not in self._poles:
            pending.append(current)
            current = current.parent
        for vertex in reversed(pending):
            self._poles[vertex] = self._assemble_pole(vertex)
        return self._poles[v]

    def _assemble_pole(self, v: VertexId) -> Pole:
        if v.parent is None:
            parent_heights = np.empty(0)
        else:
            parent_pole = self._poles[v.parent]
            parent_heights = np.array(
                [h for h, label in zip(parent_pole.heights, parent_pole.labels) if label == v.index]
            )
        child_rows = self._realize_child_edges(v, self.tree.offspring_count(v))

        heights = np.concatenate([parent_heights] + child_rows)
        labels = np.concatenate(
            [np.full(len(parent_heights), PARENT_EDGE, dtype=np.int64)]
            + [np.full(len(row), k, dtype=np.int64) for k, row in enumerate(child_rows)]
        )
        heights = self._separate_duplicates(v, heights, len(parent_heights))

        order = np.argsort(heights, kind="stable")
        return Pole(heights[order].tolist(), labels[order].tolist())

    def _separate_duplicates(self, v: VertexId, heights: np.ndarray, fixed: int) -> np.ndarray:
        """
        Re-draws child-edge heights that duplicate an earlier joint on the pole.
        The first `fixed` heights belong to the parent edge and are never moved.
        """
        for attempt in range(MAX_REDRAW_ATTEMPTS):
            _, first_index = np.unique(heights, return_index=True)
            if len(first_index) == len(heights):
                return heights
            duplicated = np.ones(len(heights), dtype=bool)
            duplicated[first_index] = False
            if np.any(duplicated[:fixed]):
                break
            self.collision_count += int(np.count_nonzero(duplicated))
            logger.warning(f"Re-drawing {np.count_nonzero(duplicated)} duplicate heights at {v}.")
            heights = heights.copy()
            heights[duplicated] = self._redraw(v, attempt, int(np.count_nonzero(duplicated)))
        raise HeightCollision(f"Unable to separate duplicate bar heights on the pole at {v}.")

    def bars_on_edge(self, e: EdgeId) -> typing.List[float]:
        pole = self.pole(e.parent)
        return [h for h, label in zip(pole.heights, pole.labels) if label == e.index]

    def next_joint(self, v: VertexId, h: float, inclusive: bool = False) -> typing.Optional[Joint]:
        """
        Finds the first joint met by moving cyclically upward from height h on the pole at v.

        :param v:
        :param h: Height in [0, T).
        :param inclusive: Whether a joint exactly at h is met immediately (gap 0). Otherwise
        such a joint is only met after a full lap.
        :return: The joint, or None if the pole carries no joints.
        """
        pole = self.pole(v)
        if 0 == len(pole.heights):
            return None
        if inclusive:
            i = bisect.bisect_left(pole.heights, h)
        else:
            i = bisect.bisect_right(pole.heights, h)
        if i == len(pole.heights):
            i = 0
            gap = pole.heights[0] + self.T - h
        else:
            gap = pole.heights[i] - h

        label = pole.labels[i]
        if PARENT_EDGE == label:
            edge = v
            target = v.parent
        else:
            edge = self.tree.child(v, label)
            target = edge
        return Joint(edge, pole.heights[i], gap, target)


class FixedBarStore(BarStore):
    """
    A bar environment given explicitly, e.g. loaded from a bar file.
    """

    def __init__(self, tree: TreeHandle, T: float, bars: typing.Iterable[Bar]):
        super().__init__(tree, T, master_seed=0)
        self._bars_by_parent: typing.Dict[VertexId, typing.Dict[int, typing.List[float]]] = {}
        for bar in bars:
            if bar.edge.parent is None:
                raise ValueError("Bars must sit on an edge, not on the root.")
            if not 0 <= bar.height < T:
                raise ValueError(f"Bar height {bar.height} is outside [0, {T}).")
            by_index = self._bars_by_parent.setdefault(bar.edge.parent, {})
            by_index.setdefault(bar.edge.index, []).append(bar.height)

    def _realize_child_edges(self, p: VertexId, count: int) -> typing.List[np.ndarray]:
        by_index = self._bars_by_parent.get(p, {})
        out_of_range = [index for index in by_index if index >= count]
        if out_of_range:
            raise ValueError(f"Bars on missing offspring {out_of_range} of {p}.")
        return [np.sort(np.array(by_index.get(k, []), dtype=float)) for k in range(count)]

    def _separate_duplicates(self, v: VertexId, heights: np.ndarray, fixed: int) -> np.ndarray:
        if len(np.unique(heights)) != len(heights):
            raise HeightCollision(f"Duplicate bar heights on the pole at {v}.")
        return heights


def bars_on_edge(store: BarStore, e: EdgeId) -> typing.List[float]:
    return store.bars_on_edge(e)


def next_joint(store: BarStore, v: VertexId, h: float) -> typing.Optional[Joint]:
    return store.next_joint(v, h)


def _make_generator(master_seed: int, key: bytes, redraw: int = 0) -> np.random.Generator:
    words = [int.from_bytes(key[i : i + 4], "little") for i in range(0, len(key), 4)]
    seed_sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(words + [redraw]))
    return np.random.Generator(np.random.Philox(seed_sequence))


def load_bar_file(bar_file_path: pathlib.Path, tree: TreeHandle) -> typing.List[Bar]:
    """
    Reads bars from lines of the form `edge-path<TAB>height`. Blank lines and
    lines starting with `#` are skipped.
    """
    bars = []
    with open(bar_file_path, "r") as bar_file:
        for line_number, line in enumerate(bar_file, start=1):
            line = line.strip()
            if "" == line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if 2 != len(fields):
                raise ValueError(f"{bar_file_path}:{line_number}: expected 'edge<TAB>height'.")
            edge = tree.vertex_from_string(fields[0])
            bars.append(Bar(edge, float(fields[1])))
    return bars


def write_bar_file(bar_file_path: pathlib.Path, bars: typing.Iterable[Bar]):
    with open(bar_file_path, "w") as bar_file:
        for bar in sorted(bars, key=lambda b: (b.edge.path, b.height)):
            bar_file.write(f"{bar.edge}\t{bar.height!r}\n")


def realized_bars(store: BarStore, vertices: typing.Iterable[VertexId]) -> typing.List[Bar]:
    """:return: The bars on the child edges of the given vertices."""
    bars = []
    for p in vertices:
        pole = store.pole(p)
        for h, label in zip(pole.heights, pole.labels):
            if PARENT_EDGE != label:
                bars.append(Bar(store.tree.child(p, label), h))
    return bars
