"""
The stirring permutation sigma_T of a finite tree, computed two ways: by
composing the bars' transpositions in time order, and by running the meander
from every vertex for exactly one period.
"""

from __future__ import annotations

import json
import pathlib
import typing

from .bar_process import Bar, FixedBarStore
from .meander import run_meander
from .tree_core import StirringError, TreeHandle, VertexId


class DuplicateHeight(StirringError):
    pass


class Permutation:
    __slots__ = ("mapping",)

    def __init__(self, mapping: typing.Dict[VertexId, VertexId]):
        if set(mapping.keys()) != set(mapping.values()):
            raise ValueError("A permutation must be a bijection of its vertex set.")
        self.mapping = mapping

    @staticmethod
    def identity(vertices: typing.Iterable[VertexId]) -> Permutation:
        return Permutation({v: v for v in vertices})

    def __call__(self, v: VertexId) -> VertexId:
        return self.mapping[v]

    def __eq__(self, other):
        if not isinstance(other, Permutation):
            return NotImplemented
        return self.mapping == other.mapping

    def __len__(self):
        return len(self.mapping)

    def __repr__(self):
        return f"Permutation({cycle_decomposition(self)})"

    def compose(self, other: Permutation) -> Permutation:
        """:return: The permutation applying self first, then other."""
        return Permutation({v: other(self(v)) for v in self.mapping})

    def is_identity(self) -> bool:
        return all(v == w for v, w in self.mapping.items())

    def cycle_of(self, v: VertexId) -> typing.List[VertexId]:
        cycle = [v]
        current = self(v)
        while current != v:
            cycle.append(current)
            current = self(current)
        return cycle


def _finite_vertices(tree: TreeHandle) -> typing.List[VertexId]:
    if not tree.spec.is_finite:
        raise ValueError("The stirring permutation is only computed on finite trees.")
    return tree.vertices()


def compose_transpositions(tree: TreeHandle, bars: typing.Iterable[Bar]) -> Permutation:
    """
    Applies the transposition of each bar's edge in increasing order of height.

    :return: sigma, where sigma(x) is the final position of the particle starting at x.
    :raise DuplicateHeight: If two bars share a height.
    """
    vertices = _finite_vertices(tree)
    ordered = sorted(bars, key=lambda bar: bar.height)
    for earlier, later in zip(ordered, ordered[1:]):
        if earlier.height == later.height:
            raise DuplicateHeight(f"Bars {earlier} and {later} share a height.")

    position = {v: v for v in vertices}
    occupant = {v: v for v in vertices}
    for bar in ordered:
        upper_particle = occupant[bar.upper]
        lower_particle = occupant[bar.lower]
        occupant[bar.upper] = lower_particle
        occupant[bar.lower] = upper_particle
        position[upper_particle] = bar.lower
        position[lower_particle] = bar.upper
    return Permutation(position)


def meander_permutation(tree: TreeHandle, bars: typing.Iterable[Bar], T: float) -> Permutation:
    """
    :return: sigma with sigma(v) = Y_v(T), the position after one period of the meander
    started at (v, 0).
    :raise DuplicateHeight: If two bars share a height.
    """
    bars = list(bars)
    heights = sorted(bar.height for bar in bars)
    if any(earlier == later for earlier, later in zip(heights, heights[1:])):
        raise DuplicateHeight("Two bars share a height.")

    vertices = _finite_vertices(tree)
    store = FixedBarStore(tree, T, bars)
    mapping = {}
    for v in vertices:
        if 0 == T:
            mapping[v] = v
            continue
        traj = run_meander(store, (v, 0.0), budget=len(bars) + 1, horizon=T)
        mapping[v] = traj.vertex_at(T)
    return Permutation(mapping)


def cycle_decomposition(p: Permutation) -> typing.List[typing.List[VertexId]]:
    """
    :return: The disjoint cycles of p, each starting at its lexicographically least
    vertex, ordered by that vertex.
    """
    cycles = []
    visited = set()
    for v in sorted(p.mapping.keys()):
        if v in visited:
            continue
        cycle = p.cycle_of(v)
        visited.update(cycle)
        cycles.append(cycle)
    return cycles


def cycle_lengths(p: Permutation) -> typing.List[int]:
    return sorted(len(cycle) for cycle in cycle_decomposition(p))


def reversed_time_bars(bars: typing.Iterable[Bar], T: float) -> typing.List[Bar]:
    """:return: The same bars with heights h -> T - h."""
    return [Bar(bar.edge, T - bar.height) for bar in bars]


def permutation_to_json(p: Permutation) -> str:
    return json.dumps([[str(v) for v in cycle] for cycle in cycle_decomposition(p)])


def write_permutation(permutation_file_path: pathlib.Path, p: Permutation):
    with open(permutation_file_path, "w") as permutation_file:
        permutation_file.write(permutation_to_json(p))
        permutation_file.write("\n")
