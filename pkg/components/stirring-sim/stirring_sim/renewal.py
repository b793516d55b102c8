"""
The biased walk on {0, 1, 2, ...} reflected at zero, its strong renewal
points, and the continuous-time walk on a tree whose distance from the root
it describes.
"""

from __future__ import annotations

import math
import typing

import numpy as np
from scipy import stats
from stirring_py_utils.stirring_logging import get_logger

from .tree_core import TreeHandle, VertexId

logger = get_logger(__name__)

WALK_CHUNK_SIZE = 65536
# Values revisited only after this many further steps are treated as never revisited
DEFAULT_LOOKAHEAD = 1000
MIN_RENEWAL_POINTS = 10
CONFIDENCE_LEVEL = 0.99


class BiasedWalkPath(typing.NamedTuple):
    beta: float
    # steps[0] = 0; one more value than the number of steps taken
    steps: np.ndarray

    def __len__(self):
        return len(self.steps)


class DensityEstimate(typing.NamedTuple):
    mean: float
    lo99: float
    hi99: float
    standard_error: float
    replicas: int

    def covers(self, value: float, slack: float = 0.0) -> bool:
        return self.lo99 - slack <= value <= self.hi99 + slack


def strong_renewal_density(beta: float) -> float:
    """:return: beta * (beta - 1) / (beta + 1)^2, the limiting density of strong renewal points."""
    if math.isinf(beta):
        return 1.0
    return beta * (beta - 1) / (beta + 1) ** 2


def simulate_walk(beta: float, n: int, seed: int) -> BiasedWalkPath:
    """
    :param beta: Bias; from a positive state the walk steps up with probability
    beta / (beta + 1). Infinity gives the deterministic upward path.
    :param n: Number of steps.
    :param seed:
    :return: The path Z_0 = 0, Z_1, ..., Z_n. From 0 the walk always steps up.
    """
    if not beta > 1:
        raise ValueError("beta must be greater than 1.")
    if n < 1:
        raise ValueError("n must be at least 1.")
    if math.isinf(beta):
        return BiasedWalkPath(beta, np.arange(n + 1, dtype=np.int64))

    rng = np.random.default_rng(seed)
    p_up = beta / (beta + 1)
    values = np.empty(n + 1, dtype=np.int64)
    values[0] = 0
    filled = 0
    while filled < n:
        current = values[filled]
        if 0 == current:
            values[filled + 1] = 1
            filled += 1
            continue
        # Run free of the reflection until the chunk ends or the walk hits 0
        size = min(n - filled, WALK_CHUNK_SIZE)
        increments = np.where(rng.random(size) < p_up, 1, -1)
        segment = current + np.cumsum(increments)
        zeros = np.flatnonzero(0 == segment)
        stop = zeros[0] + 1 if len(zeros) > 0 else size
        values[filled + 1 : filled + 1 + stop] = segment[:stop]
        filled += stop
    return BiasedWalkPath(beta, values)


def renewal_point_mask(steps: np.ndarray) -> np.ndarray:
    """:return: For each index, whether its value occurs nowhere else on the path."""
    visits = np.bincount(steps)
    return 1 == visits[steps]


def strong_renewal_points(path: BiasedWalkPath) -> typing.Set[int]:
    """:return: The indices k such that both k and k + 1 are renewal points."""
    mask = renewal_point_mask(path.steps)
    return set(np.flatnonzero(mask[:-1] & mask[1:]).tolist())


def simulate_walk_to_level(beta: float, level: int, seed: int) -> BiasedWalkPath:
    """:return: A path of the walk long enough to have reached level."""
    if math.isinf(beta):
        return simulate_walk(beta, level, seed)
    # Margin over the expected number of steps, (beta + 1) / (beta - 1) per level
    n = math.ceil(1.2 * level * (beta + 1) / (beta - 1)) + 100
    while True:
        path = simulate_walk(beta, n, seed)
        if path.steps[-1] >= level:
            return path
        n *= 2


def count_strong_renewal_points(
    beta: float, n: int, seed: int, lookahead: int = DEFAULT_LOOKAHEAD
) -> int:
    """
    Counts strong renewal points by the level they sit at: the levels z in [1, n] with
    z = Z(k) for a strong renewal point k. The path is run until it reaches level
    n + lookahead.

    :return: The number of such levels.
    """
    path = simulate_walk_to_level(beta, n + lookahead, seed)
    mask = renewal_point_mask(path.steps)
    strong = mask[:-1] & mask[1:]
    levels = path.steps[:-1][strong]
    return int(np.count_nonzero((levels >= 1) & (levels <= n)))


def srg_density_estimate(
    beta: float, n: int, replicas: int, seed: int, lookahead: int = DEFAULT_LOOKAHEAD
) -> DensityEstimate:
    """
    :return: The mean over independent replicas of the fraction of levels in [1, n] that
    carry a strong renewal point, with a normal-approximation 99% interval.
    """
    if n < 1000:
        raise ValueError("n must be at least 1000.")
    if replicas < 2:
        raise ValueError("At least two replicas are needed for an interval.")

    children = np.random.SeedSequence(seed).spawn(replicas)
    densities = np.array(
        [
            count_strong_renewal_points(beta, n, child.generate_state(1)[0], lookahead) / n
            for child in children
        ]
    )
    mean = float(densities.mean())
    standard_error = float(densities.std(ddof=1) / math.sqrt(replicas))
    z = stats.norm.ppf(0.5 + CONFIDENCE_LEVEL / 2)
    logger.info(
        f"SRG density for beta={beta}: {mean:.6f} ± {z * standard_error:.6f}"
        f" (limit {strong_renewal_density(beta):.6f})."
    )
    return DensityEstimate(
        mean, mean - z * standard_error, mean + z * standard_error, standard_error, replicas
    )


def renewal_gaps(points: typing.Iterable[int]) -> np.ndarray:
    return np.diff(np.array(sorted(points), dtype=np.int64))


def gap_independence_pvalue(gaps: np.ndarray, categories: int = 3) -> float:
    """
    Tests consecutive gaps for lag-1 independence with a chi-squared contingency test.
    Gaps are grouped into quantile categories first.

    :return: The p-value.
    :raise ValueError: If fewer than MIN_RENEWAL_POINTS points produced the gaps.
    """
    if len(gaps) + 1 < MIN_RENEWAL_POINTS:
        raise ValueError(f"At least {MIN_RENEWAL_POINTS} renewal points are needed.")
    edges = np.unique(np.quantile(gaps, np.linspace(0, 1, categories + 1)[1:-1]))
    labels = np.digitize(gaps, edges, right=True)
    table = np.zeros((len(edges) + 1, len(edges) + 1), dtype=np.int64)
    np.add.at(table, (labels[:-1], labels[1:]), 1)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if table.shape[0] < 2 or table.shape[1] < 2:
        # A single category carries no evidence of dependence
        return 1.0
    return float(stats.chi2_contingency(table)[1])


class StepFrequency(typing.NamedTuple):
    frequency: float
    standard_error: float
    count: int


def step_up_frequency(values: np.ndarray) -> StepFrequency:
    """:return: The fraction of steps taken from positive states that go up."""
    values = np.asarray(values)
    from_positive = values[:-1] > 0
    count = int(np.count_nonzero(from_positive))
    if 0 == count:
        raise ValueError("The path never leaves zero.")
    ups = int(np.count_nonzero((np.diff(values) > 0) & from_positive))
    frequency = ups / count
    return StepFrequency(frequency, math.sqrt(frequency * (1 - frequency) / count), count)


class ContinuousWalkPath(typing.NamedTuple):
    # jump_times[k] is the time of the k-th jump; jump_times[0] = 0 marks the start
    jump_times: np.ndarray
    vertices: typing.List[VertexId]

    def depths(self) -> np.ndarray:
        return np.array([v.depth for v in self.vertices], dtype=np.int64)


def simulate_continuous_walk(tree: TreeHandle, steps: int, seed: int) -> ContinuousWalkPath:
    """
    Runs the continuous-time simple random walk W from the root: at each vertex it waits
    an exponential time with rate equal to the vertex degree, then jumps to a uniformly
    chosen neighbour.

    :raise DepthCapExceeded: If the walk reaches the depth cap of an untruncated tree.
    """
    rng = np.random.default_rng(seed)
    vertex = tree.root
    vertices = [vertex]
    times = np.zeros(steps + 1)
    uniforms = rng.random(steps)
    for k in range(steps):
        children = tree.children(vertex)
        degree = len(children) + (0 if vertex.is_root else 1)
        if 0 == degree:
            raise ValueError(f"The walk is stuck at the isolated vertex {vertex}.")
        times[k + 1] = times[k] + rng.exponential(1 / degree)
        choice = int(uniforms[k] * degree)
        if choice < len(children):
            vertex = children[choice]
        else:
            vertex = vertex.parent
        vertices.append(vertex)
    return ContinuousWalkPath(times, vertices)


def jump_chain_depths(path: ContinuousWalkPath) -> np.ndarray:
    """:return: The distance from the root after each jump of W."""
    return path.depths()
