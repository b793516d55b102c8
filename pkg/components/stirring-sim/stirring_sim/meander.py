"""
Event-driven simulation of the cyclic-time random meander X and its vertex
projection Y.
"""

from __future__ import annotations

import bisect
import math
import pathlib
import typing
from enum import auto, IntEnum

from stirring_py_utils.stirring_logging import get_logger

from .bar_process import Bar, BarStore
from .tree_core import DepthCapExceeded, StirringError, VertexId

logger = get_logger(__name__)

DEFAULT_BUDGET = 1000000
HEIGHT_TOLERANCE = 2**-40


class QueryBeyondHorizon(StirringError):
    pass


class TrajectoryVerdict(IntEnum):
    RUNNING = 0
    PERIODIC = auto()
    STUCK = auto()
    DEPTH_CAP_HIT = auto()
    BUDGET_EXHAUSTED = auto()
    HORIZON_REACHED = auto()

    @staticmethod
    def from_str(label: str) -> TrajectoryVerdict:
        return TrajectoryVerdict[label.upper()]

    def __str__(self) -> str:
        return str(self.value)

    def to_str(self) -> str:
        return str(self.name)


class CrossingEvent(typing.NamedTuple):
    clock: float
    bar: Bar
    departed: VertexId
    arrived: VertexId
    # Number of completed laps of the pole height when the bar is met
    laps: int

    @property
    def is_downward(self) -> bool:
        return self.arrived.parent is not None and self.arrived.parent == self.departed

    @property
    def direction(self) -> str:
        return "down" if self.is_downward else "up"

    def shifted(self, clock_offset: float, lap_offset: int) -> CrossingEvent:
        return self._replace(clock=self.clock + clock_offset, laps=self.laps + lap_offset)


class Trajectory:
    """
    The crossing history of one meander run. Between events Y is constant.
    Periodic runs are extended periodically, so queries at any time are answered.
    """

    def __init__(self, start: VertexId, start_height: float, T: float):
        self.start = start
        self.start_height = start_height
        self.T = T
        self.events: typing.List[CrossingEvent] = []
        self.verdict = TrajectoryVerdict.RUNNING
        self.first_repeat_index: typing.Optional[int] = None
        self.period_laps: typing.Optional[int] = None
        self.horizon: typing.Optional[float] = None
        self._clocks: typing.List[float] = []

    def _append(self, event: CrossingEvent):
        self.events.append(event)
        self._clocks.append(event.clock)

    @property
    def period(self) -> typing.Optional[float]:
        if self.period_laps is None:
            return None
        return self.period_laps * self.T

    @property
    def covered_until(self) -> float:
        """The end of the time interval on which Y is known."""
        if self.verdict in (TrajectoryVerdict.PERIODIC, TrajectoryVerdict.STUCK):
            return math.inf
        if TrajectoryVerdict.HORIZON_REACHED == self.verdict:
            return self.horizon
        if 0 == len(self.events):
            return 0.0
        return self.events[-1].clock

    @property
    def is_censored(self) -> bool:
        return self.verdict in (
            TrajectoryVerdict.DEPTH_CAP_HIT,
            TrajectoryVerdict.BUDGET_EXHAUSTED,
            TrajectoryVerdict.HORIZON_REACHED,
        )

    def _check_covered(self, t: float):
        if t > self.covered_until:
            raise QueryBeyondHorizon(f"Time {t} is beyond the covered time {self.covered_until}.")

    def _reduce(self, t: float) -> typing.Tuple[float, int]:
        """
        Maps t into the first period of a periodic run.

        :return: The reduced time and the number of whole periods removed.
        """
        if TrajectoryVerdict.PERIODIC != self.verdict:
            return t, 0
        periodic_start = self.events[self.first_repeat_index].clock
        if t < periodic_start + self.period:
            return t, 0
        periods = math.floor((t - periodic_start) / self.period)
        reduced = t - periods * self.period
        # Guard against rounding pushing the time out of [start, start + period)
        if reduced >= periodic_start + self.period:
            reduced -= self.period
            periods += 1
        return reduced, periods

    def vertex_at(self, t: float) -> VertexId:
        """:return: Y(t), with Y right-continuous."""
        if t < 0:
            raise ValueError("Time cannot be negative.")
        self._check_covered(t)
        reduced, _ = self._reduce(t)
        index = bisect.bisect_right(self._clocks, reduced) - 1
        if index < 0:
            return self.start
        return self.events[index].arrived

    def events_until(self, t: float) -> typing.List[CrossingEvent]:
        """:return: All crossings with clock <= t, extending periodic runs as needed."""
        self._check_covered(t)
        if TrajectoryVerdict.PERIODIC != self.verdict:
            return self.events[: bisect.bisect_right(self._clocks, t)]

        extended = list(self.events[: self.first_repeat_index])
        cycle = self.events[self.first_repeat_index :]
        periods = 0
        while True:
            offset = periods * self.period
            for event in cycle:
                if event.clock + offset > t:
                    return extended
                extended.append(event.shifted(offset, periods * self.period_laps))
            periods += 1

    def events_between(self, s: float, t: float) -> typing.List[CrossingEvent]:
        """:return: All crossings with s < clock <= t."""
        return [event for event in self.events_until(t) if event.clock > s]

    def visited_vertices(self) -> typing.List[VertexId]:
        visited = {self.start: None}
        for event in self.events:
            visited.setdefault(event.arrived, None)
        return list(visited)


def run_meander(
    store: BarStore,
    start: typing.Tuple[VertexId, float],
    budget: int = DEFAULT_BUDGET,
    horizon: typing.Optional[float] = None,
) -> Trajectory:
    """
    Runs the meander from start until its orbit closes, it gets stuck, or it is
    censored by the depth cap, the event budget or the horizon.

    :param store:
    :param start: (vertex, height) with height in [0, T).
    :param budget: Maximum number of crossings to record.
    :param horizon: Crossings at clocks >= horizon are not recorded.
    :return: The trajectory.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1.")
    start_vertex, start_height = start
    T = store.T
    if not 0 <= start_height < T and not (0 == T and 0 == start_height):
        raise ValueError(f"Start height {start_height} is outside [0, {T}).")

    traj = Trajectory(start_vertex, start_height, T)
    traj.horizon = horizon
    # (bar, arrival vertex) -> index of the event arriving there
    seen: typing.Dict[typing.Tuple[Bar, VertexId], int] = {}
    vertex = start_vertex
    height = start_height
    laps = 0
    first_step = True
    while True:
        if len(traj.events) >= budget:
            traj.verdict = TrajectoryVerdict.BUDGET_EXHAUSTED
            break
        try:
            joint = store.next_joint(vertex, height, inclusive=first_step)
        except DepthCapExceeded:
            traj.verdict = TrajectoryVerdict.DEPTH_CAP_HIT
            break
        if joint is None:
            traj.verdict = TrajectoryVerdict.STUCK
            break

        if joint.height < height or (joint.height == height and not first_step):
            laps += 1
        clock = laps * T + (joint.height - start_height)
        if horizon is not None and clock >= horizon:
            traj.verdict = TrajectoryVerdict.HORIZON_REACHED
            break

        state = (joint.bar, joint.target)
        repeat_index = seen.get(state)
        if repeat_index is not None:
            traj.verdict = TrajectoryVerdict.PERIODIC
            traj.first_repeat_index = repeat_index
            traj.period_laps = laps - traj.events[repeat_index].laps
            break
        seen[state] = len(traj.events)
        traj._append(CrossingEvent(clock, joint.bar, vertex, joint.target, laps))

        vertex = joint.target
        height = joint.height
        first_step = False

    logger.debug(
        f"Meander from ({start_vertex}, {start_height}) finished with"
        f" {traj.verdict.to_str()} after {len(traj.events)} crossings."
    )
    return traj


class HitStatus(IntEnum):
    HIT = 0
    NOT_HIT_CENSORED = auto()
    NEVER_HIT = auto()


class HittingTime(typing.NamedTuple):
    status: HitStatus
    clock: float

    @property
    def is_hit(self) -> bool:
        return HitStatus.HIT == self.status


def hitting_time(
    traj: Trajectory, from_time: float, targets: typing.Collection[VertexId]
) -> HittingTime:
    """
    :param traj:
    :param from_time: t
    :param targets: The vertex set A.
    :return: H_{t,A} = inf{s >= t : Y(s) in A}. A miss is NEVER_HIT if the run is known
    forever, and NOT_HIT_CENSORED otherwise; its clock is then infinity.
    :raise QueryBeyondHorizon: If from_time is beyond the covered time.
    """
    if traj.vertex_at(from_time) in targets:
        return HittingTime(HitStatus.HIT, from_time)

    if TrajectoryVerdict.STUCK == traj.verdict:
        return HittingTime(HitStatus.NEVER_HIT, math.inf)
    if TrajectoryVerdict.PERIODIC == traj.verdict:
        # Every state of the orbit recurs within one period
        search_until = from_time + traj.period
    else:
        search_until = traj.covered_until

    for event in traj.events_between(from_time, search_until):
        if event.arrived in targets:
            return HittingTime(HitStatus.HIT, event.clock)
    if TrajectoryVerdict.PERIODIC == traj.verdict:
        return HittingTime(HitStatus.NEVER_HIT, math.inf)
    return HittingTime(HitStatus.NOT_HIT_CENSORED, math.inf)


class CycleOutcome(IntEnum):
    FINITE_CYCLE = 0
    CENSORED_AT_DEPTH = auto()
    CENSORED_AT_BUDGET = auto()
    CENSORED_AT_HORIZON = auto()


class CycleVerdict(typing.NamedTuple):
    outcome: CycleOutcome
    length: typing.Optional[int] = None

    @property
    def is_finite(self) -> bool:
        return CycleOutcome.FINITE_CYCLE == self.outcome


def cycle_verdict(traj: Trajectory) -> CycleVerdict:
    if TrajectoryVerdict.PERIODIC == traj.verdict:
        return CycleVerdict(CycleOutcome.FINITE_CYCLE, traj.period_laps)
    if TrajectoryVerdict.STUCK == traj.verdict:
        return CycleVerdict(CycleOutcome.FINITE_CYCLE, 1)
    if TrajectoryVerdict.DEPTH_CAP_HIT == traj.verdict:
        return CycleVerdict(CycleOutcome.CENSORED_AT_DEPTH)
    if TrajectoryVerdict.BUDGET_EXHAUSTED == traj.verdict:
        return CycleVerdict(CycleOutcome.CENSORED_AT_BUDGET)
    return CycleVerdict(CycleOutcome.CENSORED_AT_HORIZON)


def root_cycle_length(
    store: BarStore, budget: int = DEFAULT_BUDGET, horizon: typing.Optional[float] = None
) -> CycleVerdict:
    """
    :return: The length of the root's cycle under the stirring permutation, found as the
    least k >= 1 with X(kT) = (phi, 0), or the reason the run was censored.
    """
    traj = run_meander(store, (store.tree.root, 0.0), budget=budget, horizon=horizon)
    return cycle_verdict(traj)


def frontier_times(traj: Trajectory) -> typing.List[float]:
    """:return: The clocks at which Y first visits a vertex, excluding time 0."""
    visited = {traj.start}
    times = []
    for event in traj.events:
        if event.arrived not in visited:
            visited.add(event.arrived)
            times.append(event.clock)
    return times


def check_trajectory(traj: Trajectory) -> typing.List[str]:
    """
    Checks the structural invariants of a trajectory.

    :return: A description of every violation found.
    """
    violations = []
    previous_vertex = traj.start
    previous_clock = -math.inf
    last_direction: typing.Dict[Bar, VertexId] = {}
    for i, event in enumerate(traj.events):
        if event.departed != previous_vertex:
            violations.append(f"Event {i} departs {event.departed}, not {previous_vertex}.")
        if event.clock <= previous_clock:
            violations.append(f"Event {i} clock {event.clock} does not increase.")
        if {event.departed, event.arrived} != {event.bar.upper, event.bar.lower}:
            violations.append(f"Event {i} does not cross between the joints of its bar.")
        expected_height = (traj.start_height + event.clock) % traj.T if traj.T > 0 else 0.0
        gap = abs(expected_height - event.bar.height)
        # The clock carries laps * T, so its rounding error grows with the lap count
        if min(gap, traj.T - gap) > HEIGHT_TOLERANCE * traj.T * (event.laps + 1):
            violations.append(f"Event {i} height {event.bar.height} disagrees with its clock.")
        # Each bar must be crossed alternately in opposite directions
        if last_direction.get(event.bar) == event.arrived:
            violations.append(f"Event {i} crosses {event.bar} in the same direction twice.")
        last_direction[event.bar] = event.arrived
        previous_vertex = event.arrived
        previous_clock = event.clock
    return violations


def write_trajectory_dump(dump_file_path: pathlib.Path, traj: Trajectory, seed: int):
    with open(dump_file_path, "w") as dump_file:
        dump_file.write(f"T={traj.T!r} seed={seed}\n")
        for event in traj.events:
            dump_file.write(
                f"{event.clock!r}\t{event.bar.edge}\t{event.direction}\t{event.bar.height!r}\n"
            )
