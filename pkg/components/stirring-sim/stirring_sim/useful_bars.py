"""
Useful bars, regeneration times and returns to useful bars, evaluated on
recorded trajectories.

A bar joins U_t once Y, having stepped down across it, leaves the bar's child
vertex towards an offspring. It leaves U_t just after Y revisits either of the
bar's vertices.
"""

from __future__ import annotations

import math
import typing
from collections import Counter
from enum import auto, IntEnum

from .bar_process import Bar
from .meander import CrossingEvent, hitting_time, Trajectory
from .tree_core import graph_distance, StirringError, VertexId


class NotAUsefulBar(StirringError):
    pass


class PreconditionViolated(StirringError):
    pass


class UsefulBarMember(typing.NamedTuple):
    bar: Bar
    # H_{e+}: first arrival at the bar's parent vertex
    upper_hit: float
    # H_{e-}: the crossing, i.e. first arrival at the bar's child vertex
    lower_hit: float
    # Departure from the child vertex; the dwell interval is [lower_hit, dwell_end)
    dwell_end: float


class UsefulBarReport:
    def __init__(
        self,
        at_time: float,
        members: typing.List[UsefulBarMember],
        since: typing.Optional[float] = None,
    ):
        self.at_time = at_time
        self.since = since
        # In crossing order
        self.members = members

    def __len__(self):
        return len(self.members)

    def __contains__(self, bar: Bar):
        return any(member.bar == bar for member in self.members)

    def __iter__(self):
        return iter(self.members)

    def bars(self) -> typing.Set[Bar]:
        return {member.bar for member in self.members}

    def last_crossed(self) -> typing.Optional[UsefulBarMember]:
        return self.members[-1] if self.members else None

    def to_dict(self) -> typing.Dict[str, typing.Any]:
        return {
            "at_time": self.at_time,
            "since": self.since,
            "members": [
                {
                    "edge": str(member.bar.edge),
                    "height": member.bar.height,
                    "upper_hit": member.upper_hit,
                    "lower_hit": member.lower_hit,
                    "dwell_end": member.dwell_end,
                }
                for member in self.members
            ],
        }


def _window(
    traj: Trajectory, s: float, t: float
) -> typing.Tuple[typing.List[VertexId], typing.List[float], typing.List[CrossingEvent]]:
    """
    :return: The vertices Y occupies on [s, t] in order, the start time of each stay, and
    the crossings in (s, t] that separate them.
    """
    events = traj.events_between(s, t)
    vertices = [traj.vertex_at(s)] + [event.arrived for event in events]
    starts = [s] + [event.clock for event in events]
    return vertices, starts, events


def _useful_members(
    traj: Trajectory, s: float, t: float, relative: bool, right_limit: bool
) -> typing.List[UsefulBarMember]:
    vertices, starts, events = _window(traj, s, t)
    closed_visits = Counter(vertices)
    if right_limit:
        open_visits = closed_visits
    else:
        open_visits = Counter(v for v, start in zip(vertices, starts) if start < t)

    origin = vertices[0]
    record_distances = None
    if relative:
        # record_distances[k] = max distance from origin over the stays before stay k
        record_distances = [-1]
        for v in vertices[:-1]:
            record_distances.append(max(record_distances[-1], graph_distance(origin, v)))

    members = []
    half_period = traj.T / 2
    for k, event in enumerate(events):
        if event.clock >= t or not event.is_downward:
            continue
        upper = event.departed
        lower = event.arrived
        # Stay k is at upper, stay k + 1 at lower
        if 1 != closed_visits[upper] or 1 != open_visits[lower]:
            continue
        if k + 1 >= len(events):
            continue
        departure = events[k + 1].clock
        if not right_limit and not departure < t:
            continue
        if event.clock - starts[k] > half_period:
            continue
        if relative:
            if not upper.is_strict_descendant_of(origin):
                continue
            if not graph_distance(origin, upper) > record_distances[k]:
                continue
        members.append(UsefulBarMember(event.bar, starts[k], event.clock, departure))
    return members


def useful_bars_at(traj: Trajectory, t: float, right_limit: bool = False) -> UsefulBarReport:
    """
    :param traj:
    :param t:
    :param right_limit: Whether to return U_{t+}, the value on the open interval after t,
    instead of U_t itself. The two differ only when a crossing happens exactly at t.
    :return: U_t, the useful bars at time t.
    :raise QueryBeyondHorizon: If t is beyond the covered time.
    """
    if t <= 0:
        traj.vertex_at(0)
        return UsefulBarReport(t, [])
    return UsefulBarReport(t, _useful_members(traj, 0.0, t, False, right_limit))


def useful_bars_between(traj: Trajectory, s: float, t: float) -> UsefulBarReport:
    """
    :return: U_{s,t}, the bars crossed during [s, t) that are useful relative to the start time
    s: their parent vertex is a strict descendant of Y(s) reached at a record distance from Y(s).
    :raise QueryBeyondHorizon: If t is beyond the covered time.
    """
    if not 0 <= s < t:
        raise ValueError("useful_bars_between needs 0 <= s < t.")
    return UsefulBarReport(t, _useful_members(traj, s, t, True, False), since=s)


class UsefulBarTracker:
    """
    Maintains U_{t+} while a trajectory's crossings are fed in time order.
    Matches useful_bars_at(traj, t, right_limit=True) after the crossings up to t.
    """

    def __init__(self, traj: Trajectory):
        self.traj = traj
        self.clock = 0.0
        self.vertex = traj.vertex_at(0)
        self.visits: typing.Counter[VertexId] = Counter({self.vertex: 1})
        self.first_arrival: typing.Dict[VertexId, float] = {self.vertex: 0.0}
        self._last_event: typing.Optional[CrossingEvent] = None
        # Keyed by the child vertex of the supporting edge, in crossing order
        self._by_lower: typing.Dict[VertexId, UsefulBarMember] = {}
        self._upper_to_lower: typing.Dict[VertexId, VertexId] = {}

    @property
    def members(self) -> typing.List[UsefulBarMember]:
        return list(self._by_lower.values())

    def __len__(self):
        return len(self._by_lower)

    def report(self) -> UsefulBarReport:
        return UsefulBarReport(self.clock, self.members)

    def feed(self, event: CrossingEvent):
        candidate = self._last_event
        if (
            candidate is not None
            and candidate.is_downward
            and 1 == self.visits[candidate.arrived]
            and 1 == self.visits[candidate.departed]
            and event.arrived != candidate.departed
        ):
            upper_hit = self.first_arrival[candidate.departed]
            if candidate.clock - upper_hit <= self.traj.T / 2:
                self._by_lower[candidate.arrived] = UsefulBarMember(
                    candidate.bar, upper_hit, candidate.clock, event.clock
                )
                self._upper_to_lower[candidate.departed] = candidate.arrived

        arrived = event.arrived
        self._drop(self._by_lower.get(arrived))
        lower = self._upper_to_lower.get(arrived)
        if lower is not None:
            self._drop(self._by_lower.get(lower))

        self.visits[arrived] += 1
        self.first_arrival.setdefault(arrived, event.clock)
        self.vertex = arrived
        self.clock = event.clock
        self._last_event = event

    def _drop(self, member: typing.Optional[UsefulBarMember]):
        if member is None:
            return
        del self._by_lower[member.bar.lower]
        del self._upper_to_lower[member.bar.upper]

    def has_visited(self, v: VertexId) -> bool:
        return self.visits[v] > 0


def is_regeneration_time(traj: Trajectory, s: float, t: float) -> bool:
    """:return: Whether {r in [0, t] : Y(r) = Y(s)} is an interval."""
    if s > t:
        raise ValueError("A regeneration time cannot exceed t.")
    target = traj.vertex_at(s)
    vertices, _, _ = _window(traj, 0.0, t)
    return 1 == sum(1 for v in vertices if v == target)


def stays_in_descendant_tree(traj: Trajectory, s: float, t: float) -> bool:
    """:return: Whether Y(r) is a descendant of Y(s) for every r in [s, t]."""
    origin = traj.vertex_at(s)
    return all(event.arrived.is_descendant_of(origin) for event in traj.events_between(s, t))


class ReturnOutcome(IntEnum):
    NO_RETURN_OBSERVED = 0
    GOOD_RETURN = auto()
    BAD_RETURN = auto()
    # The return was seen, but not enough of what follows it
    CENSORED = auto()


class _VertexComplement:
    """The vertex set V(G) minus the given vertices."""

    def __init__(self, excluded: typing.Iterable[VertexId]):
        self.excluded = set(excluded)

    def __contains__(self, v: VertexId):
        return v not in self.excluded


def _visited_before(traj: Trajectory, t: float) -> typing.Set[VertexId]:
    visited = {traj.vertex_at(0)}
    for event in traj.events_until(t):
        if event.clock < t:
            visited.add(event.arrived)
    return visited


def makes_rapid_advance(traj: Trajectory, f: float, c1: float) -> bool:
    """
    :return: Whether Y stays in the descendant tree of Y(f) throughout [f, f + T] and
    |U_{f,f+T}| >= c1 * T.
    :raise QueryBeyondHorizon: If f + T is beyond the covered time.
    """
    end = f + traj.T
    if not stays_in_descendant_tree(traj, f, end):
        return False
    return len(useful_bars_between(traj, f, end)) >= c1 * traj.T


class ReturnClassification(typing.NamedTuple):
    outcome: ReturnOutcome
    return_time: float = math.inf
    departure_time: float = math.inf
    # None when the departure was not observed
    frontier_departure: typing.Optional[bool] = None


def _classify_return(traj: Trajectory, bar: Bar, t: float, c1: float) -> ReturnClassification:
    returned = hitting_time(traj, t, {bar.lower})
    if not returned.is_hit:
        return ReturnClassification(ReturnOutcome.NO_RETURN_OBSERVED)

    departed = hitting_time(traj, returned.clock, _VertexComplement((bar.upper, bar.lower)))
    if not departed.is_hit:
        return ReturnClassification(ReturnOutcome.CENSORED, returned.clock)

    f = departed.clock
    arrival = traj.vertex_at(f)
    is_frontier = arrival not in _visited_before(traj, f) and arrival.parent in (
        bar.upper,
        bar.lower,
    )
    if not is_frontier:
        return ReturnClassification(ReturnOutcome.BAD_RETURN, returned.clock, f, False)
    if f + traj.T > traj.covered_until:
        return ReturnClassification(ReturnOutcome.CENSORED, returned.clock, f, True)
    if makes_rapid_advance(traj, f, c1):
        return ReturnClassification(ReturnOutcome.GOOD_RETURN, returned.clock, f, True)
    return ReturnClassification(ReturnOutcome.BAD_RETURN, returned.clock, f, True)


def classify_return(traj: Trajectory, report_bar: Bar, t: float, c1: float) -> ReturnOutcome:
    """
    Classifies the first return of Y after t to the child vertex of a useful bar. The return
    is good if Y then leaves the bar's edge for a never-visited offspring of one of its
    vertices and makes a rapid advance from that frontier time.

    :raise NotAUsefulBar: If report_bar is not in U_t.
    """
    if report_bar not in useful_bars_at(traj, t):
        raise NotAUsefulBar(f"{report_bar} is not useful at time {t}.")
    return _classify_return(traj, report_bar, t, c1).outcome


def check_lemma4(traj: Trajectory, s: float, t: float) -> bool:
    """
    :return: Whether U_s and U_{s,t} are disjoint subsets of U_t.
    :raise PreconditionViolated: Unless s is a t-regeneration time after which Y stays in the
    descendant tree of Y(s) up to t.
    """
    if not 0 <= s < t:
        raise PreconditionViolated("Need 0 <= s < t.")
    if not is_regeneration_time(traj, s, t):
        raise PreconditionViolated(f"{s} is not a {t}-regeneration time.")
    if not stays_in_descendant_tree(traj, s, t):
        raise PreconditionViolated(f"Y leaves the descendant tree of Y({s}) before {t}.")

    at_s = useful_bars_at(traj, s).bars()
    between = useful_bars_between(traj, s, t).bars()
    at_t = useful_bars_at(traj, t).bars()
    return at_s.isdisjoint(between) and at_s <= at_t and between <= at_t


def lemma8_lost_bars(traj: Trajectory, t: float) -> typing.Set[Bar]:
    """
    :return: U_t minus U_H, where H is the first time after t that Y visits the parent of
    the upper vertex of the last-crossed useful bar.
    :raise PreconditionViolated: If there is no useful bar, the bar hangs from the root, or
    the visit is not observed.
    """
    report = useful_bars_at(traj, t)
    last = report.last_crossed()
    if last is None:
        raise PreconditionViolated(f"U_{t} is empty.")
    upper = last.bar.upper
    if upper.parent is None:
        raise PreconditionViolated("The last-crossed useful bar hangs from the root.")
    visit = hitting_time(traj, t, {upper.parent})
    if not visit.is_hit:
        raise PreconditionViolated(f"Y does not visit {upper.parent} after {t}.")
    return report.bars() - useful_bars_at(traj, visit.clock).bars()


def check_lemma8(traj: Trajectory, t: float) -> bool:
    """:return: Whether at most two useful bars are lost before Y climbs past the last one."""
    return len(lemma8_lost_bars(traj, t)) <= 2


def check_report(report: UsefulBarReport) -> typing.List[str]:
    """
    :return: Violations of the structure every report must have: distinct supporting
    edges, and child vertices forming a chain of descendants in crossing order.
    """
    violations = []
    edges = [member.bar.edge for member in report.members]
    if len(set(edges)) != len(edges):
        violations.append(f"Two useful bars at {report.at_time} share an edge.")
    for earlier, later in zip(edges, edges[1:]):
        if not later.is_strict_descendant_of(earlier):
            violations.append(f"Useful bar on {later} is not below the one on {earlier}.")
    return violations


class ReturnEpisode(typing.NamedTuple):
    start: float
    bar: Bar
    classification: ReturnClassification


def iterate_return_episodes(
    traj: Trajectory, c1: float, window_end: float, max_episodes: int
) -> typing.Iterator[ReturnEpisode]:
    """
    Follows the chain of returns to useful bars. The first episode starts at the first time
    two bars are useful; each episode examines the last-crossed useful bar. After a good
    return the next episode starts one period after the frontier departure; after a bad
    return it starts when Y reaches the parent of the bar's upper vertex. The chain stops
    when fewer than two bars are useful, a return or climb is not observed, or the window
    ends.
    """
    window_end = min(window_end, traj.covered_until)
    events = [event for event in traj.events_until(window_end) if event.clock > 0]
    tracker = UsefulBarTracker(traj)
    position = 0

    def advance_to(time: float):
        nonlocal position
        while position < len(events) and events[position].clock <= time:
            tracker.feed(events[position])
            position += 1

    start = None
    while position < len(events):
        tracker.feed(events[position])
        position += 1
        if len(tracker) >= 2:
            start = tracker.clock
            break

    episodes = 0
    while start is not None and episodes < max_episodes and len(tracker) >= 2:
        bar = tracker.members[-1].bar
        classification = _classify_return(traj, bar, start, c1)
        yield ReturnEpisode(start, bar, classification)
        episodes += 1

        if ReturnOutcome.GOOD_RETURN == classification.outcome:
            start = classification.departure_time + traj.T
        elif ReturnOutcome.BAD_RETURN == classification.outcome:
            climb = hitting_time(traj, classification.return_time, {bar.upper.parent})
            start = climb.clock if climb.is_hit else None
        else:
            start = None
        if start is None or start > window_end:
            return
        advance_to(start)
