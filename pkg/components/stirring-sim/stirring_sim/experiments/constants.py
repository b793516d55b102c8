from __future__ import annotations

from enum import auto, IntEnum

from strenum import KebabCaseStrEnum

RUN_RECORD_SCHEMA_VERSION = 1
SWEEP_CSV_HEADER = [
    "T",
    "estimator",
    "estimate",
    "lo99",
    "hi99",
    "n",
    "censored_depth",
    "censored_budget",
    "censored_horizon",
    "seed",
]
HISTOGRAM_CSV_HEADER = ["length", "count"]
# Bounds must hold within this many standard errors
STANDARD_ERROR_SLACK = 3


class EstimatorName(KebabCaseStrEnum):
    USEFUL_BAR_COUNT = auto()
    FRONTIER_DEPARTURE = auto()
    RAPID_ADVANCE = auto()
    GOOD_RETURN = auto()
    RETURN_PROBABILITY = auto()
    CYCLE_LENGTH_SURVEY = auto()
    INVARIANTS = auto()


# Estimators that examine windows [t, t + T] and so need horizon >= T
WINDOW_ESTIMATORS = (
    EstimatorName.FRONTIER_DEPARTURE,
    EstimatorName.RAPID_ADVANCE,
    EstimatorName.GOOD_RETURN,
    EstimatorName.INVARIANTS,
)
# Estimators whose lemmas are stated for trees where every vertex has d offspring
REGULAR_TREE_ESTIMATORS = (
    EstimatorName.USEFUL_BAR_COUNT,
    EstimatorName.FRONTIER_DEPARTURE,
    EstimatorName.RAPID_ADVANCE,
    EstimatorName.GOOD_RETURN,
)


class RunCategory(KebabCaseStrEnum):
    OBSERVED = auto()
    DISCARDED = auto()
    RETURNED = auto()
    NOT_RETURNED = auto()
    CENSORED_DEPTH = auto()
    CENSORED_BUDGET = auto()
    CENSORED_HORIZON = auto()


class ExitStatus(IntEnum):
    SUCCESS = 0
    INVARIANT_VIOLATION = auto()
    USAGE_ERROR = auto()
