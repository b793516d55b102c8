from __future__ import annotations

import csv
import math
import pathlib
import typing

from pydantic import BaseModel, Field, root_validator, validator
from scipy import stats

from ..bounds import BOUNDS_CSV_HEADER, Classification, is_starred_regime
from ..meander import DEFAULT_BUDGET
from ..tree_core import TreeKind, TreeSpec
from .constants import (
    EstimatorName,
    HISTOGRAM_CSV_HEADER,
    REGULAR_TREE_ESTIMATORS,
    RUN_RECORD_SCHEMA_VERSION,
    RunCategory,
    STANDARD_ERROR_SLACK,
    SWEEP_CSV_HEADER,
    WINDOW_ESTIMATORS,
)

CONFIDENCE_LEVEL = 0.99
TALLY_FIELDS = {
    "n",
    "successes",
    "censored_depth",
    "censored_budget",
    "censored_horizon",
    "discarded",
    "episodes_censored",
    "histogram",
}


class ExperimentConfig(BaseModel):
    tree: TreeSpec
    T: float
    n_runs: int
    budget: int = DEFAULT_BUDGET
    horizon: typing.Optional[float] = None
    master_seed: int = 0
    estimator: EstimatorName
    # Time after which returns to the root are looked for, or frontier times are taken
    s0: typing.Optional[float] = None
    # Whether to use the quantitative constants; decided from (d, T) when unset
    starred: typing.Optional[bool] = None
    max_episodes: int = 50
    bars_file: typing.Optional[str] = None

    class Config:
        allow_mutation = False

    @validator("T")
    def validate_T(cls, field):
        if field < 0:
            raise ValueError("T cannot be negative.")
        return field

    @validator("n_runs", "budget", "max_episodes")
    def validate_positive_count(cls, field):
        if not field > 0:
            raise ValueError("Counts must be greater than 0.")
        return field

    @root_validator(skip_on_failure=True)
    def validate_estimator_parameters(cls, values):
        estimator = values["estimator"]
        T = values["T"]
        horizon = values.get("horizon")
        if estimator in WINDOW_ESTIMATORS:
            if horizon is None or horizon < T:
                raise ValueError(f"{estimator} needs a horizon of at least T.")
        if estimator in REGULAR_TREE_ESTIMATORS:
            if TreeKind.REGULAR_OFFSPRING != values["tree"].kind:
                raise ValueError(f"{estimator} needs a regular-offspring tree.")
        if EstimatorName.RETURN_PROBABILITY == estimator:
            if 0 == T:
                raise ValueError("Return probabilities are degenerate at T = 0.")
            s0 = values.get("s0") or 0.0
            if horizon is None or not horizon > s0:
                raise ValueError("return-probability needs a horizon beyond s0.")
        return values

    @property
    def depth_cap(self) -> typing.Optional[int]:
        return self.tree.depth_cap

    @property
    def offspring(self) -> int:
        """:return: The least number of offspring of a non-root vertex."""
        if TreeKind.REGULAR_OFFSPRING == self.tree.kind:
            return self.tree.d
        if TreeKind.ANGEL_REGULAR == self.tree.kind:
            return self.tree.d0 - 1
        raise ValueError("Explicit trees have no offspring parameter.")

    def is_starred(self) -> bool:
        if self.starred is not None:
            return self.starred
        return is_starred_regime(self.offspring, self.T)

    def with_T(self, T: float) -> ExperimentConfig:
        values = self.dict()
        values["T"] = T
        return ExperimentConfig.parse_obj(values)


class RunOutcome(BaseModel):
    run_index: int
    run_seed: int
    T: float
    category: RunCategory
    verdict: str
    trials: int = 0
    successes: int = 0
    episodes_censored: int = 0
    value: typing.Optional[int] = None
    violations: typing.List[str] = []


def wilson_interval(successes: int, n: int) -> typing.Tuple[float, float]:
    if 0 == n:
        return 0.0, 1.0
    z = stats.norm.ppf(0.5 + CONFIDENCE_LEVEL / 2)
    p = successes / n
    denominator = 1 + z**2 / n
    center = (p + z**2 / (2 * n)) / denominator
    half_width = z * math.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denominator
    return max(0.0, center - half_width), min(1.0, center + half_width)


class EstimateRecord(BaseModel):
    estimator: EstimatorName
    T: float
    estimate: float
    lo99: float
    hi99: float
    n: int
    successes: int
    censored_depth: int = 0
    censored_budget: int = 0
    censored_horizon: int = 0
    discarded: int = 0
    episodes_censored: int = 0
    standard_error: float
    # A proved lower bound on the estimated probability, if one applies
    bound: typing.Optional[float] = None
    histogram: typing.Dict[int, int] = {}
    # Auxiliary values reported beside the estimate
    probe: typing.Dict[str, float] = {}
    seed: int
    error: typing.Optional[str] = None

    @staticmethod
    def from_tallies(
        estimator: EstimatorName,
        T: float,
        seed: int,
        successes: int,
        n: int,
        **kwargs,
    ) -> EstimateRecord:
        lo99, hi99 = wilson_interval(successes, n)
        if 0 == n:
            estimate = math.nan
            standard_error = math.nan
        else:
            estimate = successes / n
            standard_error = math.sqrt(estimate * (1 - estimate) / n)
        return EstimateRecord(
            estimator=estimator,
            T=T,
            estimate=estimate,
            lo99=lo99,
            hi99=hi99,
            n=n,
            successes=successes,
            standard_error=standard_error,
            seed=seed,
            **kwargs,
        )

    @staticmethod
    def from_error(estimator: EstimatorName, T: float, seed: int, error: str) -> EstimateRecord:
        return EstimateRecord(
            estimator=estimator,
            T=T,
            estimate=math.nan,
            lo99=math.nan,
            hi99=math.nan,
            n=0,
            successes=0,
            standard_error=math.nan,
            seed=seed,
            error=error,
        )

    def violates_bound(self, slack: float = STANDARD_ERROR_SLACK) -> bool:
        """:return: Whether the estimate lies more than slack standard errors below the bound."""
        if self.bound is None or 0 == self.n:
            return False
        return self.estimate < self.bound - slack * self.standard_error

    def tallies(self) -> typing.Dict[str, typing.Any]:
        return self.dict(include=TALLY_FIELDS)

    def sweep_row(self) -> typing.List[str]:
        return [
            repr(self.T),
            str(self.estimator),
            repr(self.estimate),
            repr(self.lo99),
            repr(self.hi99),
            str(self.n),
            str(self.censored_depth),
            str(self.censored_budget),
            str(self.censored_horizon),
            str(self.seed),
        ]


class RunRecord(BaseModel):
    schema_version: int = Field(RUN_RECORD_SCHEMA_VERSION, alias="schema")
    command: str
    experiment_config: ExperimentConfig
    grid: typing.Optional[typing.List[float]] = None
    code_version: str
    outcomes: typing.List[RunOutcome]
    estimates: typing.List[EstimateRecord]
    wall_clock_seconds: float
    rng: typing.Dict[str, str]

    class Config:
        allow_population_by_field_name = True

    @validator("schema_version")
    def validate_schema_version(cls, field):
        if RUN_RECORD_SCHEMA_VERSION != field:
            raise ValueError(f"Unsupported run record schema {field}.")
        return field

    def tallies(self) -> typing.Dict[str, typing.Any]:
        """:return: Everything a replay must reproduce."""
        return {
            "outcomes": [outcome.dict() for outcome in self.outcomes],
            "estimates": [estimate.tallies() for estimate in self.estimates],
        }


def load_run_record(record_file_path: pathlib.Path) -> RunRecord:
    return RunRecord.parse_file(record_file_path)


def write_run_record(record_file_path: pathlib.Path, record: RunRecord):
    record_file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(record_file_path, "w") as record_file:
        record_file.write(record.json(by_alias=True, indent=2))
        record_file.write("\n")


def write_sweep_csv(csv_file_path: pathlib.Path, records: typing.Iterable[EstimateRecord]):
    with open(csv_file_path, "w", newline="") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(SWEEP_CSV_HEADER)
        for record in records:
            writer.writerow(record.sweep_row())


def write_histogram_csv(csv_file_path: pathlib.Path, histogram: typing.Dict[int, int]):
    with open(csv_file_path, "w", newline="") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(HISTOGRAM_CSV_HEADER)
        for length in sorted(histogram):
            writer.writerow([length, histogram[length]])


def write_bounds_csv(
    csv_file_path: pathlib.Path,
    rows: typing.Iterable[typing.Tuple[int, float, Classification]],
):
    with open(csv_file_path, "w", newline="") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(BOUNDS_CSV_HEADER)
        for d0, T, classification in rows:
            writer.writerow(classification.csv_row(d0, T))
