import pathlib
import typing

from pydantic import BaseModel, validator

from .core import read_config_file, validate_path_could_be_dir
from .stirring_logging import get_valid_logging_level, is_valid_logging_level

# Constants
DEFAULT_OUTPUT_DIRECTORY = pathlib.Path("stirring-output")
LOG_FILE_NAME = "stirring.log"
RUN_RECORD_FILE_NAME = "run.json"

MAX_MASTER_SEED = 2**64 - 1


class StirringConfig(BaseModel):
    """
    Settings shared by all subcommands. Values come from, in increasing order
    of precedence, the defaults below, a config file and command-line flags.
    """

    d: int = 2
    d0: typing.Optional[int] = None
    T: float = 1.0
    runs: int = 100
    seed: int = 0
    depth_cap: int = 100000
    budget: int = 1000000
    horizon: typing.Optional[float] = None
    jobs: int = 1
    out: pathlib.Path = DEFAULT_OUTPUT_DIRECTORY

    # Either the name of a preset tree, a path to a YAML tree file, or an inline mapping
    tree: typing.Optional[typing.Union[str, typing.Dict[str, typing.Any]]] = None
    bars: typing.Optional[pathlib.Path] = None

    estimator: typing.Optional[str] = None
    grid: typing.Optional[typing.List[float]] = None
    s0: typing.Optional[float] = None
    max_episodes: int = 50

    beta: float = 2.0
    n: int = 1000000
    replicas: int = 20

    quad_tol: float = 1e-8

    logging_level: str = "INFO"

    @validator("d")
    def validate_d(cls, field):
        if field < 2:
            raise ValueError("d must be at least 2.")
        return field

    @validator("d0")
    def validate_d0(cls, field):
        if field is not None and field < 2:
            raise ValueError("d0 must be at least 2.")
        return field

    @validator("T")
    def validate_T(cls, field):
        if field < 0:
            raise ValueError("T cannot be negative.")
        return field

    @validator("runs", "depth_cap", "budget", "jobs", "n", "replicas", "max_episodes")
    def validate_positive_count(cls, field):
        if not field > 0:
            raise ValueError("Counts must be greater than 0.")
        return field

    @validator("seed")
    def validate_seed(cls, field):
        if field < 0 or field > MAX_MASTER_SEED:
            raise ValueError(f"seed must be in the range [0, {MAX_MASTER_SEED}].")
        return field

    @validator("horizon", "s0")
    def validate_clock(cls, field):
        if field is not None and field < 0:
            raise ValueError("Clock values cannot be negative.")
        return field

    @validator("grid", pre=True)
    def parse_grid(cls, field):
        # Flat config files spell the grid as a comma-separated string
        if isinstance(field, str):
            field = [value for value in field.split(",") if "" != value.strip()]
        return field

    @validator("grid")
    def validate_grid(cls, field):
        if field is None:
            return field
        if 0 == len(field):
            raise ValueError("grid cannot be empty.")
        if any(later <= earlier for earlier, later in zip(field, field[1:])):
            raise ValueError("grid must be strictly increasing.")
        return field

    @validator("beta")
    def validate_beta(cls, field):
        if not field > 1:
            raise ValueError("beta must be greater than 1.")
        return field

    @validator("quad_tol")
    def validate_quad_tol(cls, field):
        if not field > 0:
            raise ValueError("quad_tol must be greater than 0.")
        return field

    @validator("logging_level")
    def validate_logging_level(cls, field):
        if not is_valid_logging_level(field):
            raise ValueError(
                f"logging_level must be one of {'|'.join(get_valid_logging_level())}"
            )
        return field

    def validate_out_dir(self):
        try:
            validate_path_could_be_dir(self.out)
        except ValueError as ex:
            raise ValueError(f"out is invalid: {ex}")

    def with_overrides(self, overrides: typing.Dict[str, typing.Any]):
        """
        :param overrides: Values to apply on top of this config; `None` values are ignored.
        :return: A new, validated config.
        """
        merged = self.dict()
        merged.update({key: value for key, value in overrides.items() if value is not None})
        return StirringConfig.parse_obj(merged)


def load_stirring_config(config_file_path: typing.Optional[pathlib.Path]) -> StirringConfig:
    if config_file_path is None:
        return StirringConfig()
    return StirringConfig.parse_obj(read_config_file(config_file_path))
