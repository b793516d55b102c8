import logging
import pathlib

import pytest
from pydantic import ValidationError

from stirring_py_utils.core import read_config_file, validate_path_could_be_dir
from stirring_py_utils.stirring_config import load_stirring_config, StirringConfig
from stirring_py_utils.stirring_logging import add_file_handler, get_logger, set_logging_level


def test_defaults():
    config = load_stirring_config(None)
    assert 2 == config.d
    assert config.d0 is None
    assert 1.0 == config.T
    assert pathlib.Path("stirring-output") == config.out
    assert "INFO" == config.logging_level


def test_flat_config_file(tmp_path):
    config_file_path = tmp_path / "stirring.conf"
    config_file_path.write_text("# Regular tree\nd = 39\nT = 11\ndepth-cap = 500\ngrid = 1, 2.5\n")
    config = load_stirring_config(config_file_path)
    assert 39 == config.d
    assert 11.0 == config.T
    assert 500 == config.depth_cap
    assert [1.0, 2.5] == config.grid


def test_yaml_config_file(tmp_path):
    config_file_path = tmp_path / "stirring.yml"
    config_file_path.write_text(
        "d0: 40\ngrid: [0.5, 1.0]\ntree:\n  kind: angel-regular\n  d0: 40\n"
    )
    config = load_stirring_config(config_file_path)
    assert 40 == config.d0
    assert [0.5, 1.0] == config.grid
    assert {"kind": "angel-regular", "d0": 40} == config.tree


def test_yaml_config_must_be_mapping(tmp_path):
    config_file_path = tmp_path / "stirring.yaml"
    config_file_path.write_text("- 1\n- 2\n")
    with pytest.raises(ValueError):
        read_config_file(config_file_path)
    empty_file_path = tmp_path / "empty.yaml"
    empty_file_path.write_text("")
    assert {} == read_config_file(empty_file_path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ValueError):
        read_config_file(tmp_path / "missing.conf")


def test_overrides_take_precedence(tmp_path):
    config_file_path = tmp_path / "stirring.conf"
    config_file_path.write_text("runs = 10\nseed = 3\n")
    config = load_stirring_config(config_file_path)
    overridden = config.with_overrides({"runs": 20, "seed": None, "T": 2.0})
    assert 20 == overridden.runs
    assert 3 == overridden.seed
    assert 2.0 == overridden.T
    assert 10 == config.runs


@pytest.mark.parametrize(
    "values",
    [
        {"d": 1},
        {"d0": 1},
        {"T": -1.0},
        {"runs": 0},
        {"seed": -1},
        {"seed": 2**64},
        {"horizon": -0.5},
        {"grid": "2,1"},
        {"grid": ""},
        {"beta": 1.0},
        {"quad_tol": 0.0},
        {"logging_level": "LOUD"},
    ],
)
def test_invalid_values(values):
    with pytest.raises(ValidationError):
        StirringConfig.parse_obj(values)


def test_out_dir(tmp_path):
    StirringConfig(out=tmp_path / "a" / "b").validate_out_dir()
    file_path = tmp_path / "file"
    file_path.write_text("")
    with pytest.raises(ValueError):
        StirringConfig(out=file_path / "out").validate_out_dir()
    with pytest.raises(ValueError):
        validate_path_could_be_dir(file_path)


def test_file_logging(tmp_path):
    logger = get_logger("stirring_py_utils_test")
    assert 1 == len(get_logger("stirring_py_utils_test").handlers)
    log_file_path = tmp_path / "logs" / "stirring.log"
    handler = add_file_handler(logger, log_file_path)
    set_logging_level(logger, "WARN")
    logger.info("hidden")
    logger.warning("shown")
    handler.flush()
    logger.removeHandler(handler)
    handler.close()
    assert "hidden" not in log_file_path.read_text()
    assert "shown" in log_file_path.read_text()
    set_logging_level(logger, "LOUD")
    assert logging.INFO == logger.level
