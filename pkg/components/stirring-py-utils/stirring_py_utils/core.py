"""
Readers for stirring run config files and checks on the run output directory.
"""

import pathlib
import typing

import yaml
from dotenv import dotenv_values
from yaml.parser import ParserError

YAML_CONFIG_FILE_SUFFIXES = (".yml", ".yaml")


def read_yaml_config_file(run_config_file_path: pathlib.Path):
    """
    Reads a YAML run config, e.g. the tree spec, T, the estimator and the seed of an
    experiment. An empty file is an empty config.

    :return: The config as a dictionary.
    :raise ValueError: If the file cannot be parsed or does not hold a mapping.
    """
    with open(run_config_file_path, "r") as run_config_file:
        try:
            config = yaml.safe_load(run_config_file)
        except ParserError as ex:
            raise ValueError(f"Unable to parse run config from {run_config_file_path}: {ex}")
    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ValueError(f"Run config in {run_config_file_path} must be a mapping.")
    return config


def read_flat_config_file(config_file_path: pathlib.Path) -> typing.Dict[str, str]:
    """
    Reads a flat `key = value` run config. Dashes in keys are normalized to underscores
    so that keys can be spelled like the `stirring` flags they override.

    :param config_file_path:
    :return: The configuration as a dictionary of strings.
    """
    config = {}
    for key, value in dotenv_values(config_file_path).items():
        if value is None:
            raise ValueError(f"Missing value for key '{key}' in {config_file_path}.")
        config[key.strip().replace("-", "_")] = value
    return config


def read_config_file(config_file_path: pathlib.Path) -> typing.Dict[str, typing.Any]:
    if not config_file_path.exists():
        raise ValueError(f"Config file '{config_file_path}' does not exist.")
    if config_file_path.suffix in YAML_CONFIG_FILE_SUFFIXES:
        return read_yaml_config_file(config_file_path)
    return read_flat_config_file(config_file_path)


def validate_path_could_be_dir(out_dir: pathlib.Path):
    """
    Checks that out_dir can hold run records, bar files and trajectory dumps: its nearest
    existing ancestor, or out_dir itself, must be a directory.

    :raise ValueError: If a regular file sits in the way.
    """
    part = out_dir
    while True:
        if part.exists():
            if not part.is_dir():
                raise ValueError(f"{part} is not a directory, so run records cannot go there.")
            return
        part = part.parent
