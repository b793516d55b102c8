"""
Console and run-log logging for the stirring simulator. Every experiment, sweep and replay
logs through a named logger with one console handler; a run can add a file handler that
writes its log next to its records in the output directory.
"""

import logging
import pathlib

LOGGING_LEVEL_MAPPING = {
    "INFO": logging.INFO,
    "DEBUG": logging.DEBUG,
    "WARN": logging.WARNING,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}


def get_logging_formatter():
    return logging.Formatter("%(asctime)s %(name)s [%(levelname)s] %(message)s")


def get_logger(name: str):
    """
    :param name: The module or tool name, e.g. `stirring_sim.meander`.
    :return: A logger writing run progress, censoring counts and bound warnings to the
    console.
    """
    logger = logging.getLogger(name)
    # Repeated calls for the same name share one console handler
    if not logger.handlers:
        run_console_handler = logging.StreamHandler()
        run_console_handler.setFormatter(get_logging_formatter())
        logger.addHandler(run_console_handler)
    # Sub loggers of a run would otherwise log twice
    logger.propagate = False
    return logger


def add_file_handler(logger: logging.Logger, run_log_file_path: pathlib.Path):
    """
    Mirrors a run's log into run_log_file_path, creating the run's output directory first.

    :return: The handler, so the caller can detach it once the run's records are written.
    """
    run_log_file_path.parent.mkdir(parents=True, exist_ok=True)
    run_log_handler = logging.FileHandler(filename=run_log_file_path, encoding="utf-8")
    run_log_handler.setFormatter(get_logging_formatter())
    logger.addHandler(run_log_handler)
    return run_log_handler


def get_valid_logging_level():
    return [i for i in LOGGING_LEVEL_MAPPING.keys()]


def is_valid_logging_level(level: str):
    return level in LOGGING_LEVEL_MAPPING


def set_logging_level(logger: logging.Logger, level: str):
    """Applies the logging_level of a stirring run config, falling back to INFO."""
    if not is_valid_logging_level(level):
        logger.warning(f"Invalid logging level: {level}, using INFO as default")
        logger.setLevel(logging.INFO)
        return
    logger.setLevel(LOGGING_LEVEL_MAPPING[level])
