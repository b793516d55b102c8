import pathlib

import pytest

from stirring_sim.bar_process import FixedBarStore, load_bar_file
from stirring_sim.tree_core import figure_one_tree, TreeHandle

DATA_DIR = pathlib.Path(__file__).parent / "data"


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="Run slow tests.")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def fig1_bar_file_path() -> pathlib.Path:
    return DATA_DIR / "fig1.bars"


@pytest.fixture
def fig1_tree() -> TreeHandle:
    return TreeHandle(figure_one_tree())


@pytest.fixture
def fig1_bars(fig1_tree, fig1_bar_file_path):
    return load_bar_file(fig1_bar_file_path, fig1_tree)


@pytest.fixture
def fig1_store(fig1_tree, fig1_bars) -> FixedBarStore:
    return FixedBarStore(fig1_tree, 1.0, fig1_bars)

