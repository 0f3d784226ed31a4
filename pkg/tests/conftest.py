"""
conftest.py for vpinn_bench.

Read more about conftest.py under:
- https://docs.pytest.org/en/stable/fixture.html
- https://docs.pytest.org/en/stable/writing_plugins.html
"""

from pathlib import Path

import numpy as np
import pytest
import torch

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "vpinn_bench" / "configs"


def pytest_addoption(parser):
    """Add command line options for pytest."""
    parser.addoption(
        "--run-slow",
        action="store_true",
        help="Run full training reproductions (minutes each)",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def config_dir():
    """Directory of the bundled experiment configurations."""
    return CONFIG_DIR


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(0)
