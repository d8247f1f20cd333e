import math

import pytest

from condcap.geometry import parse_spec
from condcap.harness import load_registry


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the reference-row acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def registry():
    return load_registry()


@pytest.fixture
def annulus_spec():
    return parse_spec(
        {
            "family": "EXPLICIT",
            "contours": [
                {"kind": "CIRCLE", "terminal": "OUTER", "center": [0, 0], "radius": 2},
                {"kind": "CIRCLE", "terminal": "INNER", "center": [0, 0], "radius": 1},
            ],
        }
    )


@pytest.fixture
def annulus_capacity():
    return 2.0 * math.pi / math.log(2.0)
