import os
import pathlib

import numpy as np
import pytest

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

# randomized batteries honor the documented seed override
SEED = int(os.environ.get("VAXOPT_SEED", "20240501"))


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def fixture_path():
    def _path(name: str) -> str:
        return str(FIXTURES / name)
    return _path


@pytest.fixture
def load(fixture_path):
    from vaxopt.instance import load_instance

    def _load(name: str):
        return load_instance(fixture_path(name))
    return _load
