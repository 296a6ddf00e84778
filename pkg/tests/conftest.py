from pathlib import Path

import numpy as np
import pytest

from mpcvm.dataset import load_csv

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def iris_path():
    return DATA_DIR / "iris.csv"


@pytest.fixture(scope="session")
def iris(iris_path):
    return load_csv(iris_path)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
