import numpy as np
import pytest

from artifact.cli import data_path
from artifact.model import load_robot_model
from artifact.world import load_scene


@pytest.fixture(scope="session")
def ur5e():
    return load_robot_model(data_path("ur5e.yaml").read_text())


@pytest.fixture(scope="session")
def workcell():
    return load_scene(data_path("workcell.yaml").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

