import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sccplan import load_scene, packaged_scene_path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def empty_scene():
    return load_scene(packaged_scene_path("empty"))


@pytest.fixture(scope="session")
def simple_scene():
    return load_scene(packaged_scene_path("simple"))


@pytest.fixture(scope="session")
def cluttered_scene():
    return load_scene(packaged_scene_path("cluttered"))
