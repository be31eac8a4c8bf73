import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from graspgauge import primitives
from graspgauge.gripper import GripperModel, registry_by_name


@pytest.fixture(scope="session")
def corpus():
    return primitives.desk_corpus()


@pytest.fixture(scope="session")
def cube(corpus):
    return corpus["cube40"]


@pytest.fixture(scope="session")
def cylinder(corpus):
    return corpus["cylinder_r25_h80"]


@pytest.fixture(scope="session")
def icosphere(corpus):
    return corpus["icosphere_r30"]


@pytest.fixture(scope="session")
def registry():
    return registry_by_name()


@pytest.fixture(scope="session")
def gripper85():
    """85 mm stroke, 10 mm thick fingers: the analytic-threshold gripper."""
    return GripperModel("thresh85", 85.0, 0.0, (5.0, 10.0, 20.0),
                        (30.0, 15.0, 10.0), 10.0, 0.5)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def random_transform(rng: np.random.Generator, t_scale: float = 100.0):
    from graspgauge.se3 import RigidTransform
    return RigidTransform(random_rotation(rng),
                          rng.uniform(-t_scale, t_scale, 3))
