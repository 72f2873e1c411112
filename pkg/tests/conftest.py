import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from comanip.geometry import RobotModel
from comanip.scene import generate_scene


@pytest.fixture(scope="session")
def robot():
    return RobotModel.default()


TABLE_SPEC = {
    "objects": [
        {"id": "t1", "template": "table", "dims": [1.5, 0.8, 0.75],
         "label": "table", "mass": 20.0, "friction": 0.5},
    ],
    "floor_z": 0.0,
}


@pytest.fixture(scope="session")
def table_scene():
    return generate_scene(TABLE_SPEC)


def random_rotation(rng):
    """Uniform random rotation matrix from a quaternion draw."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])
