import numpy as np
import pytest

from adjcone.geometry import Polytope
from adjcone.quasiconvex import StepLevelFunction


@pytest.fixture(scope="session")
def step1d():
    """Levels {0,1,2} over [-1,0] ⊂ [-1,1] ⊂ [-1,2]."""
    return StepLevelFunction(
        [0.0, 1.0, 2.0],
        [Polytope.from_box([-1.0], [0.0]),
         Polytope.from_box([-1.0], [1.0]),
         Polytope.from_box([-1.0], [2.0])])


@pytest.fixture(scope="session")
def sq2d():
    """Levels {1,2} over [-1,1]^2 ⊂ [-2,2]^2."""
    return StepLevelFunction(
        [1.0, 2.0],
        [Polytope.from_box([-1, -1], [1, 1]),
         Polytope.from_box([-2, -2], [2, 2])])


@pytest.fixture(scope="session")
def nested3d():
    """Random nested family of three boxes in R^3 (seeded)."""
    rng = np.random.default_rng(20240611)
    lo0 = rng.uniform(-0.6, -0.3, size=3)
    hi0 = rng.uniform(0.3, 0.6, size=3)
    lo1 = lo0 - rng.uniform(0.4, 0.8, size=3)
    hi1 = hi0 + rng.uniform(0.4, 0.8, size=3)
    lo2 = lo1 - rng.uniform(0.4, 0.8, size=3)
    hi2 = hi1 + rng.uniform(0.4, 0.8, size=3)
    return StepLevelFunction(
        [0.0, 1.0, 2.0],
        [Polytope.from_box(lo0, hi0),
         Polytope.from_box(lo1, hi1),
         Polytope.from_box(lo2, hi2)])


@pytest.fixture(scope="session")
def corrupted1d():
    """Non-nested family (P0 not inside P1): the diagnostic instance."""
    return StepLevelFunction(
        [0.0, 1.0, 2.0],
        [Polytope.from_box([0.0], [0.1]),
         Polytope.from_box([1.0], [1.4]),
         Polytope.from_box([1.5], [3.0])],
        validate=False)
