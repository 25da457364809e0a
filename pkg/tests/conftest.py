import json

import pytest

from rdwsim.cli import resolve_env
from rdwsim.gaincurve import GainBounds, candidate_paths
from rdwsim.geom import PhysEnv
from rdwsim.horizon import skeleton_orientations


@pytest.fixture(scope="session")
def bounds():
    return GainBounds()


@pytest.fixture(scope="session")
def candidates(bounds):
    return candidate_paths(10, bounds)


@pytest.fixture(scope="session")
def orientations():
    return skeleton_orientations(30)


@pytest.fixture(scope="session")
def square5_path():
    return str(resolve_env("square5"))


@pytest.fixture(scope="session")
def square3_path():
    return str(resolve_env("square3"))


@pytest.fixture(scope="session")
def square5():
    return PhysEnv.from_file(resolve_env("square5"))


@pytest.fixture()
def env_file(tmp_path):
    """Write an environment dict to a temp file and return its path."""

    def write(doc, name="env.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)

    return write


# The 5 m square centered at the origin with no clearance: the standard
# hand-checkable fixture (walls at +-2.5).
CENTERED_SQUARE = {
    "boundary": [[-2.5, -2.5], [2.5, -2.5], [2.5, 2.5], [-2.5, 2.5]],
    "obstacles": [],
    "clearance": 0.0,
}


@pytest.fixture(scope="session")
def centered_square():
    return PhysEnv(CENTERED_SQUARE["boundary"], clearance=0.0)
