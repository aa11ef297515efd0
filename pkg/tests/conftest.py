import numpy as np
import pytest

from corridor.bench import ForestScene, gen_forest, point_robot_model, scene_world
from corridor.world import (SPHERE, Geometry, RigidTransform, World)


@pytest.fixture(scope="session")
def point_robot():
    return point_robot_model()


@pytest.fixture
def empty_world(point_robot):
    return World(point_robot)


def disc_world(centers, radius=0.35, lower=(-5.0, -5.0), upper=(5.0, 5.0)):
    """Point-robot world with disc obstacles; no voxel map."""
    model = point_robot_model(lower, upper)
    discs = tuple(Geometry(SPHERE, RigidTransform.planar(c[0], c[1]), radius=radius)
                  for c in np.atleast_2d(np.asarray(centers, dtype=float)))
    return World(model, static=discs)


def forest_disc_world(seed):
    scene = gen_forest(seed)
    return disc_world(scene.centers, scene.radius), scene
