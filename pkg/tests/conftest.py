import numpy as np
import pytest

from reparam import csg


def make_two_cubes() -> csg.Model:
    """Two unit cubes side by side, sharing y/z placement.

    Known candidate pool: 15 dim_equal + 4 coplanar + 1 coaxial = 20.
    """
    a = csg.Primitive(kind=csg.CUBE, name="a",
                      translation=(-0.6, 0.5, 0.0), scale=(1.0, 1.0, 1.0))
    b = csg.Primitive(kind=csg.CUBE, name="b",
                      translation=(0.6, 0.5, 0.0), scale=(1.0, 1.0, 1.0))
    return csg.Model(primitives=(a, b), category="demo")


def make_mixed() -> csg.Model:
    """Cube + y-cylinder, no cone; alg1 stays sound."""
    base = csg.Primitive(kind=csg.CUBE, name="base",
                         translation=(0.0, 0.1, 0.0), scale=(1.2, 0.2, 1.2))
    post = csg.Primitive(kind=csg.CYLINDER_Y, name="post",
                         translation=(0.0, 0.7, 0.0), scale=(0.3, 1.0, 0.3))
    return csg.Model(primitives=(base, post), category="demo")


def make_coned() -> csg.Model:
    """Stack with a cone-cylinder; exercises the 7-parameter slice."""
    body = csg.Primitive(kind=csg.CYLINDER_Y, name="body",
                         translation=(0.0, 0.35, 0.0), scale=(0.5, 0.7, 0.5))
    neck = csg.Primitive(kind=csg.CONE_CYLINDER_Y, name="neck",
                         translation=(0.0, 0.825, 0.0), scale=(0.3, 0.25, 0.3),
                         top_radius=0.6)
    return csg.Model(primitives=(body, neck), category="demo")


@pytest.fixture
def two_cubes() -> csg.Model:
    return make_two_cubes()


@pytest.fixture
def mixed() -> csg.Model:
    return make_mixed()


@pytest.fixture
def coned() -> csg.Model:
    return make_coned()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
