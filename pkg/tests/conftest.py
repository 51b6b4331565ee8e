import pytest

from isoflow.fem.forms import MetricContext, mesh_metric
from isoflow.fem.lagrange import build_lagrange_space, interpolate, lift
from isoflow.fem.refgeom import Sphere
from isoflow.mesh.surface import build_icosphere, mesh_on_manifold


@pytest.fixture(scope="session")
def unit_sphere():
    return Sphere(1.0)


@pytest.fixture(scope="session")
def sphere_mesh(unit_sphere):
    """Level-1 icosphere on the unit sphere (80 triangles)."""
    return mesh_on_manifold(build_icosphere(1), unit_sphere)


@pytest.fixture(scope="session")
def sphere_p2(sphere_mesh, unit_sphere):
    """(space, ctx, r) for the interpolated identity embedding with P2 velocities."""
    space = build_lagrange_space(sphere_mesh, 2)
    ctx = MetricContext.build(mesh_metric(sphere_mesh, unit_sphere, 2), 7)
    r = interpolate(space, lift(unit_sphere, lambda q: q), 3)
    return space, ctx, r
