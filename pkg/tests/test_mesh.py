import numpy as np
import pytest

from specflow.errors import MeshError
from specflow.mesh import (BallRegion, ParamMesh, circle_mesh, permutation_sign, s3_mesh,
                           sphere2_mesh, torus3_mesh)


def euler(mesh):
    return sum((-1) ** d * len(s) for d, s in mesh.simplices.items())


@pytest.mark.parametrize("make, chi", [
    (lambda: circle_mesh(12), 0),
    (lambda: sphere2_mesh(4), 2),
    (lambda: s3_mesh(3), 0),
    (lambda: torus3_mesh(3, 1), 0),
])
def test_generators_are_closed_oriented_manifolds(make, chi):
    mesh = make()
    assert mesh.validate()
    assert euler(mesh) == chi
    assert not mesh.chain_boundary(mesh.fundamental_chain(), mesh.dim)


def test_s3_counts():
    mesh = s3_mesh(4)
    assert len(mesh.tops) == 5 * 4 ** 3
    assert np.allclose(np.linalg.norm(mesh.positions, axis=1), 1.0)


def test_default_s3_is_fine_enough():
    mesh = s3_mesh()
    assert len(mesh.tops) >= 600
    e = mesh.edges
    lengths = np.linalg.norm(mesh.positions[e[:, 0]] - mesh.positions[e[:, 1]], axis=1)
    assert lengths.max() / lengths.min() < 4


def test_permutation_sign():
    assert permutation_sign([0, 1, 2]) == 1
    assert permutation_sign([1, 0, 2]) == -1
    assert permutation_sign([2, 0, 1]) == 1


def test_missing_face_is_rejected():
    mesh = circle_mesh(5)
    bad = ParamMesh(mesh.positions, {0: mesh.simplices[0], 1: [[0, 1], [1, 7]]})
    with pytest.raises(MeshError):
        bad.validate()


def test_broken_orientation_is_rejected():
    mesh = circle_mesh(6)
    signs = mesh.fundamental_cycle.copy()
    signs[2] *= -1
    broken = ParamMesh(mesh.positions, mesh.simplices, signs, mesh.meta)
    with pytest.raises(MeshError):
        broken.validate()


def test_collapsibility():
    mesh = s3_mesh(3)
    star = sorted(mesh.closed_star(0))
    assert mesh.is_collapsible(star) is True
    # the whole sphere has χ = 0
    assert mesh.is_collapsible(range(mesh.n_vertices)) is False


def test_geodesic_ball_boundaries_are_spheres():
    mesh = s3_mesh(8)
    ball = BallRegion.geodesic(mesh, mesh.positions[0], 1.0, 0.6)
    assert ball.check() == []
    assert set(ball.inner) <= set(ball.vertices)


def test_bfs_tree_spans_component():
    mesh = sphere2_mesh(3)
    order, parent = mesh.bfs_tree(range(mesh.n_vertices), 0)
    assert sorted(order) == list(range(mesh.n_vertices))
    assert all(parent[v] in mesh.neighbors()[v] for v in order[1:])
