import numpy as np
from scipy.stats import unitary_group

from specflow.frames import edge_links, link_certificate, polar, relax_split, synchronize
from specflow.mesh import sphere2_mesh


def identity_transport(u, v, vecs):
    return vecs


def scrambled(mesh, n, seed):
    rng = np.random.default_rng(seed)
    base = np.eye(4, dtype=complex)[:, :n]
    return {v: base @ unitary_group.rvs(n, random_state=rng) if n > 1
            else base * np.exp(2j * np.pi * rng.random()) for v in range(mesh.n_vertices)}


def test_polar_factor_is_unitary():
    m = np.random.default_rng(1).normal(size=(3, 3)) + 0j
    u, s = polar(m)
    assert np.allclose(u.conj().T @ u, np.eye(3))
    assert np.allclose(np.sort(s), np.sort(np.linalg.svd(m)[1]))


def test_scrambled_frames_fail_the_certificate():
    mesh = sphere2_mesh(3)
    frames = scrambled(mesh, 2, 0)
    smin, amax = link_certificate(edge_links(mesh, range(mesh.n_vertices), frames,
                                             identity_transport))
    assert amax > np.pi / 3


def test_synchronize_smooths_a_trivial_bundle():
    mesh = sphere2_mesh(3)
    vs = list(range(mesh.n_vertices))
    for n in (1, 2):
        fixed = synchronize(mesh, vs, scrambled(mesh, n, n), identity_transport)
        smin, amax = link_certificate(edge_links(mesh, vs, fixed, identity_transport))
        assert smin > 0.999 and amax < 1e-6


def test_relax_split_respects_constrained_blocks():
    mesh = sphere2_mesh(3)
    vs = list(range(mesh.n_vertices))
    frames = scrambled(mesh, 2, 7)
    constrained = np.zeros(mesh.n_vertices, dtype=bool)
    constrained[:5] = True
    # the constrained splitting is the same everywhere, up to phases
    rng = np.random.default_rng(3)
    for v in range(5):
        frames[v] = np.eye(4, dtype=complex)[:, :2] * np.exp(2j * np.pi * rng.random(2))
    out, cert, ok = relax_split(mesh, vs, frames, identity_transport, constrained, 1)
    assert ok
    for v in range(5):
        y = frames[v].conj().T @ out[v]
        assert abs(y[0, 1]) < 1e-9 and abs(y[1, 0]) < 1e-9
