import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specflow.cover import build_cover, nerve_loop
from specflow.errors import CocycleError, GapViolationError
from specflow.family import (MatrixFamilySample, SpectralWindow, circle_cover_map,
                             direct_sum, ingest_matrix_family, negate, pullback,
                             winding_family)
from specflow.mesh import circle_mesh
from specflow.spectral_flow import (build_sf_cocycle, crossing_oracle, essential_codimension,
                                    evaluate_on_loop)

LEVELS = (0.513, 0.271, -1.337)


def loop_sf(fam):
    cover = build_cover(fam)
    return evaluate_on_loop(build_sf_cocycle(fam, cover), nerve_loop(cover, range(fam.mesh.n_vertices)))


@pytest.mark.parametrize("w", range(-3, 4))
def test_winding_flow_matches_crossings(w):
    fam = winding_family(circle_mesh(64), w)
    assert loop_sf(fam) == w
    for lv in LEVELS:
        assert crossing_oracle(fam, range(64), lv) == w


def test_reversed_loop_flips_sign():
    fam = winding_family(circle_mesh(40), 2)
    cover = build_cover(fam)
    c = build_sf_cocycle(fam, cover)
    loop = nerve_loop(cover, range(40))
    assert evaluate_on_loop(c, loop[::-1]) == -evaluate_on_loop(c, loop)


def test_essential_codimension_is_antisymmetric():
    fam = winding_family(circle_mesh(16), 1)
    a = essential_codimension(fam, -0.7, 1.3, 5)
    assert a == 2
    assert essential_codimension(fam, 1.3, -0.7, 5) == -a


def test_level_on_band_is_a_gap_violation():
    fam = winding_family(circle_mesh(16), 0)
    with pytest.raises(GapViolationError):
        essential_codimension(fam, 0.0, 0.5, 3)


def test_open_path_is_not_a_cycle():
    fam = winding_family(circle_mesh(32), 1)
    c = build_sf_cocycle(fam, build_cover(fam))
    with pytest.raises(CocycleError):
        evaluate_on_loop(c, {(0, 1): 1})


def test_finite_matrix_family_has_no_flow():
    # eigenvalues ±cos θ cross twice, but a finite spectrum cannot flow
    mesh = circle_mesh(48)
    th = np.asarray(mesh.meta["theta"])
    mats = np.zeros((48, 2, 2), dtype=complex)
    mats[:, 0, 0], mats[:, 1, 1] = np.cos(th), -np.cos(th)
    mats[:, 0, 1] = mats[:, 1, 0] = 0.3
    fam = ingest_matrix_family(MatrixFamilySample(mesh, mats, SpectralWindow(-3, 3)))
    assert crossing_oracle(fam, range(48), 0.1) == 0
    assert loop_sf(fam) == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(-3, 3), st.integers(-3, 3))
def test_flow_is_additive(a, b):
    mesh = circle_mesh(48)
    assert loop_sf(direct_sum(winding_family(mesh, a), winding_family(mesh, b))) == a + b


@pytest.mark.parametrize("w", [-2, 1, 3])
def test_flow_negates(w):
    assert loop_sf(negate(winding_family(circle_mesh(48), w))) == -w


@pytest.mark.parametrize("d", [1, 2, 3])
def test_flow_multiplies_under_covering(d):
    fam = winding_family(circle_mesh(24), 1)
    up = pullback(fam, circle_mesh(24 * d), circle_cover_map(24, d))
    assert loop_sf(up) == d


def test_cocycle_identity_on_triangles():
    fam = winding_family(circle_mesh(64), 2)
    cover = build_cover(fam)
    c = build_sf_cocycle(fam, cover)
    for i, j, k in cover.nerve.get(2, ()):
        assert c((i, j)) + c((j, k)) == c((i, k))
