import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specflow.cover import (CechCochain, build_cover, coboundary, nerve_loop,
                            pushforward_fundamental, star_cover_sets, validate_cover)
from specflow.errors import GapViolationError
from specflow.family import constant_family, monopole_family, winding_family
from specflow.mesh import circle_mesh, s3_mesh

FULL = {d: list(itertools.combinations(range(6), d + 1)) for d in range(5)}


def boundary(chain):
    out = {}
    for s, c in chain.items():
        for i in range(len(s)):
            f = s[:i] + s[i + 1:]
            out[f] = out.get(f, 0) + (-1) ** i * c
    return out


def cochains(kind, degree):
    simplices = FULL[degree]
    if kind == "integer":
        vals = st.lists(st.integers(-5, 5), min_size=len(simplices), max_size=len(simplices))
        return vals.map(lambda v: CechCochain(degree, kind, dict(zip(simplices, v))))
    vals = st.lists(st.floats(-np.pi, np.pi), min_size=len(simplices), max_size=len(simplices))
    return vals.map(lambda v: CechCochain(degree, kind,
                                          dict(zip(simplices, np.exp(1j * np.array(v))))))


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_coboundary_squares_to_zero(data):
    degree = data.draw(st.integers(0, 2))
    kind = data.draw(st.sampled_from(["integer", "phase"]))
    c = data.draw(cochains(kind, degree))
    dd = coboundary(coboundary(c, FULL), FULL)
    for v in dd.values.values():
        if kind == "integer":
            assert v == 0
        else:
            assert abs(v - 1) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_pairing_is_adjoint_to_boundary(data):
    degree = data.draw(st.integers(0, 2))
    c = data.draw(cochains("integer", degree))
    coeffs = data.draw(st.lists(st.integers(-3, 3), min_size=len(FULL[degree + 1]),
                                max_size=len(FULL[degree + 1])))
    chain = dict(zip(FULL[degree + 1], coeffs))
    assert coboundary(c, FULL).pair(chain) == c.pair(boundary(chain))


def test_cochain_orientation():
    c = CechCochain(1, "integer", {(0, 1): 3})
    assert c((1, 0)) == -3
    g = CechCochain(1, "phase", {(0, 1): 1j})
    assert g((1, 0)) == -1j


def test_star_cover_nerve_of_s3():
    mesh = s3_mesh(6)
    fam = monopole_family(mesh, 1)
    cover = build_cover(fam, sets=star_cover_sets(mesh, 0.3))
    assert cover.f_vector() == (5, 10, 10, 5)
    assert validate_cover(cover, fam) == []
    chain = pushforward_fundamental(cover, mesh)
    assert sorted(abs(v) for v in chain.values()) == [1] * 5


@pytest.mark.parametrize("w", [-2, 0, 3])
def test_auto_cover_on_circle(w):
    fam = winding_family(circle_mesh(64), w)
    cover = build_cover(fam)
    assert len(cover) >= 3
    assert validate_cover(cover, fam) == []
    loop = nerve_loop(cover, range(64))
    assert len(loop) >= 3


def test_level_on_a_band_is_rejected():
    mesh = circle_mesh(10)
    fam = constant_family(mesh, [-1.0, 0.0, 1.0], (-3, 3))
    with pytest.raises(GapViolationError):
        build_cover(fam, sets=[range(6), [5, 6, 7, 8, 9, 0]], levels=[0.0, 0.5])


def test_validate_reports_tampered_cover():
    fam = winding_family(circle_mesh(32), 1)
    cover = build_cover(fam)
    cover.levels = cover.levels.copy()
    cover.levels[0] = fam.values[fam.row(0), cover.sets[0][0]]
    cover.assignment = cover.assignment.copy()
    cover.assignment[cover.sets[1][len(cover.sets[1]) // 2]] = 0
    kinds = {v["violation"] for v in validate_cover(cover, fam)}
    assert "assignment outside its set" in kinds
    assert any("level" in k for k in kinds)
