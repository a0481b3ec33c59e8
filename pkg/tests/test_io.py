import numpy as np
import pytest

from specflow.cover import build_cover, star_cover_sets, validate_cover
from specflow.errors import SpecflowError
from specflow.family import (MatrixFamilySample, SpectralWindow, direct_sum, empty_family,
                             ingest_matrix_family, monopole_family, negate, winding_family)
from specflow.io import (cover_from_dict, cover_to_dict, dumps, family_from_dict,
                         family_to_dict, fingerprint, load_family, loads, save_family)
from specflow.mesh import circle_mesh, s3_mesh, sphere2_mesh


def families():
    circle = circle_mesh(24)
    s3 = s3_mesh(5)
    sphere = sphere2_mesh(3)
    mats = np.einsum("xi,ijk->xjk", sphere.positions,
                     np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]]))
    return {
        "winding": winding_family(circle, -2),
        "negated": negate(winding_family(circle, 3)),
        "monopole": monopole_family(s3, 1),
        "sum": direct_sum(monopole_family(s3, 1), monopole_family(s3, -1)),
        "ingested": ingest_matrix_family(MatrixFamilySample(sphere, mats, SpectralWindow(-2, 2))),
        "empty": empty_family(circle),
    }


@pytest.mark.parametrize("name", list(families()))
def test_family_round_trip_is_byte_identical(name):
    fam = families()[name]
    text = dumps(family_to_dict(fam))
    back = family_from_dict(loads(text))
    assert dumps(family_to_dict(back)) == text
    assert np.array_equal(back.values, fam.values)
    if fam.frames is not None:
        assert np.array_equal(back.frames, fam.frames)
        assert np.array_equal(back.frame_mask, fam.frame_mask)
    assert back.transitions == fam.transitions


def test_file_round_trip(tmp_path):
    fam = winding_family(circle_mesh(16), 1)
    path = tmp_path / "fam.json"
    save_family(fam, path)
    assert fingerprint(family_to_dict(load_family(path))) == fingerprint(family_to_dict(fam))


def test_cover_round_trip():
    mesh = s3_mesh(6)
    fam = monopole_family(mesh, 1)
    cover = build_cover(fam, sets=star_cover_sets(mesh))
    text = dumps(cover_to_dict(cover))
    back = cover_from_dict(loads(text), fam)
    assert dumps(cover_to_dict(back)) == text
    assert back.witnesses == cover.witnesses


def test_sets_only_cover_is_rebuilt():
    fam = winding_family(circle_mesh(32), 2)
    cover = build_cover(fam)
    d = loads(dumps(cover_to_dict(cover)))
    del d["nerve"], d["assignment"]
    back = cover_from_dict(d, fam)
    assert validate_cover(back, fam) == []
    assert back.nerve == cover.nerve


def test_wrong_format_is_rejected():
    with pytest.raises(SpecflowError):
        family_from_dict({"format": "something else"})


def test_non_finite_numbers_are_refused():
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})
