"""Canonical JSON for meshes, families, covers and reports.

Floats are written with Python's shortest round-trip repr and keys are
sorted, so serialize → parse → serialize is byte-identical.
"""
from __future__ import annotations

import hashlib
import json

import numpy as np

from .cover import GAP_MARGIN, SpectralCover, build_cover
from .errors import SpecflowError
from .family import EnhancedGraph, SpectralWindow
from .mesh import ParamMesh

__all__ = [
    "dumps",
    "loads",
    "fingerprint",
    "mesh_to_dict",
    "mesh_from_dict",
    "family_to_dict",
    "family_from_dict",
    "cover_to_dict",
    "cover_from_dict",
    "save_family",
    "load_family",
    "save_cover",
    "load_cover",
]

FAMILY_FORMAT = "specflow.family/1"
COVER_FORMAT = "specflow.cover/1"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False,
                      allow_nan=False) + "\n"


def loads(text):
    return json.loads(text)


def fingerprint(obj):
    return hashlib.sha256(dumps(obj).encode()).hexdigest()


# -- mesh ---------------------------------------------------------------------

def mesh_to_dict(mesh):
    return {"positions": mesh.positions, "tops": mesh.tops,
            "orientation": mesh.fundamental_cycle, "meta": mesh.meta}


def mesh_from_dict(d):
    meta = dict(d.get("meta", {}))
    if "coarse_weights" in meta:
        meta["coarse_weights"] = np.asarray(meta["coarse_weights"], dtype=float)
    return ParamMesh.from_top_simplices(np.asarray(d["positions"], dtype=float),
                                       np.asarray(d["tops"], dtype=np.int64),
                                       orientation=d.get("orientation"), meta=meta)


# -- family ---------------------------------------------------------------------

def _frames_to_dict(frames, mask):
    flat = frames.reshape(-1)
    nz = np.flatnonzero(flat)
    return {"shape": list(frames.shape), "index": nz, "re": flat[nz].real, "im": flat[nz].imag,
            "mask": np.flatnonzero(~mask.reshape(-1))}


def _frames_from_dict(d):
    shape = tuple(d["shape"])
    flat = np.zeros(int(np.prod(shape)), dtype=complex)
    idx = np.asarray(d["index"], dtype=np.int64)
    # assign parts separately: re + 1j*im loses signed zeros
    flat.real[idx] = np.asarray(d["re"], dtype=float)
    flat.imag[idx] = np.asarray(d["im"], dtype=float)
    mask = np.ones(shape[0] * shape[1], dtype=bool)
    mask[np.asarray(d["mask"], dtype=np.int64)] = False
    return flat.reshape(shape), mask.reshape(shape[:2])


def family_to_dict(family):
    return {
        "format": FAMILY_FORMAT,
        "mesh": mesh_to_dict(family.mesh),
        "values": family.values,
        "offset": family.offset,
        # unbounded window edges are written as null
        "window": [w if np.isfinite(w) else None for w in (family.window.lo, family.window.hi)],
        "degeneracy_tol": family.degeneracy_tol,
        "frames": None if family.frames is None else _frames_to_dict(family.frames,
                                                                      family.frame_mask),
        "transitions": sorted([int(u), int(v), int(s)] for (u, v), s in family.transitions.items()),
        "aux_maps": sorted([int(u), int(v), np.asarray(p).tolist()]
                           for (u, v), p in family.aux_maps.items()),
        "meta": family.meta,
    }


def family_from_dict(d):
    if d.get("format") != FAMILY_FORMAT:
        raise SpecflowError("not a family file", format=d.get("format"))
    mesh = mesh_from_dict(d["mesh"])
    frames = mask = None
    if d.get("frames") is not None:
        frames, mask = _frames_from_dict(d["frames"])
    return EnhancedGraph(
        mesh, np.asarray(d["values"], dtype=float), int(d["offset"]),
        SpectralWindow(*(s * np.inf if w is None else w for s, w in zip((-1, 1), d["window"]))),
        frames, mask,
        {(u, v): s for u, v, s in d.get("transitions", [])},
        {(u, v): np.asarray(p, dtype=np.int64) for u, v, p in d.get("aux_maps", [])},
        float(d.get("degeneracy_tol", 1e-8)), dict(d.get("meta", {})))


# -- cover --------------------------------------------------------------------

def cover_to_dict(cover):
    return {"format": COVER_FORMAT, "sets": cover.sets, "levels": cover.levels,
            "gap_margin": cover.gap_margin, "assignment": cover.assignment,
            "nerve": {str(d): [list(s) for s in simplices] for d, simplices in cover.nerve.items()}}


def cover_from_dict(d, family, check_contractible=True):
    """Cover for a family from its JSON form.

    A file with an assignment and nerve is taken as written, so that
    ``validate_cover`` can report inconsistencies; otherwise the
    assignment and nerve are rebuilt from the sets and levels.
    """
    if d.get("format") != COVER_FORMAT:
        raise SpecflowError("not a cover file", format=d.get("format"))
    gap = float(d.get("gap_margin", GAP_MARGIN))
    if "assignment" not in d or "nerve" not in d:
        return build_cover(family, sets=d["sets"], levels=d["levels"], gap_margin=gap,
                           check_contractible=check_contractible)
    cover = SpectralCover(d["sets"], d["levels"], d["assignment"], gap_margin=gap)
    cover.nerve = {int(k): [tuple(int(i) for i in s) for s in v] for k, v in d["nerve"].items()}
    mesh = family.mesh
    cover.witnesses = {s: [c[0] for c in mesh.components(cover.intersection(s))]
                       for simplices in cover.nerve.values() for s in simplices}
    return cover


# -- files --------------------------------------------------------------------

def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def save_family(family, path):
    _write(path, dumps(family_to_dict(family)))


def load_family(path):
    return family_from_dict(_read(path))


def save_cover(cover, path):
    _write(path, dumps(cover_to_dict(cover)))


def load_cover(path, family):
    return cover_from_dict(_read(path), family)
