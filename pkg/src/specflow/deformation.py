"""Moves on enhanced graphs over 3-manifolds and the standard-form reduction.

A move returns a new family.  The basic ones are ``flatten`` (pin a band to
a constant on the inner ball) and ``scale`` (lift a subbundle's eigenvalue
on the ball).  When the lifted subbundle is degenerate with other bands on
B′, its frame over B′ must first be rebuilt from the boundary data
(``extend_splitting``).  That is possible exactly when its Chern number over
the boundary sphere vanishes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .cover import build_cover, nerve_loop, pushforward_fundamental
from .errors import ChernObstructionError, DeformationError, InconsistencyError
from .frames import (ANGLE_MAX, SIGMA_MIN, edge_links, link_certificate, relax_split,
                     synchronize)
from .gerbe import berry_chern_oracle, build_gerbe_cocycle, dd_pair
from .spectral_flow import build_sf_cocycle, crossing_oracle, evaluate_on_loop

__all__ = [
    "CrossingLocus",
    "crossing_locus",
    "check_condition_A",
    "check_condition_B",
    "blend_weight",
    "flatten",
    "extend_splitting",
    "scale",
    "frame_certificate",
    "is_separated",
    "clutching_degree",
    "dichotomy",
    "invariants",
    "sep1_pipeline",
    "standard_form_decompose",
]


def _group(bands):
    return (int(bands),) if np.isscalar(bands) else tuple(int(b) for b in bands)


def _rows(family, bands):
    rows = sorted(family.row(k) for k in _group(bands))
    if rows != list(range(rows[0], rows[-1] + 1)):
        raise DeformationError("band group must be contiguous", bands=list(_group(bands)))
    return rows


@dataclass
class CrossingLocus:
    bands: tuple
    vertices: np.ndarray
    simplices: list
    multiplicity: dict = field(default_factory=dict)

    @property
    def empty(self):
        return self.vertices.size == 0

    def as_dict(self):
        return {"bands": [list(b) for b in self.bands], "vertices": self.vertices.tolist(),
                "n_simplices": len(self.simplices),
                "multiplicity": {str(k): v for k, v in self.multiplicity.items()}}


def crossing_locus(family, lower, upper, tol=None):
    """Vertices where a band of ``lower`` meets a band of ``upper``, with the
    mesh simplices spanned by them and the local multiplicity of the meeting
    value."""
    tol = family.degeneracy_tol if tol is None else tol
    lower, upper = _group(lower), _group(upper)
    present = set(family.band_indices)
    if not (set(lower) <= present and set(upper) <= present):
        return CrossingLocus((lower, upper), np.zeros(0, dtype=np.int64), [])
    a = family.values[[family.row(k) for k in lower]]
    b = family.values[[family.row(k) for k in upper]]
    gap = np.min(np.abs(a[:, None, :] - b[None, :, :]), axis=(0, 1))
    verts = np.flatnonzero(gap <= tol)
    mask = np.zeros(family.mesh.n_vertices, dtype=bool)
    mask[verts] = True
    simplices = [tuple(s) for d, arr in family.mesh.simplices.items()
                 for s in arr.tolist() if mask[s].all()]
    mult = {}
    for x in verts.tolist():
        v = family.values[:, x]
        ref = family.values[family.row(upper[0]), x]
        mult[x] = int(np.sum(np.abs(v - ref) <= tol))
    return CrossingLocus((lower, upper), verts, simplices, mult)


def check_condition_A(family, zero=0, above=1, below=-1):
    """Band ``zero`` may meet only ``above`` and ``below``, never both at
    one vertex.  Groups of bands are accepted in place of single bands."""
    zero, above, below = _group(zero), _group(above), _group(below)
    others = [k for k in family.band_indices if k not in zero + above + below]
    up = crossing_locus(family, zero, above)
    down = crossing_locus(family, zero, below)
    violations = []
    both = np.intersect1d(up.vertices, down.vertices)
    if both.size:
        violations.append({"kind": "triple intersection", "vertex": int(both[0])})
    if others:
        stray = crossing_locus(family, zero, others)
        if not stray.empty:
            violations.append({"kind": "meets another band", "vertex": int(stray.vertices[0])})
    return {"condition": "A", "passed": not violations, "violations": violations,
            "locus_up": up, "locus_down": down}


def check_condition_B(family, ball, zero=0, above=1, below=-1):
    """The upper crossing locus lies in B and the lower one avoids B."""
    rep = check_condition_A(family, zero, above, below)
    inside = ball.mask()
    violations = []
    up, down = rep["locus_up"], rep["locus_down"]
    out = up.vertices[~inside[up.vertices]]
    if out.size:
        violations.append({"kind": "upper locus outside ball", "vertex": int(out[0])})
    bad = down.vertices[inside[down.vertices]]
    if bad.size:
        violations.append({"kind": "lower locus inside ball", "vertex": int(bad[0])})
    notes = []
    if up.empty and down.empty:
        notes.append("empty crossing loci: the graph is disconnected and the family is trivial")
    return {"condition": "B", "passed": rep["passed"] and not violations,
            "violations": rep["violations"] + violations, "notes": notes,
            "locus_up": up, "locus_down": down}


def blend_weight(region):
    """1 on B′, 0 off B, linear in hop distance across the shell."""
    mesh = region.mesh
    outside = np.setdiff1d(np.arange(mesh.n_vertices), region.vertices)
    d_in = mesh.hop_distance(region.inner)
    d_out = mesh.hop_distance(outside) if outside.size else np.full(mesh.n_vertices, np.inf)
    with np.errstate(invalid="ignore"):
        w = d_out / (d_in + d_out)
    w[region.inner] = 1.0
    w[outside] = 0.0
    return np.nan_to_num(w, nan=1.0)


def _check_order(values, tol, rows=None):
    d = np.diff(values, axis=0)
    bad = np.argwhere(d < -tol)
    if bad.size:
        r, x = bad[0]
        raise DeformationError("move forces bands to cross", row=int(r), vertex=int(x))


def flatten(family, bands, region, value):
    """Pin a band (group) to ``value`` on B′, blending back to the original
    values across the shell B \\ B′.  Frames are kept."""
    rows = _rows(family, bands)
    w = blend_weight(region)
    vals = family.values.copy()
    vals[rows] = (1 - w) * vals[rows] + w * value
    _check_order(vals, family.degeneracy_tol)
    return family.copy(values=vals)


def _cluster(family, rows, vertices):
    """Rows degenerate with the selected group at every given vertex."""
    tol = family.degeneracy_tol
    vals = family.values[:, vertices]
    lo, hi = rows[0], rows[-1]
    while lo > 0 and np.all(np.abs(vals[lo - 1] - vals[rows[0]]) <= tol):
        lo -= 1
    while hi < family.n_bands - 1 and np.all(np.abs(vals[hi + 1] - vals[rows[-1]]) <= tol):
        hi += 1
    return list(range(lo, hi + 1))


def _rim(region):
    """Vertices of ∂B′ and the remaining vertices of B′."""
    rim = np.array(sorted({v for t in region.boundary(inner=True) for v in t}), dtype=np.int64)
    return rim, np.setdiff1d(region.inner, rim)


def _check_local_coordinates(family, region):
    if not family.aux_maps and not family.transitions:
        return
    inside = region.mask()
    for (u, v), perm in family.aux_maps.items():
        if inside[u] and inside[v] and np.any(perm != np.arange(perm.size)):
            raise DeformationError("auxiliary coordinates change inside the ball", edge=[u, v])
    for (u, v), s in family.transitions.items():
        if inside[u] and inside[v] and s:
            raise DeformationError("bands relabelled inside the ball", edge=[u, v])


def _rim_start(family, raw, rim, interior, split, sigma_min, angle_max):
    """Starting basis change: smooth per-group gauges on ∂B′, filled in
    harmonically (in auxiliary coordinates) over the interior of B′."""
    mesh = family.mesh
    start = {}
    rim = rim.tolist()
    n = next(iter(raw.values())).shape[1]
    for x in rim:
        start[x] = np.zeros((n, n), dtype=complex)
    for cols in (slice(0, split), slice(split, n)):
        part = {x: raw[x][:, cols] for x in rim}
        fixed = synchronize(mesh, rim, part, family.transport_in, sigma_min=sigma_min,
                            angle_max=angle_max)
        for x in rim:
            start[x][cols, cols] = part[x].conj().T @ fixed[x]
    idx = {int(x): i for i, x in enumerate(interior)}
    if not idx:
        return start
    nbrs = mesh.neighbors()
    aux = next(iter(raw.values())).shape[0]
    rows, cols, data = [], [], []
    rhs = np.zeros((len(idx), aux * n), dtype=complex)
    for x, i in idx.items():
        for y in nbrs[x]:
            if y in idx:
                rows.append(i)
                cols.append(idx[y])
                data.append(-1.0)
            else:
                rhs[i] += (raw[y] @ start[y]).ravel()
        rows.append(i)
        cols.append(i)
        data.append(float(len(nbrs[x])))
    lu = scipy.sparse.linalg.splu(
        scipy.sparse.csc_matrix((data, (rows, cols)), shape=(len(idx), len(idx))))
    ext = (lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)).reshape(len(idx), aux, n)
    for x, i in idx.items():
        start[x] = raw[x].conj().T @ ext[i]
    return start


def extend_splitting(family, bands, region, sigma_min=SIGMA_MIN, angle_max=ANGLE_MAX):
    """Rebuild frames on B′ so that the selected bands span a subbundle that
    continues their eigenbundle from outside B′.

    On B′ the selected bands must be degenerate with a cluster of bands (for
    instance after ``flatten``).  A continuous unitary frame of the cluster
    space over B′ is relaxed so that on ∂B′ it splits into the selected
    eigenspace and its complement; inside B′ it is free, and its last
    columns become the selected frames.
    Raises ChernObstructionError when the selected bundle has nonzero Chern
    number over ∂B or no certified continuous frame is found.
    """
    sel = _rows(family, bands)
    cluster = _cluster(family, sel, region.inner)
    if cluster == sel:
        return family.copy()
    if cluster[-1] != sel[-1]:
        raise DeformationError("selected bands must be the top of their cluster on B'",
                               bands=list(_group(bands)))
    _check_local_coordinates(family, region)
    sel_bands = [family.offset + r for r in sel]
    chern = berry_chern_oracle(family, region.boundary(), sel_bands)
    if chern != 0:
        raise ChernObstructionError("splitting does not extend over the ball",
                                    bands=sel_bands, chern=chern)
    comp = [r for r in cluster if r not in sel]
    mesh = family.mesh
    rim, interior = _rim(region)
    if len(mesh.components(rim)) != 1:
        raise DeformationError("boundary of B' is not connected")
    outer = np.setdiff1d(np.arange(family.n_bands), cluster)
    vals = family.values[:, region.vertices]
    if outer.size and np.min(np.abs(vals[outer][:, None] - vals[cluster][None])) <= family.degeneracy_tol:
        raise DeformationError("cluster bands meet other bands on the ball")
    rows = comp + sel
    inner = region.inner
    raw = {int(x): family.frames_at(rows, x) for x in inner}
    init = _rim_start(family, raw, rim, interior, len(comp), sigma_min, angle_max)
    constrained = ~np.isin(np.arange(mesh.n_vertices), interior)
    fixed, cert, ok = relax_split(mesh, inner, raw, family.transport_in, constrained,
                                  len(comp), sigma_min=sigma_min, angle_max=angle_max,
                                  init=init)
    if not ok:
        raise ChernObstructionError("no continuous frame of the splitting over the ball",
                                    bands=sel_bands, sigma_min=cert[0], angle=cert[1])
    frames = family.frames.copy()
    for x in inner.tolist():
        frames[rows, x] = fixed[x].T
    return family.copy(frames=frames)


def scale(family, bands, eps, region, extend=True):
    """Raise the selected bands by eps·bump, bump = blend weight of the ball.

    If the selected bands are degenerate with others on B′ their frames are
    first rebuilt by ``extend_splitting`` (unless ``extend`` is False).
    ``eps=None`` picks a tenth of the smallest gap to the next band on B.
    """
    sel = _rows(family, bands)
    top = sel[-1]
    w = blend_weight(region)
    if top + 1 < family.n_bands:
        gap = float(np.min(family.values[top + 1, region.vertices]
                           - family.values[top, region.vertices]))
    else:
        gap = np.inf
    if eps is None:
        eps = 0.1 * gap
    if eps < 0:
        raise DeformationError("scale expects eps ≥ 0", eps=eps)
    if eps > 0.5 * gap:
        raise DeformationError("eps exceeds half the gap to the next band", eps=eps, gap=gap)
    if eps == 0:
        return family.copy()
    out = extend_splitting(family, bands, region) if extend else family.copy()
    vals = out.values.copy()
    vals[sel] += eps * w
    _check_order(vals, family.degeneracy_tol)
    out.values = vals
    return out


def frame_certificate(family, bands, vertices):
    """Link certificate (smallest singular value, largest polar angle) of a
    band group after gauge synchronization over a connected vertex set."""
    rows = _rows(family, bands)
    raw = {int(x): family.frames_at(rows, x) for x in vertices}
    fixed = synchronize(family.mesh, vertices, raw, family.transport_in)
    return link_certificate(edge_links(family.mesh, vertices, fixed, family.transport_in))


def is_separated(family, lower=0, upper=1, tol=None):
    """True iff every band of ``lower`` lies strictly below every band of
    ``upper`` at every vertex, by more than the degeneracy tolerance."""
    tol = family.degeneracy_tol if tol is None else tol
    a = family.values[[family.row(k) for k in _group(lower)]].max(axis=0)
    b = family.values[[family.row(k) for k in _group(upper)]].min(axis=0)
    return bool(np.all(b - a > tol))


def clutching_degree(family, ball, lower=0, upper=1):
    """Chern number of the lower eigenbundle over ∂B; the upper one must
    carry the opposite number."""
    surf = ball.boundary()
    k = berry_chern_oracle(family, surf, _group(lower))
    k1 = berry_chern_oracle(family, surf, _group(upper))
    if k + k1 != 0:
        raise InconsistencyError("eigenbundles over the ball boundary do not cancel",
                                 lower=k, upper=k1)
    return k


def dichotomy(family, lower=0, upper=1):
    """Report the two degenerate cases in which the family is trivial:
    bands that never meet, or bands that coincide everywhere with constant
    multiplicity 2."""
    loc = crossing_locus(family, lower, upper)
    nv = family.mesh.n_vertices
    if loc.empty:
        return {"case": "separated", "trivial": True, "locus": loc}
    mult = set(loc.multiplicity.values())
    if loc.vertices.size == nv and mult == {2}:
        return {"case": "degenerate everywhere", "trivial": True, "locus": loc}
    return {"case": "generic", "trivial": None, "locus": loc}


def invariants(family, cover, loops=(), mesh_loops=()):
    """sf loop evaluations and dd_pair for a family on a fixed cover."""
    out = {}
    sf = build_sf_cocycle(family, cover)
    out["sf_loops"] = [evaluate_on_loop(sf, l) for l in loops]
    out["sf_mesh_loops"] = [evaluate_on_loop(sf, nerve_loop(cover, l)) for l in mesh_loops]
    if cover.nerve.get(3):
        fc = pushforward_fundamental(cover, family.mesh)
        out["dd_pair"] = dd_pair(build_gerbe_cocycle(family, cover), fc)
    return out


def _with_levels(family, cover):
    return build_cover(family, sets=cover.sets, levels=cover.levels, gap_margin=cover.gap_margin,
                       check_contractible=False)


def sep1_pipeline(family, region, lower=(0, 1), upper=(2, 3), value=0.0, eps=None,
                  cover=None, loops=()):
    """flatten → extend splitting → scale, separating ``lower`` from ``upper``.

    With a cover, sf loop evaluations and dd_pair are recomputed after each
    move on the same sets and levels; a change raises InconsistencyError.
    """
    steps = []

    def record(name, fam):
        entry = {"move": name, "separated": is_separated(fam, lower, upper)}
        if cover is not None:
            entry.update(invariants(fam, _with_levels(fam, cover), loops))
            if steps and any(entry.get(k) != steps[0].get(k) for k in ("sf_loops", "dd_pair")):
                raise InconsistencyError("move changed an invariant", move=name)
        steps.append(entry)

    record("start", family)
    f = flatten(family, lower, region, value)
    f = flatten(f, upper, region, value)
    record("flatten", f)
    f = extend_splitting(f, upper, region)
    record("extend_splitting", f)
    f = scale(f, upper, eps, region, extend=False)
    record("scale", f)
    smin, amax = frame_certificate(f, upper, region.vertices)
    steps[-1]["upper_frame_certificate"] = {"sigma_min": smin, "angle_max": amax}
    if smin <= SIGMA_MIN or amax >= ANGLE_MAX:
        raise DeformationError("rebuilt frames are not continuous over the ball",
                               sigma_min=smin, angle=amax)
    return f, steps


def standard_form_decompose(family, cover=None, ball=None, mesh_loops=(), levels=(0.5,),
                            zero=0, above=1, below=-1):
    """Spectral-flow loop evaluations and gerbe charge k, cross-checked.

    sf evaluations come from the cover and are checked against the crossing
    oracle on each mesh loop.  k comes from the clutching degree over ∂B
    when a ball is supplied and from dd_pair when the nerve has 3-simplices;
    if both are available they must agree.
    """
    rep = {"condition_A": check_condition_A(family, zero, above, below)["passed"]}
    if ball is not None:
        b = check_condition_B(family, ball, zero, above, below)
        rep["condition_B"] = b["passed"]
    sf_vals, oracle = [], []
    if cover is not None and mesh_loops:
        sf = build_sf_cocycle(family, cover)
        for l in mesh_loops:
            sf_vals.append(evaluate_on_loop(sf, nerve_loop(cover, l)))
            oracle.append([crossing_oracle(family, l, lv) for lv in levels])
        if any(o != s for s, os in zip(sf_vals, oracle) for o in os):
            raise InconsistencyError("sf evaluation disagrees with crossing count",
                                     sf=sf_vals, oracle=oracle)
    k_clutch = k_dd = None
    if ball is not None:
        k_clutch = clutching_degree(family, ball, zero, above)
    if cover is not None and cover.nerve.get(3):
        k_dd = dd_pair(build_gerbe_cocycle(family, cover),
                       pushforward_fundamental(cover, family.mesh))
    if k_clutch is not None and k_dd is not None and k_clutch != k_dd:
        raise InconsistencyError("clutching degree disagrees with dd_pair",
                                 clutching=k_clutch, dd=k_dd)
    k = k_clutch if k_clutch is not None else k_dd
    if k is None:
        k = 0 if dichotomy(family, zero, above)["trivial"] else None
    rep.update({"sf_loops": sf_vals, "crossing_oracle": oracle, "k": k,
                "k_clutching": k_clutch, "k_dd": k_dd,
                "residual": {"sf": [0] * len(sf_vals),
                             "dd": None if k_dd is None or k is None else k_dd - k}})
    return rep
