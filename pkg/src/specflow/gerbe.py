"""Determinant-line phase 2-cocycle, its integer lift, and a Berry-flux oracle.

For each nerve edge the bands strictly between the two levels span a finite
dimensional difference space H(x).  A continuous orthonormal frame of H over
the overlap gives a volume element; on a triple overlap the frames of the
two short gaps, wedged together, differ from the frame of the long gap by a
phase.  Those phases form the S¹-valued cocycle g.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import unitary_group

from .cover import CechCochain
from .errors import CocycleError, FamilyError, SectionError
from .frames import ANGLE_MAX, edge_links, link_certificate, polar, synchronize
from .mesh import permutation_sign

__all__ = [
    "CONTINUITY_MIN",
    "PHASE_TOL",
    "RESIDUAL_MAX",
    "BERRY_RESIDUAL_MAX",
    "DifferenceSpaceSection",
    "GerbeCocycle",
    "build_section",
    "triple_phase",
    "build_gerbe_cocycle",
    "lift_phases",
    "dd_pair",
    "berry_flux",
    "berry_chern_oracle",
]

CONTINUITY_MIN = 0.5
PHASE_TOL = 1e-6
RESIDUAL_MAX = 0.1
BERRY_RESIDUAL_MAX = 0.05
# Largest phase step tolerated between adjacent vertices while unwrapping.
UNWRAP_JUMP = np.pi / 2
# Orientation of the discrete Berry flux; fixed so that the lower line of the
# degree-k clutching family has Chern number k.
BERRY_SIGN = 1


@dataclass
class DifferenceSpaceSection:
    """Frame of H(x) for levels lo < hi, indexed by cover sets (lo, hi)."""

    pair: tuple
    levels: tuple
    vertices: np.ndarray
    frames: dict
    dim: int
    base: int
    continuity: float = 1.0
    angle: float = 0.0
    holonomy: dict = field(default_factory=dict)

    def frame(self, x):
        try:
            return self.frames[int(x)]
        except KeyError:
            raise SectionError("vertex outside the overlap", pair=list(self.pair), vertex=int(x))


def build_section(family, cover, pair, root=None, gauge=None, continuity_min=CONTINUITY_MIN,
                  angle_max=ANGLE_MAX):
    """Continuous frame of the difference space over U_i ∩ U_j.

    Raw eigenframes are aligned by Procrustes synchronization over the
    overlap, then certified edge by edge: every overlap matrix must have
    singular values above ``continuity_min`` and a polar factor within
    ``angle_max`` of the identity.  ``gauge`` (an N×N unitary) rotates the
    frame at the base vertex ``root``.  The
    returned section is keyed by (lower-level set, upper-level set).
    """
    i, j = pair
    if cover.levels[i] > cover.levels[j] or (cover.levels[i] == cover.levels[j] and i > j):
        i, j = j, i
    lo, hi = float(cover.levels[i]), float(cover.levels[j])
    inter = cover.intersection((i, j))
    if inter.size == 0:
        raise SectionError("empty overlap", pair=[i, j])
    mesh = family.mesh
    rows = {int(x): family.rows_between(x, lo, hi) for x in inter}
    dims = {len(r) for r in rows.values()}
    if len(dims) != 1:
        raise SectionError("difference space changes rank over the overlap", pair=[i, j],
                           ranks=sorted(dims))
    dim = dims.pop()
    try:
        raw = {x: family.frames_at(r, x) for x, r in rows.items()}
    except FamilyError as exc:
        raise SectionError("frames missing on the overlap", pair=[i, j], **exc.details)
    frames = {}
    for comp in mesh.components(inter):
        start = comp[0] if root is None or root not in comp else int(root)
        comp = [start] + [v for v in comp if v != start]
        frames.update(synchronize(mesh, comp, raw, family.transport_in))
        if gauge is not None and dim:
            for v in comp:
                frames[v] = frames[v] @ gauge
    links = edge_links(mesh, inter, frames, family.transport_in)
    cert, angle = link_certificate(links) if dim else (1.0, 0.0)
    if cert <= continuity_min or angle >= angle_max:
        raise SectionError("continuity certificate violated", pair=[i, j], sigma_min=cert,
                           angle=angle)
    holonomy = {}
    for e, m in links.items():
        if dim:
            d = np.linalg.det(polar(m)[0])
            if abs(abs(d) - 1.0) > PHASE_TOL:
                raise SectionError("holonomy is not a phase", pair=[i, j], edge=list(e))
            holonomy[e] = float(np.angle(d))
    base = int(inter[0]) if root is None else int(root)
    return DifferenceSpaceSection((i, j), (lo, hi), inter, frames, dim, base, cert, angle,
                                  holonomy)


def triple_phase(s_ij, s_jk, s_ik, x):
    """Phase of ⟨ω_ij ∧ ω_jk, ω_ik⟩ at x for levels λ_i ≤ λ_j ≤ λ_k.

    Returns (phase, raw modulus).
    """
    a, b, c = s_ij.frame(x), s_jk.frame(x), s_ik.frame(x)
    if a.shape[1] + b.shape[1] != c.shape[1]:
        raise CocycleError("difference spaces do not add up", vertex=int(x),
                           dims=[a.shape[1], b.shape[1], c.shape[1]])
    if c.shape[1] == 0:
        return 1.0 + 0j, 1.0
    raw = np.linalg.det(c.conj().T @ np.hstack([a, b]))
    mod = float(abs(raw))
    if mod < 0.9:
        raise CocycleError("volume elements inconsistent", vertex=int(x), modulus=mod)
    return raw / mod, mod


@dataclass
class GerbeCocycle:
    """g at witnesses, its continuous logs θ over triple overlaps, and the
    integer 3-cochain n."""

    g: CechCochain
    phases: dict      # 2-simplex -> (vertices, unit phases)
    theta: dict       # 2-simplex -> (vertices, real logs)
    n: CechCochain
    residual: float
    certificates: dict = field(default_factory=dict)

    def with_theta_shift(self, simplex, m, cover, mesh):
        """Same cocycle with θ on one 2-simplex shifted by 2πm."""
        theta = dict(self.theta)
        vs, th = theta[tuple(simplex)]
        theta[tuple(simplex)] = (vs, th + 2 * np.pi * m)
        n, res = _integer_lift(theta, cover, mesh)
        return GerbeCocycle(self.g, self.phases, theta, n, res, dict(self.certificates))


def _level_order(cover, simplex):
    return sorted(simplex, key=lambda i: (cover.levels[i], i))


def _sorted_pair(cover, i, j):
    return tuple(_level_order(cover, (i, j)))


def _unwrap(mesh, vertices, phases, max_jump=None, rng=None):
    """Continuous log of a phase function on a vertex set; principal branch
    at the lowest vertex of each component, or at a random one with ``rng``."""
    max_jump = UNWRAP_JUMP if max_jump is None else max_jump
    idx = {int(v): n for n, v in enumerate(vertices)}
    theta = np.empty(len(vertices))
    for comp in mesh.components(vertices):
        root = comp[0] if rng is None else int(rng.choice(comp))
        order, parent = mesh.bfs_tree(comp, root)
        theta[idx[root]] = np.angle(phases[idx[root]])
        for v in order[1:]:
            a, b = idx[parent[v]], idx[v]
            step = np.angle(phases[b] / phases[a])
            theta[b] = theta[a] + step
    worst = 0.0
    for u, v in mesh.edges.tolist():
        if u in idx and v in idx:
            a, b = idx[u], idx[v]
            step = theta[b] - theta[a]
            if abs(step) >= max_jump:
                raise CocycleError("phase jump too large while unwrapping", edge=[u, v],
                                   jump=float(step))
            worst = max(worst, abs(step - np.angle(phases[b] / phases[a])))
    if worst > 1e-6:
        raise CocycleError("unwrapping is path dependent", defect=worst)
    return theta


def _integer_lift(theta, cover, mesh, residual_max=None):
    residual_max = RESIDUAL_MAX if residual_max is None else residual_max
    n, worst = {}, 0.0
    for s in cover.nerve.get(3, ()):
        inter = cover.intersection(s)
        total = np.zeros(len(inter))
        for f in range(4):
            face = s[:f] + s[f + 1:]
            vs, th = theta[face]
            total += (-1) ** f * th[np.searchsorted(vs, inter)]
        val = total / (2 * np.pi)
        k = np.rint(val)
        if np.any(k != k[0]):
            raise CocycleError("integer lift differs between witnesses", simplex=list(s))
        res = float(np.max(np.abs(val - k)))
        if res >= residual_max:
            raise CocycleError("integer lift residual too large", simplex=list(s), residual=res)
        worst = max(worst, res)
        n[tuple(s)] = int(k[0])
    return CechCochain(3, "integer", n), worst


def lift_phases(phases, cover, mesh, residual_max=None, max_jump=None, rng=None):
    """θ and n from phase functions {2-simplex: (vertices, phases)}."""
    theta = {s: (vs, _unwrap(mesh, vs, ph, max_jump, rng)) for s, (vs, ph) in phases.items()}
    n, res = _integer_lift(theta, cover, mesh, residual_max)
    return theta, n, res


def build_gerbe_cocycle(family, cover, rng=None, gauge=False, continuity_min=CONTINUITY_MIN,
                        angle_max=ANGLE_MAX, phase_tol=PHASE_TOL, residual_max=RESIDUAL_MAX,
                        unwrap_jump=None):
    """Phase 2-cocycle g, its continuous logs, and the integer lift.

    With ``gauge`` set, every section is rebased at a random overlap
    vertex and rotated by a random unitary drawn from ``rng``; the
    unwrapping trees are rooted at random vertices and g is recorded at a
    random witness.
    """
    mesh = family.mesh
    rng = np.random.default_rng(rng)
    sections = {}
    worst_cont = 1.0
    for e in cover.nerve.get(1, ()):
        key = _sorted_pair(cover, *e)
        root, u = None, None
        if gauge:
            inter = cover.intersection(e)
            root = int(rng.choice(inter))
            n = len(family.rows_between(root, *sorted(cover.levels[list(e)])))
            u = unitary_group.rvs(n, random_state=rng) if n > 1 else (
                np.exp(2j * np.pi * rng.random()) * np.eye(n) if n else None)
            if u is not None:
                u = np.atleast_2d(u)
        sections[key] = build_section(family, cover, key, root=root, gauge=u,
                                      continuity_min=continuity_min, angle_max=angle_max)
        worst_cont = min(worst_cont, sections[key].continuity)

    phases, g_vals, worst_mod = {}, {}, 0.0
    for s in cover.nerve.get(2, ()):
        p, q, r = _level_order(cover, s)
        sign = permutation_sign([s.index(p), s.index(q), s.index(r)])
        inter = cover.intersection(s)
        out = np.empty(len(inter), dtype=complex)
        for m, x in enumerate(inter):
            ph, mod = triple_phase(sections[(p, q)], sections[(q, r)], sections[(p, r)], x)
            worst_mod = max(worst_mod, abs(mod - 1.0))
            out[m] = ph if sign > 0 else np.conj(ph)
        phases[tuple(s)] = (inter, out)
        g_vals[tuple(s)] = complex(out[rng.integers(len(out)) if gauge else 0])
    g = CechCochain(2, "phase", g_vals)

    worst_delta = 0.0
    for s in cover.nerve.get(3, ()):
        inter = cover.intersection(s)
        prod = np.ones(len(inter), dtype=complex)
        for f in range(4):
            vs, ph = phases[s[:f] + s[f + 1:]]
            val = ph[np.searchsorted(vs, inter)]
            prod *= val if f % 2 == 0 else np.conj(val)
        dev = float(np.max(np.abs(np.angle(prod))))
        if dev > phase_tol:
            raise CocycleError("δg ≠ 1", simplex=list(s), phase_error=dev)
        worst_delta = max(worst_delta, dev)

    theta, n, res = lift_phases(phases, cover, mesh, residual_max, unwrap_jump,
                                rng if gauge else None)
    certs = {"continuity_min": worst_cont, "pairing_modulus_dev": worst_mod,
             "delta_g_phase_error": worst_delta, "lift_residual": res}
    return GerbeCocycle(g, phases, theta, n, res, certs)


def dd_pair(gc, fclass):
    """⟨n, fclass⟩ for an integer 3-cycle on the nerve."""
    bd = {}
    for s, c in fclass.items():
        s = tuple(s)
        for f in range(4):
            face = s[:f] + s[f + 1:]
            bd[face] = bd.get(face, 0) + (-1) ** f * c
    if any(bd.values()):
        raise CocycleError("fundamental class is not a cycle")
    return int(gc.n.pair({tuple(s): c for s, c in fclass.items()}))


# -- Berry oracle -------------------------------------------------------------

def _band_rows(family, band):
    bands = (band,) if np.isscalar(band) else tuple(band)
    return [family.row(k) for k in bands]


def berry_flux(family, surface, band):
    """Total discrete Berry flux / 2π of a band (or band group) over an
    oriented triangulated surface {triangle: ±1}."""
    rows = _band_rows(family, band)
    verts = sorted({v for t in surface for v in t})
    vals = family.values
    others = np.setdiff1d(np.arange(family.n_bands), rows)
    for x in verts:
        if others.size and rows:
            gap = np.min(np.abs(vals[others, x][:, None] - vals[rows, x][None, :]))
            if gap <= family.degeneracy_tol:
                raise FamilyError("band group degenerate with another band on the surface",
                                  vertex=int(x))
    frames = {x: family.frames_at(rows, x) for x in verts}
    link = {}

    def overlap(a, b):
        if (a, b) not in link:
            if family.shift(a, b):
                raise FamilyError("band relabelled across a surface edge", edge=[a, b])
            link[(a, b)] = np.linalg.det(frames[a].conj().T @ family.transport_in(a, b, frames[b]))
        return link[(a, b)]

    total = 0.0
    for (a, b, c), sgn in surface.items():
        w = overlap(a, b) * overlap(b, c) * overlap(c, a)
        if abs(w) < 1e-8:
            raise FamilyError("frames nearly orthogonal across a triangle", triangle=[a, b, c])
        total += sgn * -np.angle(w)
    return BERRY_SIGN * total / (2 * np.pi)


def berry_chern_oracle(family, surface, band, residual_max=BERRY_RESIDUAL_MAX):
    """Integer Chern number of a band (or band group) over a closed surface."""
    flux = berry_flux(family, surface, band)
    k = int(np.rint(flux))
    if abs(flux - k) >= residual_max:
        raise FamilyError("Berry flux not near an integer; refine the mesh", flux=float(flux))
    return k
