"""Enhanced spectral graphs: band functions plus eigenframes over a mesh.

A family is stored as sorted band values ``values[row, vertex]`` (band index
``offset + row``) together with eigenframes in a fixed auxiliary space.
Edges may carry a band relabelling (``transitions``) and a matching
permutation of the auxiliary basis (``aux_maps``); these are how a family
with nonzero spectral flow closes up around a loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    FamilyError,
    LoopInconsistencyError,
    MatchingAmbiguityError,
    NonHermitianError,
)
from .mesh import ParamMesh

__all__ = [
    "SpectralWindow",
    "EnhancedGraph",
    "MatrixFamilySample",
    "ingest_matrix_family",
    "constant_family",
    "ladder_family",
    "empty_family",
    "winding_family",
    "monopole_family",
    "monopole_center",
    "direct_sum",
    "negate",
    "pullback",
    "circle_cover_map",
    "DEGENERACY_TOL",
]

DEGENERACY_TOL = 1e-8
FRAME_TOL = 1e-10

# Handedness of the azimuthal winding in monopole_family.  Calibrated once so
# that the gerbe pairing of monopole(+1) over S³ is +1 (see test_gerbe).
_MONOPOLE_HANDEDNESS = 1


@dataclass(frozen=True)
class SpectralWindow:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise FamilyError("spectral window needs lo < hi", lo=self.lo, hi=self.hi)

    def intersect(self, other):
        return SpectralWindow(max(self.lo, other.lo), min(self.hi, other.hi))

    def reflect(self):
        return SpectralWindow(-self.hi, -self.lo)


def phase_fix(vecs):
    """Make the largest-magnitude entry of each column real positive."""
    vecs = np.array(vecs, dtype=complex)
    if vecs.size == 0:
        return vecs
    idx = np.argmax(np.abs(vecs) - 1e-12 * np.arange(vecs.shape[-2])[:, None], axis=-2)
    pivot = np.take_along_axis(vecs, idx[..., None, :], axis=-2)
    ph = pivot / np.abs(pivot)
    return vecs / ph


@dataclass
class EnhancedGraph:
    mesh: ParamMesh
    values: np.ndarray
    offset: int
    window: SpectralWindow
    frames: np.ndarray | None = None
    frame_mask: np.ndarray | None = None
    transitions: dict = field(default_factory=dict)
    aux_maps: dict = field(default_factory=dict)
    degeneracy_tol: float = DEGENERACY_TOL
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1, self.mesh.n_vertices)
        if self.frames is not None and self.frame_mask is None:
            self.frame_mask = np.ones(self.values.shape, dtype=bool)

    # -- indexing -------------------------------------------------------
    @property
    def n_bands(self):
        return self.values.shape[0]

    @property
    def band_indices(self):
        return list(range(self.offset, self.offset + self.n_bands))

    @property
    def aux_dim(self):
        return 0 if self.frames is None else self.frames.shape[2]

    @property
    def bands(self):
        return {k: self.values[k - self.offset] for k in self.band_indices}

    def row(self, k):
        r = k - self.offset
        if not 0 <= r < self.n_bands:
            raise FamilyError("band index not stored", band=k)
        return r

    def band(self, k):
        return self.values[self.row(k)]

    def shift(self, u, v):
        """Band k at u continues as band k + shift(u, v) at v."""
        if u < v:
            return self.transitions.get((u, v), 0)
        return -self.transitions.get((v, u), 0)

    def frame(self, k, x):
        r = self.row(k)
        if self.frames is None or not self.frame_mask[r, x]:
            raise FamilyError("frame not available", band=k, vertex=int(x))
        return self.frames[r, x]

    def frames_at(self, rows, x):
        """Columns = frames of the given rows at vertex x."""
        rows = list(rows)
        if rows and (self.frames is None or not self.frame_mask[rows, x].all()):
            raise FamilyError("frame not available", vertex=int(x), rows=rows)
        if not rows:
            return np.zeros((self.aux_dim, 0), dtype=complex)
        return self.frames[rows, x].T

    def transport_in(self, u, v, vecs):
        """Express vectors living at v in the auxiliary coordinates of u."""
        perm = self.aux_maps.get((u, v))
        if perm is None:
            return vecs
        out = np.zeros_like(vecs)
        ok = perm >= 0
        out[ok] = vecs[perm[ok]]
        return out

    def rows_between(self, x, lo, hi):
        """Rows with value strictly inside (lo, hi) at vertex x."""
        v = self.values[:, x]
        return np.flatnonzero((v > lo) & (v < hi))

    def multiplicity(self, x, k, tol=None):
        tol = self.degeneracy_tol if tol is None else tol
        v = self.values[:, x]
        return int(np.sum(np.abs(v - v[self.row(k)]) <= tol))

    def median_gap(self):
        if self.n_bands < 2:
            return math.inf
        gaps = np.diff(self.values, axis=0).ravel()
        gaps = gaps[gaps > self.degeneracy_tol]
        return float(np.median(gaps)) if gaps.size else math.inf

    def level_ok(self, level):
        """Levels must sit more than one median band gap inside the window."""
        g = self.median_gap()
        return self.window.lo + g < level < self.window.hi - g

    def check(self):
        """Raise FamilyError unless the structural invariants hold."""
        if self.n_bands > 1 and np.any(np.diff(self.values, axis=0) < -1e-12):
            r, x = np.argwhere(np.diff(self.values, axis=0) < -1e-12)[0]
            raise FamilyError("bands not sorted", band=int(self.offset + r), vertex=int(x))
        if self.frames is not None and self.n_bands:
            for x in range(self.mesh.n_vertices):
                rows = np.flatnonzero(self.frame_mask[:, x])
                if rows.size == 0:
                    continue
                f = self.frames[rows, x]
                gram = f.conj() @ f.T
                if np.max(np.abs(gram - np.eye(len(rows)))) > FRAME_TOL:
                    raise FamilyError("frames not orthonormal", vertex=int(x))
        return True

    def copy(self, **changes):
        out = replace(self, **changes)
        if "values" not in changes:
            out.values = self.values.copy()
        if self.frames is not None and "frames" not in changes:
            out.frames = self.frames.copy()
            out.frame_mask = self.frame_mask.copy()
        out.meta = dict(out.meta)
        return out


@dataclass
class MatrixFamilySample:
    mesh: ParamMesh
    matrices: np.ndarray
    window: SpectralWindow

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=complex)


# -- ingestion ------------------------------------------------------------

def _clusters(vals, tol):
    """Consecutive groups of sorted values closer than tol."""
    labels = np.zeros(len(vals), dtype=int)
    for i in range(1, len(vals)):
        labels[i] = labels[i - 1] + (vals[i] - vals[i - 1] > tol)
    return labels


def _match_edge(Uu, Uv, cu, cv):
    """Optimal overlap matching of eigenvectors across an edge.

    Returns (perm, best, runner_up) where runner_up is the best score of an
    assignment that differs at cluster level.
    """
    S = np.abs(Uu.conj().T @ Uv) ** 2
    rows, cols = linear_sum_assignment(-S)
    best = S[rows, cols].sum()
    runner_up = -np.inf
    for i, j in zip(rows, cols):
        forbidden = S.copy()
        forbidden[i, j] = -1e6
        r2, c2 = linear_sum_assignment(-forbidden)
        if all(cv[c2[a]] == cv[cols[a]] for a in range(len(rows))):
            continue
        runner_up = max(runner_up, forbidden[r2, c2].sum())
    return cols, best, runner_up


def ingest_matrix_family(sample, degeneracy_tol=DEGENERACY_TOL, frames="proximity",
                         check_loops=True):
    """Sorted eigenvalue bands of a sampled Hermitian family.

    Eigenvectors are matched across every mesh edge by maximal total
    overlap; ambiguous matchings and matchings that fail to close around a
    mesh triangle are errors.  ``frames='proximity'`` keeps eigenframes only
    where a neighbouring band is within 10·degeneracy_tol.
    """
    A = sample.matrices
    mesh = sample.mesh
    if A.shape[0] != mesh.n_vertices:
        raise FamilyError("one matrix per mesh vertex required")
    herm = A - np.conj(np.swapaxes(A, 1, 2))
    scale = np.maximum(np.linalg.norm(A, axis=(1, 2)), 1e-300)
    bad = np.linalg.norm(herm, axis=(1, 2)) > 1e-12 * scale
    if bad.any():
        raise NonHermitianError("matrix is not Hermitian", vertex=int(np.flatnonzero(bad)[0]))
    evals, evecs = np.linalg.eigh(A)
    evecs = phase_fix(evecs)
    n = A.shape[1]
    labels = [_clusters(evals[x], degeneracy_tol) for x in range(mesh.n_vertices)]

    perms = {}
    for u, v in mesh.edges.tolist():
        perm, best, runner = _match_edge(evecs[u], evecs[v], labels[u], labels[v])
        if best - runner <= 1e-6:
            raise MatchingAmbiguityError("ambiguous band matching", edge=[u, v],
                                         best=float(best), runner_up=float(runner))
        perms[(u, v)] = perm
        inv = np.empty_like(perm)
        inv[perm] = np.arange(n)
        perms[(v, u)] = inv
    if check_loops and mesh.dim >= 2:
        for a, b, c in mesh.simplices[2].tolist():
            comp = perms[(c, a)][perms[(b, c)][perms[(a, b)]]]
            if np.any(labels[a][comp] != labels[a]):
                raise LoopInconsistencyError("band matching does not close up",
                                             cycle=[a, b, c, a])

    values = evals.T.copy()
    frames_arr = np.transpose(evecs, (2, 0, 1)).copy()  # (band, vertex, aux)
    if frames == "all":
        mask = np.ones(values.shape, dtype=bool)
    else:
        radius = 10 * degeneracy_tol
        gaps = np.diff(values, axis=0)
        near = np.zeros(values.shape, dtype=bool)
        near[:-1] |= gaps < radius
        near[1:] |= gaps < radius
        mask = near
    frames_arr[~mask] = 0
    meta = {"edge_matching": {f"{u},{v}": p.tolist() for (u, v), p in perms.items() if u < v}}
    return EnhancedGraph(mesh, values, 0, sample.window, frames_arr, mask,
                         degeneracy_tol=degeneracy_tol, meta=meta)


# -- model families -------------------------------------------------------

def _window(window):
    if isinstance(window, SpectralWindow):
        return window
    return SpectralWindow(*window)


def constant_family(mesh, levels, window=None, offset=0):
    """Constant bands with frames on distinct basis vectors."""
    levels = np.sort(np.asarray(levels, dtype=float))
    nb = len(levels)
    window = _window(window) if window is not None else SpectralWindow(
        float(levels[0]) - 1.0, float(levels[-1]) + 1.0)
    values = np.repeat(levels[:, None], mesh.n_vertices, axis=1)
    frames = np.zeros((nb, mesh.n_vertices, nb), dtype=complex)
    for r in range(nb):
        frames[r, :, r] = 1.0
    return EnhancedGraph(mesh, values, offset, window, frames)


def ladder_family(mesh, window=(-3.5, 3.5), spacing=1.0, shift=0.0, multiplicity=1):
    """Constant ladder n·spacing + shift covering the window; band 0 is the
    smallest rung ≥ shift.  ``multiplicity`` > 1 repeats every rung."""
    w = _window(window)
    nmin = math.floor((w.lo - shift) / spacing) - 1
    nmax = math.ceil((w.hi - shift) / spacing) + 1
    rungs = np.arange(nmin, nmax + 1) * spacing + shift
    levels = np.repeat(rungs, multiplicity)
    return constant_family(mesh, levels, w, offset=nmin * multiplicity)


def empty_family(mesh):
    return EnhancedGraph(mesh, np.zeros((0, mesh.n_vertices)), 0,
                         SpectralWindow(-math.inf, math.inf),
                         np.zeros((0, mesh.n_vertices, 0), dtype=complex))


def _circle_angles(mesh):
    if "theta" in mesh.meta:
        return np.asarray(mesh.meta["theta"], dtype=float)
    p = mesh.positions
    return np.mod(np.arctan2(p[:, 1], p[:, 0]), 2 * np.pi)


def winding_family(mesh, w, window=(-3.5, 3.5)):
    """Bands n + w·θ/2π on a circle; crossing θ = 2π relabels n -> n + w.

    Eigenframes are the ladder basis vectors; the seam carries the matching
    shift of the auxiliary basis.
    """
    w = int(w)
    win = _window(window)
    if win.hi - win.lo < 3:
        raise FamilyError("window too narrow for three bands", window=[win.lo, win.hi])
    theta = _circle_angles(mesh)
    nmin = math.floor(win.lo) - abs(w) - 1
    nmax = math.ceil(win.hi) + abs(w) + 1
    ns = np.arange(nmin, nmax + 1)
    values = ns[:, None] + w * theta[None, :] / (2 * np.pi)
    nb = len(ns)
    frames = np.zeros((nb, mesh.n_vertices, nb), dtype=complex)
    for r in range(nb):
        frames[r, :, r] = 1.0
    transitions, aux_maps = {}, {}
    for u, v in mesh.edges.tolist():
        jump = theta[v] - theta[u]
        if abs(jump) <= np.pi:
            continue
        # forward across the seam from the larger angle to the smaller one
        s = w if jump < 0 else -w
        transitions[(u, v)] = s
        _set_aux_shift(aux_maps, u, v, s, nb)
    return EnhancedGraph(mesh, values, int(nmin), win, frames,
                         transitions=transitions, aux_maps=aux_maps,
                         meta={"model": "winding", "w": w})


def _set_aux_shift(aux_maps, u, v, s, dim, block=1):
    """Basis vector i at u is identified with i + s·block at v."""
    idx = np.arange(dim) + s * block
    perm = np.where((idx >= 0) & (idx < dim), idx, -1)
    aux_maps[(u, v)] = perm
    inv = np.full(dim, -1)
    ok = perm >= 0
    inv[perm[ok]] = np.arange(dim)[ok]
    aux_maps[(v, u)] = inv


def monopole_center(mesh):
    """Default marked point: antipode of the last coarse vertex on S³,
    otherwise the first vertex."""
    if mesh.meta.get("kind") == "s3":
        target = -np.asarray(mesh.meta["coarse_vertices"])[-1]
        return int(np.argmax(mesh.positions @ target))
    if mesh.meta.get("kind") == "torus":
        return int(np.argmin(np.linalg.norm(mesh.positions - 0.5, axis=1)))
    return 0


def _chart(mesh, center):
    """Geodesic polar coordinates (distance, unit direction in ℝ³) about a
    vertex, in an orientation-compatible frame."""
    p = mesh.positions[center]
    kind = mesh.meta.get("kind")
    x = mesh.positions
    if kind == "s3":
        basis = np.linalg.svd(np.eye(4) - np.outer(p, p))[0][:, :3]
        if np.linalg.det(np.column_stack([p, basis])) < 0:
            basis[:, 0] *= -1
        dist = np.arccos(np.clip(x @ p, -1.0, 1.0))
        tang = x @ basis
    elif kind == "torus":
        tang = (x - p + 0.5) % 1.0 - 0.5
        dist = np.linalg.norm(tang, axis=1)
    else:
        raise FamilyError("monopole family needs an S³ or T³ mesh", kind=kind)
    norm = np.linalg.norm(tang, axis=1)
    direction = np.zeros_like(tang)
    ok = norm > 1e-12
    direction[ok] = tang[ok] / norm[ok, None]
    direction[~ok] = (0.0, 0.0, 1.0)
    return dist, direction


def _pauli_eigvecs(nhat):
    """Eigenvectors (−1, +1) of n̂·σ for unit vectors n̂ (rows)."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    H = nhat[:, 0, None, None] * sx + nhat[:, 1, None, None] * sy + nhat[:, 2, None, None] * sz
    _, vecs = np.linalg.eigh(H)
    return phase_fix(vecs)


def monopole_family(mesh, k, ball_radius=1.0, window=(-3.5, 3.5), center=None,
                    collapse_radius=None):
    """Family with gerbe charge k: bands n ± a(x) with eigenlines of n̂_k(x)·σ.

    Here a = α/2π where α is the geodesic distance from the marked point
    (rescaled so α = π at ``collapse_radius`` and beyond), and n̂_k winds
    with degree k in the azimuth of the local chart.  Bands 0 and 1 are
    ∓a: they meet only at the marked point.  At α = π band 0 meets band −1.
    Band 2n has value n − a, band 2n + 1 has value n + a.
    """
    k = int(k)
    win = _window(window)
    center = monopole_center(mesh) if center is None else int(center)
    dist, direction = _chart(mesh, center)
    if collapse_radius is None:
        if mesh.meta.get("kind") != "s3":
            raise FamilyError("collapse_radius required off S³")
        alpha = dist
    else:
        alpha = np.pi * np.minimum(dist / collapse_radius, 1.0)
    a = alpha / (2 * np.pi)
    if k == 0:
        nhat = np.tile([0.0, 0.0, 1.0], (mesh.n_vertices, 1))
    else:
        th = np.arccos(np.clip(direction[:, 2], -1.0, 1.0))
        ph = _MONOPOLE_HANDEDNESS * k * np.arctan2(direction[:, 1], direction[:, 0])
        nhat = np.column_stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
    vecs = _pauli_eigvecs(nhat)  # (nv, 2, 2): columns -1, +1
    nmin = math.floor(win.lo) - 1
    nmax = math.ceil(win.hi) + 1
    nblocks = nmax - nmin + 1
    nb, dim = 2 * nblocks, 2 * nblocks
    values = np.zeros((nb, mesh.n_vertices))
    frames = np.zeros((nb, mesh.n_vertices, dim), dtype=complex)
    for b, n in enumerate(range(nmin, nmax + 1)):
        values[2 * b] = n - a
        values[2 * b + 1] = n + a
        frames[2 * b, :, 2 * b:2 * b + 2] = vecs[:, :, 0]
        frames[2 * b + 1, :, 2 * b:2 * b + 2] = vecs[:, :, 1]
    meta = {"model": "monopole", "k": k, "center": center, "ball_radius": float(ball_radius),
            "collapse_radius": None if collapse_radius is None else float(collapse_radius)}
    return EnhancedGraph(mesh, values, 2 * nmin, win, frames, meta=meta)


# -- arithmetic -----------------------------------------------------------

def _negative_rows(g):
    return int(min(max(-g.offset, 0), g.n_bands))


def direct_sum(a, b):
    """Direct sum on the orthogonal sum of auxiliary spaces.

    Bands are merged and re-sorted per vertex (ties keep a's bands first);
    the band count below index 0 is the sum of both counts.
    """
    if a.mesh is not b.mesh and not (
        a.mesh.n_vertices == b.mesh.n_vertices
        and np.array_equal(a.mesh.tops, b.mesh.tops)
    ):
        raise FamilyError("direct sum needs a common mesh")
    if b.n_bands == 0:
        return a.copy()
    if a.n_bands == 0:
        return b.copy()
    nv = a.mesh.n_vertices
    vals = np.vstack([a.values, b.values])
    order = np.argsort(vals, axis=0, kind="stable")
    values = np.take_along_axis(vals, order, axis=0)
    da, db = a.aux_dim, b.aux_dim
    frames = None
    mask = None
    if a.frames is not None and b.frames is not None:
        fa = np.concatenate([a.frames, np.zeros((a.n_bands, nv, db), complex)], axis=2)
        fb = np.concatenate([np.zeros((b.n_bands, nv, da), complex), b.frames], axis=2)
        allf = np.concatenate([fa, fb], axis=0)
        allm = np.concatenate([a.frame_mask, b.frame_mask], axis=0)
        cols = np.arange(nv)
        frames = allf[order, cols[None, :]]
        mask = allm[order, cols[None, :]]
    transitions = {}
    for e in set(a.transitions) | set(b.transitions):
        s = a.transitions.get(e, 0) + b.transitions.get(e, 0)
        if s:
            transitions[e] = s
    aux_maps = {}
    for e in set(a.aux_maps) | set(b.aux_maps):
        pa = a.aux_maps.get(e, np.arange(da))
        pb = b.aux_maps.get(e, np.arange(db))
        aux_maps[e] = np.concatenate([pa, np.where(pb >= 0, pb + da, -1)])
    offset = -(_negative_rows(a) + _negative_rows(b))
    return EnhancedGraph(a.mesh, values, offset, a.window.intersect(b.window), frames, mask,
                         transitions, aux_maps, min(a.degeneracy_tol, b.degeneracy_tol),
                         meta={"model": "sum", "parts": [a.meta, b.meta]})


def negate(a):
    """Reverse the spectrum: band j of the result is −(band −j of a)."""
    values = -a.values[::-1].copy()
    frames = None if a.frames is None else a.frames[::-1].copy()
    mask = None if a.frame_mask is None else a.frame_mask[::-1].copy()
    offset = -(a.offset + a.n_bands - 1) if a.n_bands else 0
    return EnhancedGraph(a.mesh, values, offset, a.window.reflect(), frames, mask,
                         {e: -s for e, s in a.transitions.items()},
                         {e: p.copy() for e, p in a.aux_maps.items()},
                         a.degeneracy_tol, meta={"model": "negate", "part": a.meta})


def pullback(a, mesh, vertex_map):
    """Compose a family with a simplicial map ``mesh -> a.mesh``."""
    f = np.asarray(vertex_map, dtype=np.int64)
    if len(f) != mesh.n_vertices:
        raise FamilyError("vertex map has wrong length")
    if not mesh.simplicial_image_ok(a.mesh, f):
        raise FamilyError("map is not simplicial")
    values = a.values[:, f]
    frames = None if a.frames is None else a.frames[:, f]
    mask = None if a.frame_mask is None else a.frame_mask[:, f]
    transitions, aux_maps = {}, {}
    for u, v in mesh.edges.tolist():
        fu, fv = int(f[u]), int(f[v])
        if fu == fv:
            continue
        s = a.shift(fu, fv)
        if s:
            transitions[(u, v)] = s
        if (fu, fv) in a.aux_maps:
            aux_maps[(u, v)] = a.aux_maps[(fu, fv)]
            aux_maps[(v, u)] = a.aux_maps[(fv, fu)]
    return EnhancedGraph(mesh, values, a.offset, a.window, frames, mask, transitions,
                         aux_maps, a.degeneracy_tol,
                         meta={"model": "pullback", "part": a.meta})


def circle_cover_map(n_target, degree):
    """Vertex map of the degree-d self-map of a circle: the source circle
    has d·n_target vertices and wraps d times."""
    return np.arange(degree * n_target) % n_target
