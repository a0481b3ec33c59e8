"""Spectral-gap covers, their nerves, and Čech cochains on nerves."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CocycleError, CoverError, GapViolationError
from .mesh import permutation_sign

__all__ = [
    "GAP_MARGIN",
    "SpectralCover",
    "CechCochain",
    "valid_level_intervals",
    "choose_level",
    "build_cover",
    "build_nerve",
    "star_cover_sets",
    "validate_cover",
    "pushforward_fundamental",
    "nerve_loop",
    "coboundary",
]

GAP_MARGIN = 1e-6


@dataclass
class SpectralCover:
    sets: list
    levels: np.ndarray
    assignment: np.ndarray
    nerve: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    gap_margin: float = GAP_MARGIN
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.sets = [np.unique(np.asarray(s, dtype=np.int64)) for s in self.sets]
        self.levels = np.asarray(self.levels, dtype=float)
        self.assignment = np.asarray(self.assignment, dtype=np.int64)

    def __len__(self):
        return len(self.sets)

    def intersection(self, simplex):
        out = self.sets[simplex[0]]
        for i in simplex[1:]:
            out = np.intersect1d(out, self.sets[i], assume_unique=True)
        return out

    def witness(self, simplex):
        return self.witnesses[tuple(simplex)][0]

    def f_vector(self):
        return tuple(len(self.nerve.get(d, ())) for d in range(max(self.nerve) + 1))


# -- cochains ---------------------------------------------------------------

@dataclass
class CechCochain:
    degree: int
    kind: str  # 'integer' | 'phase' | 'real'
    values: dict = field(default_factory=dict)

    def __call__(self, simplex):
        """Value on an oriented simplex given in any vertex order."""
        key = tuple(sorted(simplex))
        sign = permutation_sign(simplex)
        if key not in self.values:
            return 1.0 + 0j if self.kind == "phase" else 0
        val = self.values[key]
        if self.kind == "phase":
            return val if sign > 0 else np.conj(val)
        return sign * val

    def pair(self, chain):
        if self.kind == "phase":
            raise CocycleError("cannot pair a phase cochain with a chain")
        return sum(self(s) * c for s, c in chain.items())

    def __add__(self, other):
        keys = set(self.values) | set(other.values)
        if self.kind == "phase":
            return CechCochain(self.degree, "phase", {k: self(k) * other(k) for k in keys})
        return CechCochain(self.degree, self.kind, {k: self(k) + other(k) for k in keys})


def coboundary(c, nerve):
    """δc on the nerve simplices of degree c.degree + 1."""
    out = {}
    for s in nerve.get(c.degree + 1, ()):
        if c.kind == "phase":
            val = 1.0 + 0j
            for i in range(len(s)):
                f = c(s[:i] + s[i + 1:])
                val *= f if i % 2 == 0 else np.conj(f)
        else:
            val = sum((-1) ** i * c(s[:i] + s[i + 1:]) for i in range(len(s)))
        out[tuple(s)] = val
    return CechCochain(c.degree + 1, c.kind, out)


# -- levels -------------------------------------------------------------------

def band_spans(family, vertices):
    """Value ranges swept by the bands over the subcomplex on ``vertices``,
    interpolating linearly along edges (with band relabelling)."""
    vs = np.asarray(sorted(set(int(v) for v in vertices)), dtype=np.int64)
    vals = family.values
    nb = family.n_bands
    pieces = [np.column_stack([vals[:, vs].ravel(), vals[:, vs].ravel()])]
    mask = np.zeros(family.mesh.n_vertices, dtype=bool)
    mask[vs] = True
    edges = family.mesh.edges
    edges = edges[mask[edges].all(axis=1)]
    plain = np.ones(len(edges), dtype=bool)
    for n, (u, v) in enumerate(edges.tolist()):
        s = family.shift(u, v)
        if s:
            plain[n] = False
            r = np.arange(max(0, -s), min(nb, nb - s))
            a, b = vals[r, u], vals[r + s, v]
            pieces.append(np.column_stack([np.minimum(a, b), np.maximum(a, b)]))
    e = edges[plain]
    if len(e):
        a, b = vals[:, e[:, 0]].ravel(), vals[:, e[:, 1]].ravel()
        pieces.append(np.column_stack([np.minimum(a, b), np.maximum(a, b)]))
    return np.vstack(pieces) if nb else np.zeros((0, 2))


def valid_level_intervals(family, vertices, gap_margin=GAP_MARGIN):
    """Open intervals of admissible levels over a vertex set: away from every
    band value by more than gap_margin and more than one median band gap
    inside the window."""
    g = family.median_gap()
    lo, hi = family.window.lo + g, family.window.hi - g
    if not lo < hi:
        return []
    spans = band_spans(family, vertices)
    if spans.size == 0:
        return [(lo, hi)]
    spans = spans + np.array([-gap_margin, gap_margin])
    spans = spans[np.argsort(spans[:, 0])]
    merged = []
    for a, b in spans.tolist():
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    out, cur = [], lo
    for a, b in merged:
        if a > cur:
            out.append((cur, min(a, hi)))
        cur = max(cur, b)
        if cur >= hi:
            break
    if cur < hi:
        out.append((cur, hi))
    return [(a, b) for a, b in out if b > a]


def choose_level(intervals):
    """Midpoint of the widest interval; ties go to the midpoint nearest 0,
    then the lower one."""
    if not intervals:
        return None
    def key(iv):
        mid = 0.5 * (iv[0] + iv[1])
        return (-round(iv[1] - iv[0], 9), round(abs(mid), 9), mid)
    a, b = min(intervals, key=key)
    return 0.5 * (a + b)


def _check_level(family, vertices, level, gap_margin):
    vals = family.values[:, list(vertices)]
    close = np.abs(vals - level) <= gap_margin
    if close.any():
        r, x = np.argwhere(close)[0]
        raise GapViolationError("band within gap margin of level", level=float(level),
                                band=int(family.offset + r),
                                vertex=int(np.asarray(list(vertices))[x]))
    spans = band_spans(family, vertices)
    if np.any((spans[:, 0] - gap_margin <= level) & (level <= spans[:, 1] + gap_margin)):
        raise GapViolationError("a band crosses the level inside the set", level=float(level))
    if not family.level_ok(level):
        raise GapViolationError("level too close to the spectral window edge",
                                level=float(level))


# -- cover construction ---------------------------------------------------------

def _thicken(mesh, vertices):
    adj = mesh.neighbors()
    out = set(vertices)
    for v in vertices:
        out.update(adj[v])
    return out


def _auto_sets(family, gap_margin, max_core):
    mesh = family.mesh
    nv = mesh.n_vertices
    adj = mesh.neighbors()
    min_width = 0.25 * min(family.median_gap(), 1e300)
    if max_core is None:
        max_core = max(1, nv // 4)

    def width(vs):
        ivs = valid_level_intervals(family, vs, gap_margin)
        return max((b - a for a, b in ivs), default=0.0)

    uncovered = set(range(nv))
    cores = []
    while uncovered:
        seed = min(uncovered)
        core = [seed]
        if width(_thicken(mesh, core)) <= 0:
            raise CoverError("no valid level near vertex", vertex=seed)
        frontier = [w for w in adj[seed] if w in uncovered]
        members = {seed}
        while frontier and len(core) < max_core:
            cand = frontier.pop(0)
            if cand in members:
                continue
            if width(_thicken(mesh, core + [cand])) < min_width:
                continue
            core.append(cand)
            members.add(cand)
            frontier.extend(w for w in adj[cand] if w in uncovered and w not in members)
        uncovered -= members
        cores.append(sorted(core))
    return [sorted(_thicken(mesh, c)) for c in cores]


def star_cover_sets(mesh, tau=0.3):
    """Vertex sets U_a = {x : w_a(x) ≥ τ·max_b w_b(x)} from the coarse
    barycentric weights of a refined mesh; the nerve is the coarse complex."""
    w = mesh.meta.get("coarse_weights")
    if w is None:
        raise CoverError("mesh carries no coarse barycentric weights")
    w = np.asarray(w)
    top = w.max(axis=1, keepdims=True)
    return [np.flatnonzero(w[:, a] >= tau * top[:, 0] - 1e-12) for a in range(w.shape[1])]


def _assignment(mesh, sets):
    nv = mesh.n_vertices
    members = np.zeros((len(sets), nv), dtype=bool)
    depth = np.zeros((len(sets), nv))
    for i, s in enumerate(sets):
        members[i, s] = True
        outside = np.flatnonzero(~members[i])
        depth[i] = mesh.hop_distance(outside) if outside.size else np.inf
    assign = np.full(nv, -1, dtype=np.int64)
    for x in range(nv):
        star = list(mesh.closed_star(x))
        cands = [i for i in range(len(sets)) if members[i, star].all()]
        if not cands:
            raise CoverError("no cover set contains the closed star of a vertex", vertex=x)
        assign[x] = max(cands, key=lambda i: (depth[i, x], -i))
    return assign


def build_nerve(cover, mesh, max_dim=3):
    """Nerve simplices: index sets whose intersection contains a full top
    simplex of the mesh.  Records witness vertices (lowest index per
    connected component of the intersection)."""
    nv = mesh.n_vertices
    members = np.zeros((len(cover.sets), nv), dtype=bool)
    for i, s in enumerate(cover.sets):
        members[i, s] = True
    nerve = {d: set() for d in range(max_dim + 1)}
    tops = mesh.tops
    containing = members[:, tops].all(axis=2)  # (nsets, ntops)
    for t in range(len(tops)):
        idx = tuple(np.flatnonzero(containing[:, t]).tolist())
        for d in range(min(max_dim, len(idx) - 1) + 1):
            nerve[d].update(itertools.combinations(idx, d + 1))
    nerve = {d: sorted(s) for d, s in nerve.items() if s}
    witnesses = {}
    for d, simplices in nerve.items():
        for s in simplices:
            inter = cover.intersection(s)
            comps = mesh.components(inter)
            witnesses[s] = [c[0] for c in comps]
    cover.nerve = nerve
    cover.witnesses = witnesses
    return nerve


def build_cover(family, sets=None, levels=None, gap_margin=GAP_MARGIN, max_core=None,
                check_contractible=True):
    """Spectral-gap cover of the family's mesh.

    With ``sets=None`` the cover is grown automatically: greedy cores seeded
    at the lowest uncovered vertex, grown while a common gap persists, then
    thickened by one ring so neighbours share full simplices.  Missing
    levels are the widest-gap midpoints; given levels are validated only.
    """
    mesh = family.mesh
    if sets is None:
        sets = _auto_sets(family, gap_margin, max_core)
    sets = [np.unique(np.asarray(s, dtype=np.int64)) for s in sets]
    covered = np.zeros(mesh.n_vertices, dtype=bool)
    for s in sets:
        covered[s] = True
    if not covered.all():
        raise CoverError("cover does not span the mesh",
                         vertex=int(np.flatnonzero(~covered)[0]))
    notes = []
    for i, s in enumerate(sets):
        if len(mesh.components(s)) != 1:
            raise CoverError("cover set is disconnected", set=i)
        if check_contractible:
            verdict = mesh.is_collapsible(s)
            if verdict is False:
                raise CoverError("cover set is not contractible", set=i,
                                 euler=mesh.euler_characteristic(s))
            if verdict is None:
                msg = f"contractibility of set {i} inconclusive"
                warnings.warn(msg)
                notes.append(msg)
    if levels is None:
        levels = []
        for i, s in enumerate(sets):
            lv = choose_level(valid_level_intervals(family, s, gap_margin))
            if lv is None:
                raise CoverError("no valid level for cover set", set=i)
            levels.append(lv)
    levels = np.asarray(levels, dtype=float)
    for i, s in enumerate(sets):
        try:
            _check_level(family, s, levels[i], gap_margin)
        except GapViolationError as err:
            err.details["set"] = i
            raise
    assign = _assignment(mesh, sets)
    cover = SpectralCover(sets, levels, assign, gap_margin=gap_margin, notes=notes)
    build_nerve(cover, mesh)
    return cover


def validate_cover(cover, family):
    """List of invariant violations (empty when the cover is valid)."""
    mesh = family.mesh
    out = []
    covered = np.zeros(mesh.n_vertices, dtype=bool)
    for i, s in enumerate(cover.sets):
        covered[s] = True
        if len(mesh.components(s)) != 1:
            out.append({"violation": "disconnected set", "set": i})
        try:
            _check_level(family, s, cover.levels[i], cover.gap_margin)
        except GapViolationError as err:
            out.append({"violation": str(err), "set": i, **err.details})
    if not covered.all():
        out.append({"violation": "cover does not span mesh",
                    "vertex": int(np.flatnonzero(~covered)[0])})
    for x, i in enumerate(cover.assignment.tolist()):
        if x not in set(cover.sets[i].tolist()):
            out.append({"violation": "assignment outside its set", "vertex": x, "set": i})
    fresh = SpectralCover(cover.sets, cover.levels, cover.assignment)
    build_nerve(fresh, mesh, max_dim=max(cover.nerve) if cover.nerve else 3)
    if {d: list(map(tuple, s)) for d, s in fresh.nerve.items()} != \
            {d: list(map(tuple, s)) for d, s in cover.nerve.items()}:
        out.append({"violation": "nerve does not match the sets"})
    return out


def pushforward_fundamental(cover, mesh):
    """Image of the mesh fundamental cycle under the assignment map, as an
    integer chain on the nerve; degenerate images are dropped."""
    chain = {}
    A = cover.assignment
    top = mesh.dim
    allowed = set(map(tuple, cover.nerve.get(top, ())))
    for simplex, sign in zip(mesh.tops.tolist(), mesh.fundamental_cycle.tolist()):
        img = [int(A[v]) for v in simplex]
        if len(set(img)) < len(img):
            continue
        key = tuple(sorted(img))
        if key not in allowed:
            raise CoverError("assignment image is not a nerve simplex", simplex=simplex)
        chain[key] = chain.get(key, 0) + sign * permutation_sign(img)
    chain = {k: v for k, v in chain.items() if v}
    if mesh.chain_boundary(chain, top):
        raise CoverError("pushforward is not a cycle")
    return chain


def nerve_loop(cover, mesh_loop):
    """Nerve vertex cycle traced by a closed mesh vertex loop."""
    seq = [int(cover.assignment[v]) for v in mesh_loop]
    out = []
    for i in seq:
        if not out or out[-1] != i:
            out.append(i)
    while len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out
