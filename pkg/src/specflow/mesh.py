"""Oriented simplicial meshes modelling closed parameter manifolds.

Simplices are stored as sorted vertex tuples; orientation of the top
simplices lives in ``fundamental_cycle`` (one sign per top simplex, relative
to the sorted vertex order).
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError

__all__ = [
    "ParamMesh",
    "BallRegion",
    "circle_mesh",
    "sphere2_mesh",
    "s3_mesh",
    "torus3_mesh",
    "permutation_sign",
]


def permutation_sign(seq):
    """Sign of the permutation sorting ``seq`` (entries distinct)."""
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@dataclass
class ParamMesh:
    positions: np.ndarray
    simplices: dict
    fundamental_cycle: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.simplices = {
            int(d): np.asarray(s, dtype=np.int64).reshape(-1, int(d) + 1)
            for d, s in self.simplices.items()
        }
        if self.fundamental_cycle is not None:
            self.fundamental_cycle = np.asarray(self.fundamental_cycle, dtype=np.int64)
        self._index = {}
        self._adj = None

    @classmethod
    def from_top_simplices(cls, positions, tops, orientation=None, meta=None):
        """Build the full face lattice from top-dimensional simplices.

        ``tops`` may be given in any vertex order; if ``orientation`` is None
        the given vertex order defines the orientation.
        """
        tops = [tuple(int(v) for v in t) for t in tops]
        dim = len(tops[0]) - 1
        signs = []
        sorted_tops = []
        for n, t in enumerate(tops):
            s = permutation_sign(t)
            if orientation is not None:
                s = int(orientation[n]) * s
            sorted_tops.append(tuple(sorted(t)))
            signs.append(s)
        faces = {dim: sorted(set(sorted_tops))}
        if len(faces[dim]) != len(sorted_tops):
            raise MeshError("duplicate top simplex")
        order = {t: i for i, t in enumerate(faces[dim])}
        cycle = np.zeros(len(faces[dim]), dtype=np.int64)
        for t, s in zip(sorted_tops, signs):
            cycle[order[t]] = s
        for d in range(dim - 1, -1, -1):
            fs = set()
            for s in faces[d + 1]:
                for f in itertools.combinations(s, d + 1):
                    fs.add(f)
            faces[d] = sorted(fs)
        return cls(positions, faces, cycle, dict(meta or {}))

    # -- basic queries -------------------------------------------------
    @property
    def dim(self):
        return max(self.simplices)

    @property
    def n_vertices(self):
        return len(self.positions)

    @property
    def edges(self):
        return self.simplices.get(1, np.zeros((0, 2), dtype=np.int64))

    @property
    def tops(self):
        return self.simplices[self.dim]

    def index(self, simplex):
        """Row index of a sorted simplex tuple, or None."""
        d = len(simplex) - 1
        if d not in self._index:
            self._index[d] = {tuple(s): i for i, s in enumerate(self.simplices[d].tolist())}
        return self._index[d].get(tuple(simplex))

    def neighbors(self):
        if self._adj is None:
            adj = [[] for _ in range(self.n_vertices)]
            for u, v in self.edges.tolist():
                adj[u].append(v)
                adj[v].append(u)
            self._adj = [sorted(a) for a in adj]
        return self._adj

    def closed_star(self, v):
        """Vertices of all simplices containing ``v``."""
        return {v, *self.neighbors()[v]}

    def subcomplex(self, vertices):
        """Simplices (by dimension) all of whose vertices lie in ``vertices``."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[list(vertices)] = True
        return {d: s[mask[s].all(axis=1)] for d, s in self.simplices.items()}

    def euler_characteristic(self, vertices=None):
        sub = self.simplices if vertices is None else self.subcomplex(vertices)
        return int(sum((-1) ** d * len(s) for d, s in sub.items()))

    def components(self, vertices):
        """Connected components of the 1-skeleton induced on ``vertices``."""
        vs = set(int(v) for v in vertices)
        adj = self.neighbors()
        seen, comps = set(), []
        for start in sorted(vs):
            if start in seen:
                continue
            comp, queue = [], deque([start])
            seen.add(start)
            while queue:
                u = queue.popleft()
                comp.append(u)
                for w in adj[u]:
                    if w in vs and w not in seen:
                        seen.add(w)
                        queue.append(w)
            comps.append(sorted(comp))
        return comps

    def bfs_tree(self, vertices, root=None):
        """Breadth-first spanning tree of the induced 1-skeleton.

        Returns (order, parent) with ``parent[root] == -1``; only the
        component of ``root`` is visited.
        """
        vs = set(int(v) for v in vertices)
        if root is None:
            root = min(vs)
        adj = self.neighbors()
        parent = {root: -1}
        order = [root]
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if w in vs and w not in parent:
                    parent[w] = u
                    order.append(w)
                    queue.append(w)
        return order, parent

    def hop_distance(self, sources, within=None):
        """Graph distance from a vertex set (inf where unreachable)."""
        dist = np.full(self.n_vertices, np.inf)
        allowed = None if within is None else set(within)
        queue = deque()
        for s in sources:
            dist[s] = 0
            queue.append(s)
        adj = self.neighbors()
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if dist[w] == np.inf and (allowed is None or w in allowed):
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return dist

    # -- chains --------------------------------------------------------
    def chain_boundary(self, chain, dim):
        """Boundary of an integer chain given as {sorted simplex: coeff}."""
        out = {}
        for s, c in chain.items():
            if c == 0:
                continue
            for i in range(dim + 1):
                f = s[:i] + s[i + 1:]
                out[f] = out.get(f, 0) + (-1) ** i * c
        return {f: c for f, c in out.items() if c != 0}

    def fundamental_chain(self):
        if self.fundamental_cycle is None:
            raise MeshError("mesh has no fundamental cycle")
        return {tuple(s): int(c) for s, c in zip(self.tops.tolist(), self.fundamental_cycle)}

    def boundary_surface(self, vertices):
        """Oriented codimension-one boundary of the region spanned by the
        top simplices inside ``vertices`` (dict simplex -> ±1)."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[list(vertices)] = True
        inside = mask[self.tops].all(axis=1)
        chain = {tuple(s): int(c) for s, c, ok in
                 zip(self.tops.tolist(), self.fundamental_cycle, inside) if ok}
        return self.chain_boundary(chain, self.dim)

    def validate(self):
        """Raise MeshError unless every structural invariant holds."""
        for d in range(1, self.dim + 1):
            lower = {tuple(s) for s in self.simplices[d - 1].tolist()}
            for s in self.simplices[d].tolist():
                for f in itertools.combinations(s, d):
                    if f not in lower:
                        raise MeshError("missing face", simplex=list(s), face=list(f))
        if len(self.components(range(self.n_vertices))) != 1:
            raise MeshError("1-skeleton is not connected")
        if self.fundamental_cycle is not None:
            bd = self.chain_boundary(self.fundamental_chain(), self.dim)
            if bd:
                raise MeshError("fundamental cycle has nonzero boundary",
                                witness=list(next(iter(bd))))
        return True

    def is_collapsible(self, vertices):
        """Try to collapse the induced subcomplex to a point by free-face
        removals.  Returns True (collapsed), False (Euler characteristic
        rules contractibility out) or None (stuck; inconclusive)."""
        sub = self.subcomplex(vertices)
        if self.euler_characteristic(vertices) != 1:
            return False
        cells = set()
        for d, s in sub.items():
            cells.update(tuple(x) for x in s.tolist())
        cofaces = {c: set() for c in cells}
        for c in cells:
            if len(c) > 1:
                for f in itertools.combinations(c, len(c) - 1):
                    cofaces[f].add(c)
        changed = True
        while changed and len(cells) > 1:
            changed = False
            for f in sorted(cells, key=len, reverse=True):
                if f in cells and len(cofaces[f]) == 1:
                    (top,) = cofaces[f]
                    for c in (top, f):
                        cells.discard(c)
                        if len(c) > 1:
                            for g in itertools.combinations(c, len(c) - 1):
                                cofaces[g].discard(c)
                    changed = True
        return True if len(cells) == 1 else None

    def simplicial_image_ok(self, target, vertex_map):
        """True iff ``vertex_map`` sends every simplex onto a simplex of
        ``target`` (degenerate images allowed)."""
        vm = np.asarray(vertex_map)
        for d, s in self.simplices.items():
            for img in vm[s].tolist():
                face = tuple(sorted(set(img)))
                if target.index(face) is None:
                    return False
        return True


@dataclass
class BallRegion:
    """A ball B (vertex set) with an inner shrinking B' and boundary sphere."""

    mesh: ParamMesh
    vertices: np.ndarray
    inner: np.ndarray

    def __post_init__(self):
        self.vertices = np.unique(np.asarray(self.vertices, dtype=np.int64))
        self.inner = np.unique(np.asarray(self.inner, dtype=np.int64))

    @classmethod
    def geodesic(cls, mesh, center, radius, inner_radius):
        r = geodesic_distance(mesh, center)
        return cls(mesh, np.flatnonzero(r <= radius), np.flatnonzero(r <= inner_radius))

    def boundary(self, inner=False):
        return self.mesh.boundary_surface(self.inner if inner else self.vertices)

    def check(self):
        """Necessary conditions for ballness: B' ⊆ B, both boundaries are
        closed surfaces with Euler characteristic 2 (for dim 3)."""
        problems = []
        if not set(self.inner.tolist()) <= set(self.vertices.tolist()):
            problems.append("inner region not contained in ball")
        for name, inner in (("B", False), ("B'", True)):
            surf = self.boundary(inner)
            if not surf:
                problems.append(f"{name} has empty boundary")
                continue
            if self.mesh.chain_boundary(surf, self.mesh.dim - 1):
                problems.append(f"boundary of {name} is not closed")
            if self.mesh.dim == 3:
                tris = list(surf)
                verts = {v for t in tris for v in t}
                edges = {e for t in tris for e in itertools.combinations(t, 2)}
                if len(verts) - len(edges) + len(tris) != 2:
                    problems.append(f"boundary of {name} is not a 2-sphere")
        return problems

    def mask(self, inner=False):
        m = np.zeros(self.mesh.n_vertices, dtype=bool)
        m[self.inner if inner else self.vertices] = True
        return m


def geodesic_distance(mesh, center):
    """Distance from a point in the mesh's model geometry."""
    kind = mesh.meta.get("kind")
    p = np.asarray(center, dtype=float)
    x = mesh.positions
    if kind in ("sphere", "s3", "s2"):
        return np.arccos(np.clip(x @ p, -1.0, 1.0))
    if kind == "torus":
        d = (x - p + 0.5) % 1.0 - 0.5
        return np.linalg.norm(d, axis=1)
    return np.linalg.norm(x - p, axis=1)


# -- generators ------------------------------------------------------------

def circle_mesh(n):
    """Triangulated circle with vertices at angles 2πi/n, oriented by
    increasing angle."""
    if n < 3:
        raise MeshError("circle needs at least 3 vertices")
    theta = 2 * np.pi * np.arange(n) / n
    pos = np.column_stack([np.cos(theta), np.sin(theta)])
    tops = [(i, (i + 1) % n) for i in range(n)]
    mesh = ParamMesh.from_top_simplices(pos, tops, meta={"kind": "circle"})
    mesh.meta["theta"] = theta.tolist()
    return mesh


def _kuhn_order_simplices(dim, m):
    """Kuhn simplices filling {m >= x1 >= ... >= x_dim >= 0} as lists of
    count vectors t (length dim+1, summing to m)."""
    def inside(x):
        return all(m >= a >= b >= 0 for a, b in zip((m,) + x, x + (0,)))

    out = []
    for y in itertools.product(range(m), repeat=dim):
        for perm in itertools.permutations(range(dim)):
            pts = [tuple(y)]
            cur = list(y)
            for p in perm:
                cur[p] += 1
                pts.append(tuple(cur))
            if all(inside(q) for q in pts):
                simplex = []
                for x in pts:
                    xx = (m,) + x + (0,)
                    simplex.append(tuple(xx[i] - xx[i + 1] for i in range(dim + 1)))
                out.append(simplex)
    return out


def edgewise_subdivision(coarse_tops, m):
    """Edgewise subdivision of a pure simplicial complex.

    Returns (points, tops) where each point is a tuple of (coarse vertex,
    count) pairs and tops index into points.
    """
    coarse_tops = [tuple(sorted(t)) for t in coarse_tops]
    dim = len(coarse_tops[0]) - 1
    local = _kuhn_order_simplices(dim, m)
    key_index, points, tops = {}, [], []
    for ct in coarse_tops:
        for simplex in local:
            ids = []
            for t in simplex:
                key = tuple((cv, c) for cv, c in zip(ct, t) if c)
                if key not in key_index:
                    key_index[key] = len(points)
                    points.append(key)
                ids.append(key_index[key])
            tops.append(ids)
    return points, tops


def _coarse_weights(points, n_coarse, m):
    w = np.zeros((len(points), n_coarse))
    for i, key in enumerate(points):
        for cv, c in key:
            w[i, cv] = c / m
    return w


def _orient_by_det(pos, tops):
    signs = []
    for t in tops:
        p = pos[list(t)]
        if p.shape[1] == len(t):
            s = np.sign(np.linalg.det(p))
        else:
            s = np.sign(np.linalg.det((p[1:] - p[0])))
        if s == 0:
            raise MeshError("degenerate simplex", simplex=list(t))
        signs.append(int(s))
    return signs


def _simplex_frame(n):
    """Vertices of a regular n-simplex on the unit sphere S^{n-1}."""
    e = np.eye(n + 1) - 1.0 / (n + 1)
    u, _, _ = np.linalg.svd(e)
    v = e @ u[:, :n]
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _refined_sphere(n, m, kind, gamma):
    coarse = list(itertools.combinations(range(n + 2), n + 1))
    points, tops = edgewise_subdivision(coarse, m)
    w = _coarse_weights(points, n + 2, m)
    verts = _simplex_frame(n + 1)
    # w**gamma pulls points towards facet centres, which radial projection
    # would otherwise stretch the most
    pos = w ** gamma
    pos = (pos / pos.sum(axis=1, keepdims=True)) @ verts
    pos /= np.linalg.norm(pos, axis=1, keepdims=True)
    signs = _orient_by_det(pos, tops)
    mesh = ParamMesh.from_top_simplices(
        pos, tops, orientation=signs,
        meta={"kind": kind, "coarse_tops": [list(c) for c in coarse],
              "coarse_vertices": verts.tolist(), "refinement": m, "gamma": gamma})
    mesh.meta["coarse_weights"] = w
    return mesh


def sphere2_mesh(m=6, gamma=0.7):
    """Edgewise-refined boundary of the tetrahedron, projected to S²."""
    return _refined_sphere(2, m, "s2", gamma)


def s3_mesh(m=12, gamma=0.7):
    """Edgewise-refined boundary of the 4-simplex, projected to S³ ⊂ ℝ⁴.

    Each of the five coarse tetrahedra is cut into m³ pieces.  Barycentric
    weights are raised to ``gamma`` before projecting, which evens out edge
    lengths (gamma = 1 is plain radial projection).
    """
    return _refined_sphere(3, m, "s3", gamma)


def torus3_mesh(n_coarse=3, m=2):
    """Kuhn triangulation of the periodic grid (n_coarse·m)³ on T³ = ℝ³/ℤ³.

    The fine grid subdivides the coarse Kuhn triangulation; coarse
    barycentric weights are stored for star covers.
    """
    if n_coarse < 3:
        raise MeshError("periodic Kuhn grid needs at least 3 cells per axis")
    n = n_coarse * m
    idx = lambda i, j, k: ((i % n) * n + (j % n)) * n + (k % n)
    grid = np.array(list(itertools.product(range(n), repeat=3)))
    pos = grid / n
    tops, signs = [], []
    for base in grid.tolist():
        for perm in itertools.permutations(range(3)):
            cur = list(base)
            verts = [idx(*cur)]
            for p in perm:
                cur[p] += 1
                verts.append(idx(*cur))
            tops.append(verts)
            signs.append(permutation_sign(perm))
    mesh = ParamMesh.from_top_simplices(pos, tops, orientation=signs,
                                        meta={"kind": "torus", "n": n,
                                              "n_coarse": n_coarse, "refinement": m})
    # coarse barycentric weights: Kuhn simplex of the coarse cube
    cidx = lambda c: ((c[0] % n_coarse) * n_coarse + (c[1] % n_coarse)) * n_coarse + (c[2] % n_coarse)
    w = np.zeros((len(grid), n_coarse ** 3))
    for vi, g in enumerate(grid.tolist()):
        c = [x // m for x in g]
        f = [(x % m) / m for x in g]
        order = sorted(range(3), key=lambda a: -f[a])
        cur = list(c)
        fs = [1.0] + [f[a] for a in order] + [0.0]
        w[vi, cidx(cur)] += fs[0] - fs[1]
        for step, a in enumerate(order):
            cur[a] += 1
            w[vi, cidx(cur)] += fs[step + 1] - fs[step + 2]
    mesh.meta["coarse_weights"] = w
    return mesh
