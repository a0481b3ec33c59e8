"""Smooth gauges for frame fields of a vector bundle over a vertex set."""
from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

__all__ = ["polar", "edge_links", "synchronize", "relax_split", "link_certificate"]

# Certificate thresholds for a continuous frame field.
SIGMA_MIN = 0.5
ANGLE_MAX = np.pi / 3


def polar(m):
    """Unitary polar factor and singular values."""
    u, s, vh = np.linalg.svd(m)
    return u @ vh, s


def _batch_polar(m):
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def edge_links(mesh, vertices, frames, transport):
    """Overlap matrices F_u† T_uv F_v on the induced edges.

    ``frames`` maps vertex -> (aux, N) matrix; ``transport(u, v, vecs)``
    expresses vectors at v in the coordinates of u.
    """
    inside = np.zeros(mesh.n_vertices, dtype=bool)
    inside[list(vertices)] = True
    e = mesh.edges
    e = e[inside[e[:, 0]] & inside[e[:, 1]]]
    return {(int(u), int(v)): frames[u].conj().T @ transport(u, v, frames[v]) for u, v in e}


def link_certificate(links):
    """(smallest singular value, largest eigen-angle of the polar factor)."""
    smin, amax = 1.0, 0.0
    for m in links.values():
        if m.size == 0:
            continue
        w, s = polar(m)
        smin = min(smin, float(s.min()))
        amax = max(amax, float(np.max(np.abs(np.angle(np.linalg.eigvals(w))))))
    return smin, amax


def _sweep(A, C, sweeps, tol):
    """Damped polar sweeps C_v <- polar(deg_v C_v + Σ_u P_vu C_u)."""
    nv, n = C.shape[:2]
    for _ in range(sweeps):
        new = _batch_polar((A @ C.reshape(-1, n)).reshape(nv, n, n))
        change = float(np.max(np.abs(new - C)))
        C = new
        if change < tol:
            break
    return C


def synchronize(mesh, vertices, frames, transport, sweeps=1000, tol=1e-10, restarts=4,
                rng=0, sigma_min=SIGMA_MIN, angle_max=ANGLE_MAX):
    """Right-multiply each frame by a unitary so neighbouring frames agree.

    Minimizes Σ_edges ‖C_u − P_uv C_v‖² over unitaries C, where P_uv is the
    polar factor of the raw overlap.  The lowest N eigenvectors of the
    connection Laplacian give the first start; damped polar sweeps refine
    it.  If the result fails the link certificate, random starts follow
    (a block-diagonal connection keeps the spectral start block-diagonal,
    which traps sums of line bundles with opposite Chern numbers).
    Returns new frames {v: F_v C_v} with the first vertex's frame kept;
    the best attempt is returned when none passes.
    """
    vs = [int(v) for v in vertices]
    if not vs:
        return {}
    n = frames[vs[0]].shape[1]
    if n == 0:
        return {v: frames[v] for v in vs}
    idx = {v: k for k, v in enumerate(vs)}
    links = edge_links(mesh, vs, frames, transport)
    size = len(vs) * n
    blk = np.arange(n)
    degree = np.zeros(len(vs))
    rows, cols, data = [], [], []
    for (u, v), m in links.items():
        p = polar(m)[0]
        degree[idx[u]] += 1
        degree[idx[v]] += 1
        for a, b, q in ((u, v, p), (v, u, p.conj().T)):
            rows.extend(np.repeat(idx[a] * n + blk, n))
            cols.extend(np.tile(idx[b] * n + blk, n))
            data.extend(q.ravel())
    P = scipy.sparse.csr_matrix((data, (rows, cols)), shape=(size, size), dtype=complex)
    D = scipy.sparse.diags(np.repeat(degree, n))
    L = (D - P).tocsr()
    A = (D + P).tocsr()
    if size <= 4000:
        _, vec = scipy.linalg.eigh(L.toarray(), subset_by_index=[0, n - 1])
    else:
        _, vec = scipy.sparse.linalg.eigsh(L, k=n, sigma=-1e-3, which="LM")
    rng = np.random.default_rng(rng)
    starts = [vec.reshape(len(vs), n, n)]
    best, best_score = None, None
    for attempt in range(restarts + 1):
        if attempt:
            starts.append(rng.normal(size=(len(vs), n, n)) + 1j * rng.normal(size=(len(vs), n, n)))
        C = _sweep(A, _batch_polar(starts[-1]), sweeps, tol)
        out = {v: frames[v] @ (C[idx[v]] @ C[0].conj().T) for v in vs}
        smin, amax = link_certificate(edge_links(mesh, vs, out, transport))
        score = (smin > sigma_min and amax < angle_max, -amax)
        if best_score is None or score > best_score:
            best, best_score = out, score
        if score[0]:
            break
    return best


def _block_polar(s, split):
    out = np.zeros_like(s)
    out[:, :split, :split] = _batch_polar(s[:, :split, :split])
    out[:, split:, split:] = _batch_polar(s[:, split:, split:])
    return out


def relax_split(mesh, vertices, frames, transport, constrained, split, sweeps=2000, tol=1e-10,
                restarts=6, rng=0, sigma_min=SIGMA_MIN, angle_max=ANGLE_MAX,
                check_every=100, init=None):
    """Continuous unitary change of basis Y_v inside span(frames[v]).

    At constrained vertices Y_v is block diagonal with blocks (split, rest),
    so the first ``split`` and the remaining columns keep spanning the same
    subspaces as the given frames; elsewhere Y_v is any unitary.  Solved by
    damped polar sweeps, from ``init`` ({v: Y_v}) if given and then from
    random starts, stopping once the link certificate passes.  Returns ({v: F_v Y_v},
    (sigma_min, angle_max) of the result, passed).
    """
    vs = [int(v) for v in vertices]
    idx = {v: k for k, v in enumerate(vs)}
    n = frames[vs[0]].shape[1]
    links = edge_links(mesh, vs, frames, transport)
    size = len(vs) * n
    blk = np.arange(n)
    degree = np.zeros(len(vs))
    rows, cols, data = [], [], []
    for (u, v), m in links.items():
        p = polar(m)[0]
        degree[idx[u]] += 1
        degree[idx[v]] += 1
        for a, b, q in ((u, v, p), (v, u, p.conj().T)):
            rows.extend(np.repeat(idx[a] * n + blk, n))
            cols.extend(np.tile(idx[b] * n + blk, n))
            data.extend(q.ravel())
    A = (scipy.sparse.csr_matrix((data, (rows, cols)), shape=(size, size), dtype=complex)
         + scipy.sparse.diags(np.repeat(degree, n))).tocsr()
    mask = np.array([bool(constrained[v]) for v in vs])
    rng = np.random.default_rng(rng)
    best, best_score = None, None
    starts = [None] * (restarts + 1)
    if init is not None:
        starts.insert(0, np.stack([init[v] for v in vs]))
    for start in starts:
        if start is None:
            start = rng.normal(size=(len(vs), n, n)) + 1j * rng.normal(size=(len(vs), n, n))
        Y = _batch_polar(start)
        Y[mask] = _block_polar(Y[mask], split)
        for sweep in range(1, sweeps + 1):
            s = (A @ Y.reshape(-1, n)).reshape(len(vs), n, n)
            new = _batch_polar(s)
            new[mask] = _block_polar(s[mask], split)
            change = float(np.max(np.abs(new - Y)))
            Y = new
            if change < tol or sweep % check_every == 0 or sweep == sweeps:
                out = {v: frames[v] @ Y[idx[v]] for v in vs}
                cert = link_certificate(edge_links(mesh, vs, out, transport))
                score = (cert[0] > sigma_min and cert[1] < angle_max, -cert[1])
                if score[0] or change < tol:
                    break
        if best_score is None or score > best_score:
            best, best_score, best_cert = out, score, cert
        if score[0]:
            break
    return best, best_cert, best_score[0]
