"""Spectral-flow class as a Čech 1-cocycle of essential codimensions."""
from __future__ import annotations

import numpy as np

from .cover import GAP_MARGIN, CechCochain, coboundary
from .errors import CocycleError, GapViolationError

__all__ = [
    "essential_codimension",
    "projection_counts",
    "build_sf_cocycle",
    "evaluate_on_loop",
    "crossing_oracle",
    "SF_ORIENTATION",
]

# ec(P_i, P_j) counts bands between the levels with the sign of rank(P_i) −
# rank(P_j); evaluated around a loop this is minus the upward crossing count.
# The cocycle is ec times this sign so that winding(+1) has flow +1.
SF_ORIENTATION = -1


def _count_between(vals, a, b):
    lo, hi = min(a, b), max(a, b)
    n = int(np.count_nonzero((vals > lo) & (vals < hi)))
    return n if b > a else -n


def essential_codimension(family, level_i, level_j, x, gap_margin=GAP_MARGIN):
    """ec(P_i, P_j) at vertex x for spectral projections above the levels.

    Equals the number of band values (with multiplicity) strictly between
    the levels, positive when level_j > level_i.
    """
    vals = family.values[:, x]
    for lv in (level_i, level_j):
        if np.any(np.abs(vals - lv) <= gap_margin):
            raise GapViolationError("band value at a level", vertex=int(x), level=float(lv))
    return _count_between(vals, level_i, level_j)


def projection_counts(family, cover, i):
    """Per-vertex number of bands above level i inside the window, on U_i."""
    vs = cover.sets[i]
    vals = family.values[:, vs]
    inside = vals <= family.window.hi
    return dict(zip(vs.tolist(), np.count_nonzero((vals > cover.levels[i]) & inside, axis=0).tolist()))


def build_sf_cocycle(family, cover):
    """Integer 1-cocycle c(i, j) on the nerve, checked for constancy over
    each overlap and for the cocycle identity on every nerve 2-simplex."""
    values = {}
    for i, j in cover.nerve.get(1, ()):
        inter = cover.intersection((i, j))
        vals = family.values[:, inter]
        li, lj = cover.levels[i], cover.levels[j]
        if np.any(np.abs(vals - li) <= cover.gap_margin) or np.any(np.abs(vals - lj) <= cover.gap_margin):
            raise GapViolationError("band value at a level on an overlap", edge=[i, j])
        lo, hi = min(li, lj), max(li, lj)
        counts = np.count_nonzero((vals > lo) & (vals < hi), axis=0)
        if np.any(counts != counts[0]):
            bad = int(inter[np.flatnonzero(counts != counts[0])[0]])
            raise CocycleError("essential codimension differs between witnesses",
                               edge=[i, j], witnesses=[int(inter[0]), bad])
        ec = int(counts[0]) if lj > li else -int(counts[0])
        values[(i, j)] = SF_ORIENTATION * ec
    c = CechCochain(1, "integer", values)
    dc = coboundary(c, cover.nerve)
    bad = {s: v for s, v in dc.values.items() if v != 0}
    if bad:
        s = next(iter(bad))
        raise CocycleError("cocycle identity fails", simplex=list(s), defect=int(bad[s]))
    return c


def _loop_edges(loop):
    if isinstance(loop, dict):
        return loop
    chain = {}
    seq = list(loop)
    for a, b in zip(seq, seq[1:] + seq[:1]):
        if a == b:
            continue
        key, sgn = ((a, b), 1) if a < b else ((b, a), -1)
        chain[key] = chain.get(key, 0) + sgn
    return {k: v for k, v in chain.items() if v}


def evaluate_on_loop(c, loop):
    """Signed sum of a 1-cochain along a closed loop.

    ``loop`` is a vertex cycle (closed implicitly) or an edge chain
    {(a, b): coefficient}.
    """
    chain = _loop_edges(loop)
    bd = {}
    for (a, b), k in chain.items():
        bd[b] = bd.get(b, 0) + k
        bd[a] = bd.get(a, 0) - k
    if any(v for v in bd.values()):
        raise CocycleError("loop is not a cycle")
    return int(sum(c((a, b)) * k for (a, b), k in chain.items()))


def crossing_oracle(family, loop, level, gap_margin=GAP_MARGIN):
    """Net signed number of bands crossing ``level`` upward along a closed
    vertex loop, interpolating linearly on edges."""
    seq = list(loop)
    vals = family.values
    nb = family.n_bands
    for x in seq:
        if np.any(np.abs(vals[:, x] - level) <= gap_margin):
            raise GapViolationError("band equal to level on the loop", vertex=int(x),
                                    level=float(level))
    total = 0
    for u, v in zip(seq, seq[1:] + seq[:1]):
        s = family.shift(u, v)
        r = np.arange(max(0, -s), min(nb, nb - s))
        a, b = vals[r, u], vals[r + s, v]
        total += int(np.count_nonzero((a < level) & (b > level)))
        total -= int(np.count_nonzero((a > level) & (b < level)))
    return total
