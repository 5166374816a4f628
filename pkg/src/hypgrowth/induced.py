"""First-return map to the complement of the cusp arcs.

Away from the cusps the Bowen-Series map is uniformly expanding after
inducing: f~ = f^t on each arc where the return time t to the base set is
constant.  Return words are enumerated over the finite partition up to
``t_max``; cylinders that are still outside the base at ``t_max`` or whose
width falls below ``min_width`` are counted as unresolved mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cylinders import extend, level_one, parents_of
from .errors import EmptyBase
from .hyperbolic import TWO_PI, ccw_dist, derivative_extrema


def base_symbols(part):
    """Markov arcs not inside any cusp arc L(v) or R(v)."""
    mid = part.lo + 0.5 * part.width
    inside = np.zeros(part.size, dtype=bool)
    for lo, hi in part.cusp_arcs:
        span = float(ccw_dist(lo, hi)) or TWO_PI
        inside |= ccw_dist(lo, mid) < span
    return np.flatnonzero(~inside)


@dataclass
class InducedMap:
    base: np.ndarray                # base symbols of the finite partition
    base_length: float
    t_max: int
    min_width: float
    per_t: dict                     # t -> (branch count, mass fraction, max log distortion)
    unresolved: float               # fraction of the base not resolved
    arcs: dict = None               # t -> (first, lo, width, log distortion) when kept

    @property
    def size(self):
        return sum(v[0] for v in self.per_t.values())

    @property
    def log_C1(self):
        vals = [v[2] for v in self.per_t.values() if v[0]]
        return max(vals) if vals else 0.0

    @property
    def C1(self):
        return float(np.exp(self.log_C1))

    def resolved(self):
        return sum(v[1] for v in self.per_t.values())


def build_induced_map(part, t_max=64, min_width=1e-8, keep_arcs=False):
    """Return-time branches of f to the base set, aggregated per return time.

    Without cusps the base is the whole circle and every branch has t = 1.
    """
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    base = base_symbols(part)
    is_base = np.zeros(part.size, dtype=bool)
    is_base[base] = True
    base_len = float(part.width[base].sum())
    if base_len <= 0:
        raise EmptyBase("base set of the induced map is empty")
    batch = level_one(part).take(base)
    per_t, arcs = {}, ({} if keep_arcs else None)
    pruned = 0.0
    for t in range(1, t_max + 1):
        if len(batch) == 0:
            break
        child = extend(part, batch)
        par = parents_of(part, batch)
        back = np.flatnonzero(is_base[child.last])
        # on a returning arc the induced branch is f^t, the parent's map
        lo, w = child.lo[back], child.width[back]
        dmin, dmax = derivative_extrema(batch.a[par[back]], batch.b[par[back]], lo, lo + w)
        dist = dmax - dmin
        per_t[t] = (len(back), float(w.sum()) / base_len,
                    float(dist.max()) if len(back) else 0.0)
        if keep_arcs:
            arcs[t] = (child.first[back], lo, w, dist)
        stay = child.take(np.flatnonzero(~is_base[child.last]))
        small = stay.width < min_width
        pruned += float(stay.width[small].sum())
        batch = stay.take(np.flatnonzero(~small))
    live = float(batch.width.sum()) if len(batch) else 0.0
    return InducedMap(base, base_len, t_max, min_width, per_t, (live + pruned) / base_len, arcs)
