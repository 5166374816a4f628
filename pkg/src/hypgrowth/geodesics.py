"""Cutting sequences and growth rates of oriented geodesics.

The tessellation is never walked forward.  After each crossing the geodesic
is pulled back into the base domain R by the generator just used, so every
geometric test happens at unit scale.  The pulled-back endpoints form a
pseudo-orbit with round-off sized local errors; it is shadowed by a true
geodesic, and all reported quantities are computed consistently for that
shadow (word products for t_n, pulled-back endpoints for the derivative
terms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import NoExitSide, NotEnteringDomain, RejectionStall, WindowTooLong
from .groups import vertex_cycles
from .hyperbolic import (TWO_PI, MoebiusMap, OrientedGeodesic, angular_gap,
                         ccw_dist, compose)


# ---------------------------------------------------------------------------
# scaled products for long words

class ScaledProduct:
    """Running product of SU(1,1) matrices kept as exp(L) * [[a, b], ...].

    Entries of long words overflow double precision; the scale is split
    off after every multiplication.
    """

    __slots__ = ("a", "b", "L")

    def __init__(self):
        self.a, self.b, self.L = 1.0 + 0j, 0j, 0.0

    def mul(self, g):
        a = self.a * g.a + self.b * g.b.conjugate()
        b = self.a * g.b + self.b * g.a.conjugate()
        s = max(abs(a), abs(b))
        self.a, self.b, self.L = a / s, b / s, self.L + math.log(s)

    def displacement(self):
        """d(0, G 0) = 2 log(|a| + |b|) of the unscaled product."""
        return 2.0 * (self.L + math.log(abs(self.a) + abs(self.b)))

    def log_boundary_derivative(self, theta):
        """log |G'(e^{i theta})| of the unscaled product."""
        z = complex(math.cos(theta), math.sin(theta))
        d = self.b.conjugate() * z + self.a.conjugate()
        return -2.0 * (self.L + math.log(abs(d)))

    def matrix(self):
        return MoebiusMap(self.a, self.b).normalized()


# ---------------------------------------------------------------------------
# exit side

def _vertex_sides(dom, geo, eps_vertex):
    """+1 (left), -1 (right) per vertex; near-misses count as left."""
    out = []
    touched = False
    for v in dom.vertices:
        if abs(v) > 1.0 - config.EPS_CUSP:
            th = math.atan2(v.imag, v.real) % TWO_PI
            lo, span = geo.left_arc
            off = float(ccw_dist(lo, th))
            out.append(1 if off < span else -1)
        else:
            s = float(geo.sinh_distance(v))
            if abs(s) <= eps_vertex:
                touched = True
                out.append(1)
            else:
                out.append(1 if s > 0 else -1)
    return out, touched


def exit_side(dom, geo, eps_vertex=config.EPS_VERTEX):
    """Index of the side through which ``geo`` leaves R, and a deformation flag.

    Walking the sides anticlockwise, the exit side is the one whose start
    vertex is right of the geodesic and whose end vertex is left of it.  A
    vertex within ``eps_vertex`` of the geodesic is treated as lying on its
    left, which is the same as pushing the geodesic to the right around it.
    """
    sides, touched = _vertex_sides(dom, geo, eps_vertex)
    m = dom.m
    hits = [i for i in range(m) if sides[i] < 0 and sides[(i + 1) % m] > 0]
    if len(hits) != 1:
        raise NoExitSide("no unique exit side", src=geo.src, dst=geo.dst, sides=sides)
    return hits[0], touched


def meets_interior(dom, geo):
    """True when ``geo`` has vertices of R strictly on both sides."""
    sides, _ = _vertex_sides(dom, geo, 0.0)
    return (1 in sides) and (-1 in sides)


# ---------------------------------------------------------------------------
# cutting sequences

@dataclass
class CuttingSequence:
    geodesic: OrientedGeodesic
    labels: list
    sides: list
    deformed: list
    pulled: list                # pulled-back geodesics gamma_k = G_k^{-1} gamma

    def __len__(self):
        return len(self.labels)

    def element(self, dom, n):
        g = MoebiusMap.identity()
        for lab in self.labels[:n]:
            g = compose(g, dom.pairings[lab])
        return g


def cutting_sequence(dom, geo, n, eps_vertex=config.EPS_VERTEX):
    if not meets_interior(dom, geo):
        raise NotEnteringDomain("geodesic does not cross the interior of R",
                                src=geo.src, dst=geo.dst)
    labels, sides, deformed, pulled = [], [], [], [geo]
    cur = geo
    for k in range(n):
        i, touched = exit_side(dom, cur, eps_vertex)
        lab = dom.sides[i].label
        labels.append(lab)
        sides.append(i)
        deformed.append(touched)
        ginv = dom.pairings[lab].inverse()
        cur = OrientedGeodesic(ginv.apply_boundary(cur.src), ginv.apply_boundary(cur.dst))
        pulled.append(cur)
    return CuttingSequence(geo, labels, sides, deformed, pulled)


# ---------------------------------------------------------------------------
# growth traces

def neighbour_set(dom):
    """Elements h with hR sharing a side or an interior vertex with R."""
    out = {MoebiusMap.identity().key(): MoebiusMap.identity()}
    for g in dom.pairings.values():
        out.setdefault(g.key(), g)
    for cyc in vertex_cycles(dom):
        if cyc.cusp:
            continue
        for h in cyc.elements:
            out.setdefault(h.key(), h)
    return out


@dataclass
class GrowthTrace:
    t: np.ndarray
    s: np.ndarray
    u: np.ndarray
    labels: list
    f_labels: list
    deformed: list
    adjacency_ok: list = field(default_factory=list)

    @property
    def n(self):
        return len(self.t) - 1


def growth_trace(dom, f, geo, n, eps_vertex=config.EPS_VERTEX, neighbours=None,
                 with_s=True):
    """t_k, s_k and u_k for k = 0..n along the cutting sequence of ``geo``.

    s_k = log|(f^k)'(gamma^+)| uses h_k = A_k^{-1} G_k, which by the
    adjacency property lies in the finite neighbour set of R; x_k = h_k
    gamma_k^+ is then the k-th point of the f-orbit.
    """
    if not meets_interior(dom, geo):
        raise NotEnteringDomain("geodesic does not cross the interior of R",
                                src=geo.src, dst=geo.dst)
    if neighbours is None and with_s:
        neighbours = neighbour_set(dom)
    t = np.zeros(n + 1)
    s = np.zeros(n + 1)
    u = np.zeros(n + 1)
    prod = ScaledProduct()
    h = MoebiusMap.identity()
    cur = geo
    labels, flabels, deformed, adj = [], [], [], []
    for k in range(n):
        if with_s:
            xk = h.apply_boundary(cur.dst)
            bi = f.branch_index(xk)
            flabels.append(f.labels[bi])
        i, touched = exit_side(dom, cur, eps_vertex)
        lab = dom.sides[i].label
        g = dom.pairings[lab]
        labels.append(lab)
        deformed.append(touched)
        prod.mul(g)
        ginv = g.inverse()
        cur = OrientedGeodesic(ginv.apply_boundary(cur.src), ginv.apply_boundary(cur.dst))
        t[k + 1] = prod.displacement()
        u[k + 1] = -prod.log_boundary_derivative(cur.dst)
        if with_s:
            hn = compose(compose(f.maps[bi], h), g)
            snap = neighbours.get(hn.key())
            adj.append(snap is not None)
            h = snap if snap is not None else hn
            s[k + 1] = u[k + 1] + float(h.log_boundary_derivative(cur.dst))
    return GrowthTrace(t, s, u, labels, flabels, deformed, adj)


# ---------------------------------------------------------------------------
# sampling

def sample_geodesics(dom, count, seed, radius=None, f=None, max_tries=None,
                     min_acceptance=1e-3):
    """Geodesics with iid uniform endpoints crossing int(R) (and the disc of ``radius``).

    Endpoints within 1e-9 of a branch cut or a cusp are rejected.
    """
    rng = np.random.default_rng(seed)
    bad = []
    if f is not None:
        bad.extend(float(p) for p in f.P)
    bad.extend(math.atan2(v.imag, v.real) % TWO_PI for v in dom.cusps)
    bad = np.array(bad)
    out = []
    tries = 0
    limit = max_tries or max(10_000, int(10 * count / min_acceptance))
    while len(out) < count:
        if tries >= 1000 and len(out) / tries < min_acceptance:
            raise RejectionStall("acceptance rate too low", tries=tries, accepted=len(out))
        if tries >= limit:
            raise RejectionStall("too many rejected samples", tries=tries, accepted=len(out))
        tries += 1
        src, dst = rng.uniform(0.0, TWO_PI, 2)
        if angular_gap(src, dst) <= config.EPS_DISTINCT:
            continue
        if len(bad) and float(np.min(angular_gap(bad, dst))) < 1e-9:
            continue
        geo = OrientedGeodesic(src, dst)
        if radius is not None and geo.euclidean_gap_to_origin() >= radius:
            continue
        if not meets_interior(dom, geo):
            continue
        out.append(geo)
    return out


def erdos_renyi_statistic(t, I_alpha, n):
    """max over m of (t_{m+w} - t_m) / log n with window w = floor(log n / I)."""
    if I_alpha <= 0:
        raise ValueError("rate must be positive")
    ln = math.log(n)
    w = int(math.floor(ln / I_alpha))
    if w > n:
        raise WindowTooLong("window longer than the trace", window=w, n=n)
    t = np.asarray(t, dtype=float)
    if len(t) < n + 1:
        raise ValueError("trace shorter than n")
    if w == 0:
        return 0.0
    return float(np.max(t[w:n + 1] - t[:n + 1 - w]) / ln)


def trace_rows(tr):
    """CSV rows (n, symbol, t_n, s_n, u_n, deformed)."""
    rows = [(0, "", 0.0, 0.0, 0.0, 0)]
    for k in range(tr.n):
        rows.append((k + 1, tr.labels[k].name, tr.t[k + 1], tr.s[k + 1], tr.u[k + 1],
                     int(tr.deformed[k])))
    return rows
