"""Bowen-Series boundary map and its finite Markov partition.

The map is piecewise Moebius: on the arc [P_i, P_{i+1}) it acts by the
inverse of the exterior generator of side i.  Cut points of the Markov
partition are the boundary endpoints of tessellation geodesics through the
vertices of R; at a cusp only five of the infinitely many such points are
kept, which makes the partition finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import config
from .errors import CarrierOrderViolation, NotMarkov, SlowContraction
from .groups import vertex_cycles
from .hyperbolic import (TWO_PI, MoebiusMap, angular_gap, as_boundary_point,
                         boundary_image, ccw_dist, compose,
                         log_boundary_derivative)


@dataclass
class BowenSeriesMap:
    """f restricted to [P_i, P_{i+1}) is the inverse of generator e_i."""

    domain: object
    P: np.ndarray               # branch start angles, side order
    Q: np.ndarray               # Q[i] = Q_i; the carrier of side i ends at Q[i+1]
    labels: list                # exterior label e_i per branch
    maps: list                  # branch maps (inverse generators)

    def __post_init__(self):
        self._order = np.argsort(self.P)
        self._cuts = self.P[self._order]
        self._a = np.array([g.a for g in self.maps])
        self._b = np.array([g.b for g in self.maps])

    @property
    def m(self):
        return len(self.maps)

    def branch_arcs(self):
        return [(float(self.P[i]), float(self.P[(i + 1) % self.m])) for i in range(self.m)]

    def branch_index(self, theta):
        """Index i with theta in [P_i, P_{i+1}); vectorised."""
        t = as_boundary_point(theta)
        k = np.searchsorted(self._cuts, t, side="right") - 1
        out = self._order[np.mod(k, self.m)]
        return int(out) if np.ndim(out) == 0 else out

    def __call__(self, theta):
        return self.eval(theta)

    def eval(self, theta):
        i = self.branch_index(theta)
        out = boundary_image(self._a[i], self._b[i], theta)
        return as_boundary_point(out)

    def log_deriv(self, theta):
        i = self.branch_index(theta)
        return log_boundary_derivative(self._a[i], self._b[i], theta)

    def deriv(self, theta):
        return np.exp(self.log_deriv(theta))

    def step(self, theta):
        """(f(theta), log|f'(theta)|, branch index) for arrays."""
        i = self.branch_index(theta)
        a, b = self._a[i], self._b[i]
        return (as_boundary_point(boundary_image(a, b, theta)),
                log_boundary_derivative(a, b, theta), i)

    def orbit(self, theta, n):
        xs = [as_boundary_point(theta)]
        for _ in range(n):
            xs.append(self.eval(xs[-1]))
        return xs

    def f_expansion(self, theta, n):
        """Labels a_0 ... a_{n-1} with f^k(theta) in the branch of a_k."""
        out = []
        x = as_boundary_point(theta)
        for _ in range(n):
            i = self.branch_index(x)
            out.append(self.labels[i])
            x = self.eval(x)
        return out

    def birkhoff_log_deriv(self, theta, n):
        """log|(f^n)'(theta)| summed along the orbit; vectorised over theta."""
        x = np.asarray(theta, dtype=float)
        total = np.zeros_like(x)
        for _ in range(n):
            x, ld, _ = self.step(x)
            total = total + ld
        return total

    def describe(self):
        rows = []
        for i in range(self.m):
            rows.append({"branch": i, "label": self.labels[i].name,
                         "P": float(self.P[i]), "P_next": float(self.P[(i + 1) % self.m]),
                         "Q_next": float(self.Q[(i + 1) % self.m]),
                         "matrix": self.maps[i].parts()})
        return {"group": self.domain.name, "branches": rows}


def build_bowen_series(dom):
    m = dom.m
    P = np.array([s.carrier.src for s in dom.sides])
    Qn = np.array([s.carrier.dst for s in dom.sides])   # Q_{i+1}
    Q = np.roll(Qn, 1)
    steps = np.array([ccw_dist(P[i], P[(i + 1) % m]) for i in range(m)])
    if np.any(steps <= config.EPS_DISTINCT) or abs(steps.sum() - TWO_PI) > 1e-9:
        raise CarrierOrderViolation("carrier endpoints P_i are not in anticlockwise order",
                                    P=P.tolist())
    labels = [s.label for s in dom.sides]
    maps = [dom.pairings[l].inverse() for l in labels]
    return BowenSeriesMap(dom, P, Q, labels, maps)


# ---------------------------------------------------------------------------
# Markov partition

@dataclass
class MarkovPartition:
    """Arcs [lo_a, hi_a) labelled 0..|S|-1 anticlockwise from angle 0."""

    f: BowenSeriesMap
    cuts: np.ndarray            # sorted cut points W'
    provenance: list            # per cut point: list of source tags
    M: np.ndarray               # 0/1 transition matrix
    branch_of: np.ndarray       # branch index for each arc
    cusp_arcs: list = field(default_factory=list)   # (lo, hi) arcs L(v), R(v)
    residuals: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lo = self.cuts.copy()
        self.hi = np.roll(self.cuts, -1)
        self.width = ccw_dist(self.lo, self.hi)
        self.width[self.width == 0] = TWO_PI
        self._order = np.argsort(self.cuts)
        self._sorted = self.cuts[self._order]
        bi = self.branch_of
        self._a = self.f._a[bi]
        self._b = self.f._b[bi]

    @property
    def size(self):
        return len(self.cuts)

    def symbol(self, theta):
        t = as_boundary_point(theta)
        k = np.searchsorted(self._sorted, t, side="right") - 1
        out = self._order[np.mod(k, self.size)]
        return int(out) if np.ndim(out) == 0 else out

    def arc(self, a):
        return float(self.lo[a]), float(self.hi[a])

    def step(self, theta):
        """(f(theta), log|f'(theta)|, symbol) for arrays."""
        s = self.symbol(theta)
        a, b = self._a[s], self._b[s]
        return (as_boundary_point(boundary_image(a, b, theta)),
                log_boundary_derivative(a, b, theta), s)

    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.M.astype(float)))))

    def is_irreducible(self):
        n, _ = connected_components(self.M, directed=True, connection="strong")
        return n == 1

    def to_json(self):
        return {
            "group": self.f.domain.name,
            "alphabet": list(range(self.size)),
            "arcs": [[float(f"{x:.17g}"), float(f"{y:.17g}")] for x, y in zip(self.lo, self.hi)],
            "branch": [int(b) for b in self.branch_of],
            "transitions": [np.flatnonzero(r).tolist() for r in self.M],
            "cut_points": [{"theta": float(f"{c:.17g}"), "sources": p}
                           for c, p in zip(self.cuts, self.provenance)],
        }


def _other_endpoint(geo, v_angle):
    """Endpoint of ``geo`` away from ``v_angle``."""
    if angular_gap(geo.src, v_angle) < angular_gap(geo.dst, v_angle):
        return geo.dst
    return geo.src


def _corner_geodesics(dom, cyc):
    """Images h_j(carrier) of the carriers meeting at each corner of the cycle."""
    out = []
    for h, (s1, s2) in zip(cyc.elements, cyc.side_pairs):
        for si in (s1, s2):
            out.append(dom.sides[si].carrier.image(h))
    return out


def vertex_cut_points(dom, cyc):
    """W(v) for an interior vertex: endpoints of the geodesics of N through v."""
    pts = []
    for g in _corner_geodesics(dom, cyc):
        pts.extend([g.src, g.dst])
    return _dedupe(pts)


def cusp_cut_points(dom, f, vi, cyc, max_power=200):
    """W'(v) for a cusp: v, Q_{i+1}, the first point clockwise from Q_{i+1}
    and the first two anticlockwise ones.

    The full W(v) accumulates at v; it is generated by applying powers of
    the parabolic cycle map to the geodesics through one turn of corners.
    """
    v = float(np.angle(dom.vertices[vi])) % TWO_PI
    i = vi                      # side i starts at v, so P_i = v
    q = float(f.Q[(i + 1) % f.m])
    seeds = [_other_endpoint(g, v) for g in _corner_geodesics(dom, cyc)]
    c = cyc.cycle_map
    pts = list(seeds)
    for sign in (1, -1):
        g = c if sign > 0 else c.inverse()
        cur = list(seeds)
        for _ in range(max_power):
            cur = [g.apply_boundary(x) for x in cur]
            pts.extend(cur)
            if all(angular_gap(x, v) < config.CUSP_ACCUMULATION for x in cur):
                break
            if all(angular_gap(x, v) < 1e-7 for x in cur):
                # close enough: the five kept points are far from v
                break
    offs = np.array([ccw_dist(v, x) for x in pts])
    offs = np.sort(offs[(offs > 1e-9) & (offs < TWO_PI - 1e-9)])
    # the same point is often reached both as a seed and along an orbit
    offs = offs[np.concatenate([[True], np.diff(offs) > 1e-9])]
    oq = float(ccw_dist(v, q))
    below = np.sort(offs[offs < oq - 1e-12])[::-1]
    above = np.sort(offs[offs > oq + 1e-12])
    if len(below) < 1 or len(above) < 2:
        raise NotMarkov("cusp cut points not found", vertex=v)
    x1 = (v + below[0]) % TWO_PI
    y1 = (v + above[0]) % TWO_PI
    y2 = (v + above[1]) % TWO_PI
    pts = {"v": v, "Q": q, "L1": x1, "R1": y1, "R2": y2}
    # L(v) = [v, x1] clockwise side, R(v) = [y2, v]
    arcs = [(v, x1), (y2, v)]
    return pts, arcs


def _dedupe(pts, tol=1e-9):
    out = []
    for p in sorted(as_boundary_point(x) for x in pts):
        if not out or p - out[-1] > tol:
            out.append(p)
    if len(out) > 1 and TWO_PI - out[-1] + out[0] <= tol:
        out.pop()
    return out


def build_finite_partition(f, n_random=1000, seed=0):
    dom = f.domain
    cycles = vertex_cycles(dom)
    tagged = []
    cusp_arcs = []
    for vi, cyc in enumerate(cycles):
        if dom.is_cusp(dom.vertices[vi]):
            pts, arcs = cusp_cut_points(dom, f, vi, cyc)
            cusp_arcs.extend(arcs)
            tagged.extend((x, f"W'(v{vi}):{k}") for k, x in pts.items())
        else:
            tagged.extend((x, f"W(v{vi})") for x in vertex_cut_points(dom, cyc))
    tagged.sort(key=lambda t: t[0])
    cuts, prov = [], []
    for x, tag in tagged:
        if cuts and angular_gap(x, cuts[-1]) <= 1e-9:
            if tag not in prov[-1]:
                prov[-1].append(tag)
            continue
        cuts.append(x)
        prov.append([tag])
    if len(cuts) > 1 and angular_gap(cuts[0], cuts[-1]) <= 1e-9:
        prov[0].extend(t for t in prov.pop() if t not in prov[0])
        cuts.pop()
    cuts = np.array(cuts)
    # branch points are exact construction data; snap onto them
    for P in f.P:
        k = int(np.argmin(angular_gap(cuts, P)))
        if angular_gap(cuts[k], P) <= 1e-9:
            cuts[k] = P
    # arc containing angle 0 gets label 0
    start = int(np.mod(np.searchsorted(cuts, 0.0, side="right") - 1, len(cuts)))
    cuts = np.roll(cuts, -start)
    prov = prov[start:] + prov[:start]
    return _assemble(f, cuts, prov, cusp_arcs, n_random, seed)


def _assemble(f, cuts, prov, cusp_arcs, n_random, seed):
    n = len(cuts)
    lo, hi = cuts, np.roll(cuts, -1)
    width = ccw_dist(lo, hi)
    # every arc must sit inside one branch arc
    branch = np.empty(n, dtype=int)
    for a in range(n):
        mid = lo[a] + 0.5 * width[a]
        i = f.branch_index(mid)
        P0, P1 = f.P[i], f.P[(i + 1) % f.m]
        off = float(ccw_dist(P0, lo[a]))
        if off > TWO_PI - config.MARKOV_TOL:
            off -= TWO_PI
        if off + width[a] > ccw_dist(P0, P1) + config.MARKOV_TOL:
            raise NotMarkov("partition does not refine the branch arcs", arc=a, branch=int(i))
        branch[a] = i
    # f(W') inside W'
    worst_inv = 0.0
    for a in range(n):
        g = f.maps[branch[a]]
        for x in (lo[a], hi[a]):
            y = g.apply_boundary(x)
            worst_inv = max(worst_inv, float(np.min(angular_gap(cuts, y))))
    if worst_inv > config.MARKOV_TOL:
        raise NotMarkov("f(W') is not contained in W'", residual=worst_inv)
    M = np.zeros((n, n), dtype=np.int8)
    for a in range(n):
        g = f.maps[branch[a]]
        ylo, yhi = g.apply_boundary(lo[a]), g.apply_boundary(hi[a])
        j0 = int(np.argmin(angular_gap(cuts, ylo)))
        j1 = int(np.argmin(angular_gap(cuts, yhi)))
        if j0 == j1:
            # image wraps round the whole circle
            M[a, :] = 1
            continue
        j = j0
        while j != j1:
            M[a, j] = 1
            j = (j + 1) % n
    part = MarkovPartition(f, cuts, prov, M, branch, cusp_arcs)
    part.residuals["f_W_in_W"] = worst_inv
    part.residuals["random_violations"] = check_transitions(part, n_random, seed)
    if part.residuals["random_violations"]:
        raise NotMarkov("random interior points disagree with the transition matrix",
                        count=part.residuals["random_violations"])
    part.residuals["markov_endpoint"] = markov_endpoint_residual(part)
    return part


def check_transitions(part, count=1000, seed=0):
    """Number of random points x with M[s(x), s(f x)] == 0."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, TWO_PI, count)
    y, _, s = part.step(x)
    t = part.symbol(y)
    return int(np.sum(part.M[s, t] == 0))


def markov_endpoint_residual(part):
    """Largest distance from f(arc endpoint) to the nearest cut point."""
    worst = 0.0
    for a in range(part.size):
        g = part.f.maps[part.branch_of[a]]
        for x in (part.lo[a], part.hi[a]):
            worst = max(worst, float(np.min(angular_gap(part.cuts, g.apply_boundary(x)))))
    return worst


# ---------------------------------------------------------------------------
# coding

def random_admissible(part, n, rng):
    """Random admissible word of length n for the transition matrix."""
    w = [int(rng.integers(part.size))]
    for _ in range(n - 1):
        nxt = np.flatnonzero(part.M[w[-1]])
        w.append(int(rng.choice(nxt)))
    return w


def _pull_back(part, word):
    """(lo, width) of the cylinder of ``word`` and the widths of its suffix cylinders.

    The last arc is pulled back through the inverse branches, which contract,
    so no long matrix product is ever formed.
    """
    last = word[-1]
    lo, w = float(part.lo[last]), float(part.width[last])
    widths = [w]
    for s in reversed(word[:-1]):
        gi = part.f.maps[part.branch_of[s]].inverse()
        lo, w = float(as_boundary_point(gi.apply_boundary(lo))), _image_width(gi, lo, w)
        widths.append(w)
    return lo, w, widths


def cylinder_arc(part, word):
    """(lo, width, g) of the cylinder of ``word``; g is f^n on it.

    The matrix g is only accurate while its entries stay well below 1e8,
    i.e. for words of length up to about ten.
    """
    lo, width, _ = _pull_back(part, word)
    g = MoebiusMap.identity()
    for s in word:
        g = compose(part.f.maps[part.branch_of[s]], g)
    return lo, width, g


def _image_width(g, lo, width):
    """Length of g([lo, lo + width]) computed without cancellation."""
    hi = lo + width
    if width >= math.pi:
        glo, ghi = g.apply_boundary(lo), g.apply_boundary(hi)
        return float(ccw_dist(glo, ghi)) or TWO_PI
    chord = 2.0 * math.sin(0.5 * width)
    scale = math.sqrt(g.boundary_derivative(lo) * g.boundary_derivative(hi))
    c = min(chord * scale, 2.0)
    w = 2.0 * math.asin(0.5 * c)
    # the image may be the long way round
    mid = g.apply_boundary(lo + 0.5 * width)
    if float(ccw_dist(g.apply_boundary(lo), mid)) > math.pi - 1e-12 and c > 1.0:
        w = TWO_PI - w
    return w


def coding_point(part, word, check=True):
    """Nested-interval approximation of the coded point and its cylinder width.

    With ``check`` the depth-n width is compared against the depth n/2 width.
    """
    word = list(word)
    lo, w, _ = _pull_back(part, word)
    n = len(word)
    if check and n >= 2:
        half = _pull_back(part, word[:n // 2])[1]
        if w > half * (1 + 1e-12):
            raise SlowContraction("cylinder width did not shrink", depth=n,
                                  width=w, half=half)
    return as_boundary_point(lo + 0.5 * w), w


def coding_check(part, word, n=None):
    """|f(pi(x)) - pi(sigma x)| for the nested-interval approximation."""
    word = list(word)
    if n is not None:
        word = word[:n]
    x, _ = coding_point(part, word)
    y, _ = coding_point(part, word[1:])
    fx = float(part.f.eval(x))
    return float(angular_gap(fx, y))
