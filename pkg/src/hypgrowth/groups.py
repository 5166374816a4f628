"""Fuchsian groups given by a fundamental domain with paired sides.

A domain is a convex polygon R in the disc containing 0, with sides listed
anticlockwise.  Each side carries its *exterior label* e: the copy of R on
the other side is g_e R, and g_e maps the side labelled inverse(e) onto the
side labelled e.
"""

from __future__ import annotations

import cmath
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import (CycleNotClosing, DomainFormatError, NotAdmissible,
                     OddCorner, PairingMismatch)
from .hyperbolic import (MoebiusMap, OrientedGeodesic, angle_of, angular_gap,
                         compose, geodesic_direction_at, geodesic_through)


@dataclass(frozen=True, order=True)
class GeneratorLabel:
    """Generator e_index, or its inverse when ``bar`` is set."""

    index: int
    bar: bool = False

    def inverse(self):
        return GeneratorLabel(self.index, not self.bar)

    @property
    def name(self):
        return f"e{self.index}" + ("'" if self.bar else "")

    def __repr__(self):
        return self.name

    def to_json(self):
        return {"label": self.index, "bar": self.bar}


@dataclass(frozen=True)
class Side:
    """Side of R from ``v0`` to ``v1`` (anticlockwise around R).

    ``carrier`` is the complete geodesic through the side, oriented from
    P (beyond v0) to Q (beyond v1) so that R lies on its left.
    """

    label: GeneratorLabel
    v0: complex
    v1: complex
    carrier: OrientedGeodesic

    @property
    def ideal0(self):
        return abs(self.v0) > 1.0 - config.EPS_CUSP

    @property
    def ideal1(self):
        return abs(self.v1) > 1.0 - config.EPS_CUSP


@dataclass
class GroupPresentation:
    name: str
    generators: dict            # GeneratorLabel -> MoebiusMap
    relators: list = field(default_factory=list)

    def labels(self):
        return sorted(self.generators)


@dataclass
class FundamentalDomain:
    name: str
    sides: list                 # anticlockwise list of Side
    pairings: dict              # GeneratorLabel -> MoebiusMap
    vertices: list = field(default_factory=list)
    cusps: list = field(default_factory=list)
    contains_origin: bool = True

    def __post_init__(self):
        if not self.vertices:
            self.vertices = [s.v0 for s in self.sides]
        self.cusps = [v for v in self.vertices if abs(v) > 1.0 - config.EPS_CUSP]
        self.contains_origin = self.contains(0j)

    @property
    def m(self):
        return len(self.sides)

    def side_index(self, label):
        for i, s in enumerate(self.sides):
            if s.label == label:
                return i
        raise KeyError(label)

    def generator(self, label):
        return self.pairings[label]

    def contains(self, z, eps=config.EPS_ON):
        return all(float(s.carrier.sinh_distance(z)) >= -eps for s in self.sides)

    def is_cusp(self, v):
        return abs(v) > 1.0 - config.EPS_CUSP

    def presentation(self):
        return GroupPresentation(self.name, dict(self.pairings))

    def to_json(self):
        sides = []
        for s in self.sides:
            sides.append({"label": s.label.index, "bar": s.label.bar,
                          "v0": [s.v0.real, s.v0.imag], "v1": [s.v1.real, s.v1.imag]})
        pairings = [{"label": l.index, "bar": l.bar, "matrix": g.parts()}
                    for l, g in sorted(self.pairings.items())]
        return {"name": self.name, "sides": sides, "pairings": pairings}


@dataclass(frozen=True)
class GroupElement:
    word: tuple
    matrix: MoebiusMap

    @classmethod
    def from_word(cls, dom, word):
        g = MoebiusMap.identity()
        for lab in word:
            g = compose(g, dom.pairings[lab])
        return cls(tuple(word), g)

    def __len__(self):
        return len(self.word)


# ---------------------------------------------------------------------------
# construction

def make_domain(name, vertices, labels, pairings):
    """Assemble a domain from anticlockwise vertices and per-side labels.

    Side i runs from ``vertices[i]`` to ``vertices[i+1]``.  Missing inverse
    pairings are filled in.
    """
    m = len(vertices)
    if len(labels) != m:
        raise DomainFormatError("need one label per side", sides=m, labels=len(labels))
    sides = []
    for i in range(m):
        v0, v1 = complex(vertices[i]), complex(vertices[(i + 1) % m])
        if abs(v0) > 1.0 - config.EPS_CUSP:
            v0 = cmath.exp(1j * cmath.phase(v0))
        if abs(v1) > 1.0 - config.EPS_CUSP:
            v1 = cmath.exp(1j * cmath.phase(v1))
        sides.append(Side(labels[i], v0, v1, geodesic_through(v0, v1)))
    pairs = dict(pairings)
    for lab, g in list(pairs.items()):
        pairs.setdefault(lab.inverse(), g.inverse())
    found = {s.label for s in sides}
    for lab in found:
        if lab.inverse() not in found:
            raise DomainFormatError("label set is not symmetric", label=lab.name)
        if lab not in pairs:
            raise DomainFormatError("side has no pairing", label=lab.name)
    return FundamentalDomain(name, sides, pairs, vertices=[s.v0 for s in sides])


def octagon_pairing_length():
    """Translation length of the side pairings of the regular pi/4 octagon."""
    return 2.0 * math.acosh(1.0 / math.tan(math.pi / 8))


def build_octagon_group():
    """Regular octagon with vertex angle pi/4 and opposite sides paired."""
    # cosh(vertex radius) = cot^2(pi/8) from the right triangle (0, side midpoint, vertex)
    big_r = math.acosh(1.0 / math.tan(math.pi / 8) ** 2)
    rv = math.tanh(0.5 * big_r)
    ell = octagon_pairing_length()
    verts = [rv * cmath.exp(1j * (k * math.pi / 4 - math.pi / 8)) for k in range(8)]
    labels = [GeneratorLabel(k % 4, k >= 4) for k in range(8)]
    pairings = {labels[k]: MoebiusMap.translation(k * math.pi / 4, ell) for k in range(8)}
    dom = make_domain("octagon", verts, labels, pairings)
    return dom.presentation(), dom


def cayley(z, base=1j):
    """Upper half-plane to disc, sending ``base`` to 0 (``None`` is infinity)."""
    if z is None:
        return 1.0 + 0j
    return (z - base) / (z - np.conj(base))


def domain_from_upper_half_plane(name, vertices, labels, matrices, base=1j):
    """Build a disc domain from upper-half-plane data.

    ``vertices`` are anticlockwise (``None`` for infinity) and ``matrices``
    maps labels to SL(2,R) matrices of the exterior generators.
    """
    verts = [cayley(v, base) for v in vertices]
    pairs = {lab: MoebiusMap.from_sl2(m, base) for lab, m in matrices.items()}
    return make_domain(name, verts, labels, pairs)


def build_parabolic_quadrilateral_group():
    """Ideal quadrilateral for the free group on z -> z+2 and z -> z/(2z+1)."""
    a, b = GeneratorLabel(0), GeneratorLabel(1)
    dom = domain_from_upper_half_plane(
        "quad",
        [None, -1.0, 0.0, 1.0],
        [a.inverse(), b.inverse(), b, a],
        {a: [[1.0, 2.0], [0.0, 1.0]], b: [[1.0, 0.0], [2.0, 1.0]]},
    )
    return dom.presentation(), dom


def build_modular_counterexample():
    """Quadrilateral domain of PSL(2,Z) with an order-3 corner.

    Vertices infinity, i, rho, 1+i; the corner at rho = exp(i pi/3) has
    angle 2 pi/3 and only three rays of the tessellation meet there, so the
    domain does not have even corners.
    """
    t, u = GeneratorLabel(0), GeneratorLabel(1)
    rho = complex(0.5, math.sqrt(3) / 2)
    # anticlockwise in the disc = interior on the left in the upper half plane
    dom = domain_from_upper_half_plane(
        "modular",
        [None, 0.0 + 1.0j, rho, 1.0 + 1.0j],
        [t.inverse(), u.inverse(), u, t],
        {t: [[1.0, 1.0], [0.0, 1.0]], u: [[1.0, -1.0], [1.0, 0.0]]},
        base=0.5 + 1.5j,
    )
    return dom.presentation(), dom


BUILTIN = {
    "octagon": build_octagon_group,
    "quad": build_parabolic_quadrilateral_group,
    "quadrilateral": build_parabolic_quadrilateral_group,
    "modular": build_modular_counterexample,
}


def get_group(name):
    try:
        return BUILTIN[name]()
    except KeyError:
        raise KeyError(f"unknown group id {name!r}; choose from {sorted(BUILTIN)}") from None


def load_domain_json(source, name="custom"):
    """Load a domain from the JSON side/pairing schema and validate it."""
    try:
        data = json.loads(source) if isinstance(source, str) else source
    except json.JSONDecodeError as exc:
        raise DomainFormatError(f"domain file is not JSON: {exc}") from exc
    try:
        sides = data["sides"]
        verts = [complex(*s["v0"]) for s in sides]
        labels = [GeneratorLabel(int(s["label"]), bool(s.get("bar", False))) for s in sides]
        pairs = {GeneratorLabel(int(p["label"]), bool(p.get("bar", False))):
                 MoebiusMap.from_parts(*p["matrix"]) for p in data["pairings"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainFormatError(f"malformed domain file: {exc}") from exc
    for i, s in enumerate(sides):
        nxt = complex(*sides[(i + 1) % len(sides)]["v0"])
        if abs(complex(*s["v1"]) - nxt) > config.PAIRING_TOL:
            raise DomainFormatError("sides do not close up", side=i)
    dom = make_domain(data.get("name", name), verts, labels, pairs)
    validate(dom)
    return dom


# ---------------------------------------------------------------------------
# verification

def _vertex_gap(z, w):
    if abs(z) > 1.0 - config.EPS_CUSP and abs(w) > 1.0 - config.EPS_CUSP:
        return float(angular_gap(cmath.phase(z), cmath.phase(w)))
    return abs(z - w)


def _map_vertex(g, v):
    if abs(v) > 1.0 - config.EPS_CUSP:
        return cmath.exp(1j * g.apply_boundary(cmath.phase(v)))
    return g(v)


def verify_side_pairing(dom, tol=config.PAIRING_TOL):
    """g_e must carry the side labelled inverse(e) onto the side labelled e."""
    rows = []
    for s in dom.sides:
        lab = s.label
        g = dom.pairings[lab]
        other = dom.sides[dom.side_index(lab.inverse())]
        img = (_map_vertex(g, other.v0), _map_vertex(g, other.v1))
        # orientation flips: other.v0 -> s.v1 and other.v1 -> s.v0
        res = max(_vertex_gap(img[0], s.v1), _vertex_gap(img[1], s.v0))
        inv = dom.pairings[lab.inverse()]
        inv_res = abs(compose(g, inv).a) - 1.0 + abs(compose(g, inv).b)
        res = max(res, abs(inv_res))
        rows.append({"label": lab.name, "residual": res})
        if not res < tol:
            raise PairingMismatch(f"pairing {lab.name} misses its side",
                                  label=lab.name, residual=res)
    return {"check": "side_pairing", "ok": True, "sides": rows}


def _vertex_index(dom, w):
    for i, v in enumerate(dom.vertices):
        if _vertex_gap(v, w) < 1e-7:
            return i
    raise CycleNotClosing("walked to a point that is not a vertex", point=[w.real, w.imag])


@dataclass
class VertexCycle:
    """Copies h_j R around a vertex, h_0 = identity.

    ``corners[j]`` is the vertex index of R that h_j carries onto v and
    ``sides[j]`` the pair of side indices of R meeting there.
    """

    vertex: complex
    elements: list
    corners: list
    side_pairs: list
    cycle_map: MoebiusMap
    cusp: bool

    def __len__(self):
        return len(self.elements)


def _cycle_for(dom, vi, max_steps=config.MAX_CYCLE_STEPS):
    v = dom.vertices[vi]
    m = dom.m
    cusp = dom.is_cusp(v)
    # start by crossing the side that ends at v
    cur_vertex, cross = vi, (vi - 1) % m
    h = MoebiusMap.identity()
    elements, corners, side_pairs = [], [], []
    start = (vi, cross)
    for step in range(max_steps):
        elements.append(h)
        corners.append(cur_vertex)
        side_pairs.append(((cur_vertex - 1) % m, cur_vertex))
        lab = dom.sides[cross].label
        g = dom.pairings[lab]
        h = compose(h, g)
        w_new = _map_vertex(g.inverse(), dom.vertices[cur_vertex])
        nv = _vertex_index(dom, w_new)
        # at nv the side we came through is the paired one; cross the other
        paired = dom.side_index(lab.inverse())
        cross = nv if paired == (nv - 1) % m else (nv - 1) % m
        cur_vertex = nv
        if (cur_vertex, cross) == start:
            if h.is_identity(1e-8):
                return VertexCycle(v, elements, corners, side_pairs, h, False)
            if cusp and h.is_parabolic(1e-8):
                return VertexCycle(v, elements, corners, side_pairs, h, True)
            # elliptic cycle transformation: keep rotating
    raise CycleNotClosing(f"vertex cycle did not close in {max_steps} steps",
                          vertex=[v.real, v.imag])


def vertex_cycles(dom, max_steps=config.MAX_CYCLE_STEPS):
    """Vertex cycle of each vertex of R, in vertex order."""
    return [_cycle_for(dom, i, max_steps) for i in range(len(dom.vertices))]


def corner_rays(dom, cyc):
    """Directions at v of the images of the sides of the copies around v."""
    angles = []
    for h, ci, (s1, s2) in zip(cyc.elements, cyc.corners, cyc.side_pairs):
        w = dom.vertices[ci]
        turn = cmath.phase(h.disc_derivative(w))
        for si in (s1, s2):
            s = dom.sides[si]
            far = s.v1 if _vertex_gap(s.v0, w) < 1e-7 else s.v0
            angles.append((geodesic_direction_at(w, far) + turn) % (2 * math.pi))
    uniq = []
    for a in sorted(angles):
        if not uniq or angular_gap(a, uniq[-1]) > 1e-7:
            uniq.append(a)
    if len(uniq) > 1 and angular_gap(uniq[0], uniq[-1]) <= 1e-7:
        uniq.pop()
    return uniq


def verify_even_corners(dom, tol=config.EVEN_CORNER_TOL):
    """Rays of the tessellation at every interior vertex must pair up into geodesics."""
    rows = []
    for cyc in vertex_cycles(dom):
        if cyc.cusp:
            rows.append({"vertex": [cyc.vertex.real, cyc.vertex.imag], "ideal": True})
            continue
        rays = corner_rays(dom, cyc)
        for a in rays:
            opp = min(float(angular_gap(a + math.pi, b)) for b in rays)
            if opp > tol:
                raise OddCorner("corner rays do not pair into complete geodesics",
                                vertex=[cyc.vertex.real, cyc.vertex.imag], angles=rays)
        rows.append({"vertex": [cyc.vertex.real, cyc.vertex.imag], "ideal": False,
                     "rays": len(rays), "geodesics": len(rays) // 2})
    return {"check": "even_corners", "ok": True, "vertices": rows}


def verify_admissible(dom):
    """Even corners, at least four sides, and the four-sided compact clause."""
    ev = verify_even_corners(dom)
    if dom.m < 4:
        raise NotAdmissible("fewer than four sides", sides=dom.m)
    all_inside = all(not dom.is_cusp(v) for v in dom.vertices)
    if dom.m == 4 and all_inside:
        for row in ev["vertices"]:
            if row["geodesics"] < 3:
                raise NotAdmissible("fewer than three geodesics meet at a vertex",
                                    vertex=row["vertex"])
    if not dom.contains_origin:
        raise NotAdmissible("origin is not inside the domain")
    return {"check": "admissible", "ok": True, "sides": dom.m,
            "four_side_clause": dom.m == 4 and all_inside}


def relators(dom):
    out = []
    for cyc in vertex_cycles(dom):
        if not cyc.cusp:
            out.append(cyc.cycle_map)
    return out


def validate(dom):
    """Run every domain check; returns a report dict."""
    rep = {"group": dom.name, "sides": dom.m,
           "vertices": len(dom.vertices), "cusps": len(dom.cusps)}
    rep["side_pairing"] = verify_side_pairing(dom)
    rep["even_corners"] = verify_even_corners(dom)
    rep["admissible"] = verify_admissible(dom)
    worst = 0.0
    for cyc in vertex_cycles(dom):
        if not cyc.cusp:
            worst = max(worst, abs(cyc.cycle_map.b), abs(abs(cyc.cycle_map.a) - 1.0))
    rep["relator_residual"] = worst
    rep["ok"] = True
    return rep


# ---------------------------------------------------------------------------
# word length

def _keys(a, b, grid=config.BFS_GRID):
    """Sign-normalised rounded keys for arrays of (a, b)."""
    flip = (a.real < -0.5 * grid) | ((np.abs(a.real) <= 0.5 * grid) & (a.imag < 0))
    a = np.where(flip, -a, a)
    b = np.where(flip, -b, b)
    k = np.stack([np.rint(a.real / grid), np.rint(a.imag / grid),
                  np.rint(b.real / grid), np.rint(b.imag / grid)], axis=1)
    return [tuple(r) for r in k.astype(np.int64).tolist()]


def _ball_layers(pres, radius, grid):
    if radius > config.MAX_BFS_RADIUS:
        raise ValueError(f"radius {radius} exceeds the BFS guard {config.MAX_BFS_RADIUS}")
    gens = [pres.generators[l] for l in pres.labels()]
    ga = np.array([g.a for g in gens])
    gb = np.array([g.b for g in gens])
    seen = {MoebiusMap.identity().key(grid): 0}
    fa = np.array([1.0 + 0j])
    fb = np.array([0j])
    yield 0, fa, fb, seen
    for r in range(1, radius + 1):
        # right multiplication by each generator
        na = (fa[:, None] * ga[None, :] + fb[:, None] * np.conj(gb)[None, :]).ravel()
        nb = (fa[:, None] * gb[None, :] + fb[:, None] * np.conj(ga)[None, :]).ravel()
        keep = []
        for i, k in enumerate(_keys(na, nb, grid)):
            if k not in seen:
                seen[k] = r
                keep.append(i)
        fa, fb = na[keep], nb[keep]
        yield r, fa, fb, seen


def cayley_ball(pres, radius, grid=config.BFS_GRID):
    """Dict key -> word length for every element of the ball of given radius."""
    for *_, seen in _ball_layers(pres, radius, grid):
        pass
    return seen


def ball_elements(pres, radius, grid=config.BFS_GRID):
    """Arrays (a, b, word length) of all elements of the ball."""
    A, B, L = [], [], []
    for r, fa, fb, _ in _ball_layers(pres, radius, grid):
        A.append(fa)
        B.append(fb)
        L.append(np.full(len(fa), r))
    return np.concatenate(A), np.concatenate(B), np.concatenate(L)


def _near_keys(g, grid):
    """Keys of every grid cell g may round into, both signs."""
    out = []
    for sgn in (1, -1):
        a, b = sgn * g.a, sgn * g.b
        coords = [a.real / grid, a.imag / grid, b.real / grid, b.imag / grid]
        opts = [sorted({math.floor(c), math.ceil(c)}) for c in coords]
        out.extend(itertools.product(*opts))
    return out


def word_length_bfs(pres, g, radius, ball=None, grid=config.BFS_GRID):
    """Minimal word length of g, or None if it is not in the ball."""
    if ball is None:
        ball = cayley_ball(pres, radius, grid)
    n = ball.get(g.key(grid))
    if n is None:
        # entries carry round-off, so the key may sit in a neighbouring cell
        hits = [ball[k] for k in _near_keys(g, grid) if k in ball]
        n = min(hits) if hits else None
    if n is None or n > radius:
        return None
    return n
