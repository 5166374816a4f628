"""Poincare disc geometry.

Disc points are plain complex numbers; boundary points are angles in
radians normalised into [0, 2*pi).  Isometries are kept in SU(1,1) normal
form ``[[a, b], [conj(b), conj(a)]]`` acting by ``z -> (a z + b)/(conj(b) z + conj(a))``.

The scalar helpers at the top of the module accept numpy arrays as well,
which is what the cylinder enumeration and the Monte-Carlo code rely on.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import config
from .errors import DegenerateGeodesic

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# points

def as_boundary_point(theta):
    """Normalise an angle (or array of angles) into [0, 2*pi)."""
    t = np.mod(theta, TWO_PI)
    if np.ndim(t) == 0:
        t = float(t)
        return 0.0 if t >= TWO_PI else t
    return np.where(t >= TWO_PI, 0.0, t)


def as_disc_point(z):
    z = complex(z)
    if abs(z) ** 2 >= 1.0 - config.EPS_DISC:
        raise ValueError(f"{z} is not inside the unit disc")
    return z


def on_circle(theta):
    return np.exp(1j * np.asarray(theta, dtype=float))


def angle_of(z):
    return as_boundary_point(np.angle(z))


def ccw_dist(lo, hi):
    """Anticlockwise angular distance from ``lo`` to ``hi`` in [0, 2*pi)."""
    return np.mod(np.asarray(hi) - np.asarray(lo), TWO_PI)


def in_arc(theta, lo, hi):
    """Membership in the half-open anticlockwise arc [lo, hi).

    ``lo == hi`` is read as the full circle.
    """
    span = ccw_dist(lo, hi)
    off = ccw_dist(lo, theta)
    full = span == 0
    return np.logical_or(full, off < span)


def angular_gap(x, y):
    """Shortest distance between two angles."""
    d = np.mod(np.asarray(x) - np.asarray(y), TWO_PI)
    return np.minimum(d, TWO_PI - d)


# ---------------------------------------------------------------------------
# array kernels on (a, b) pairs

def boundary_image(a, b, theta):
    """Angle of g(e^{i theta}) for g = (a, b); vectorised.

    Uses g(x) = x * conj(D)/D with D = conj(b) x + conj(a), so the result
    lies on the circle by construction.
    """
    x = np.exp(1j * np.asarray(theta, dtype=float))
    d = np.conj(b) * x + np.conj(a)
    return np.mod(np.asarray(theta, dtype=float) - 2.0 * np.angle(d), TWO_PI)


def denom_sq(a, b, theta):
    """|conj(b) e^{i theta} + conj(a)|^2 in a cancellation-free form.

    Assumes |a|^2 - |b|^2 = 1.
    """
    ra, rb = np.abs(a), np.abs(b)
    phase = np.asarray(theta) + np.angle(a) - np.angle(b)
    return 1.0 / (ra + rb) ** 2 + 4.0 * ra * rb * np.cos(0.5 * phase) ** 2


def log_boundary_derivative(a, b, theta):
    """log |g'(e^{i theta})| = -log |conj(b) e^{i theta} + conj(a)|^2."""
    return -np.log(denom_sq(a, b, theta))


def derivative_extrema(a, b, lo, hi):
    """Exact (min, max) of log|g'| over the anticlockwise arc [lo, hi].

    The derivative is unimodal in theta: its maximum sits at the angle
    where conj(b) e^{i theta} and conj(a) point in opposite directions and
    its minimum half a turn away, so the extremum over an arc is attained
    at an endpoint or at one of those two critical angles.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    v_lo = log_boundary_derivative(a, b, lo)
    v_hi = log_boundary_derivative(a, b, hi)
    vmin = np.minimum(v_lo, v_hi)
    vmax = np.maximum(v_lo, v_hi)
    shift = np.angle(a) - np.angle(b)
    t_max = np.mod(math.pi - shift, TWO_PI)
    t_min = np.mod(-shift, TWO_PI)
    span = ccw_dist(lo, hi)
    has_max = ccw_dist(lo, t_max) <= span
    has_min = ccw_dist(lo, t_min) <= span
    ra, rb = np.abs(a), np.abs(b)
    peak = 2.0 * np.log(ra + rb)
    trough = -np.log(1.0 / (ra + rb) ** 2 + 4.0 * ra * rb)
    vmax = np.where(has_max, peak, vmax)
    vmin = np.where(has_min, trough, vmin)
    return vmin, vmax


# ---------------------------------------------------------------------------
# Moebius maps

@dataclass(frozen=True)
class MoebiusMap:
    """Orientation preserving isometry of the disc in SU(1,1) normal form."""

    a: complex
    b: complex

    @classmethod
    def from_parts(cls, a_re, a_im, b_re, b_im):
        return cls(complex(a_re, a_im), complex(b_re, b_im)).normalized()

    @classmethod
    def identity(cls):
        return cls(1.0 + 0j, 0j)

    @classmethod
    def rotation(cls, phi):
        return cls(cmath.exp(0.5j * phi), 0j)

    @classmethod
    def translation(cls, direction, length):
        """Hyperbolic translation by ``length`` along the diameter at angle ``direction``."""
        return cls(complex(math.cosh(0.5 * length)),
                   math.sinh(0.5 * length) * cmath.exp(1j * direction))

    @classmethod
    def from_sl2(cls, m, base=1j):
        """Conjugate an SL(2,R) upper-half-plane matrix into the disc.

        The Cayley map z -> (z - base)/(z - conj(base)) sends ``base`` to 0.
        """
        (p, q), (r, s) = m
        c = np.array([[1.0, -base], [1.0, -np.conj(base)]], dtype=complex)
        ci = np.linalg.inv(c)
        g = c @ np.array([[p, q], [r, s]], dtype=complex) @ ci
        g = g / np.sqrt(np.linalg.det(g))
        a, b = g[0, 0], g[0, 1]
        # g is SU(1,1) up to a global sign; the a-entry fixes it
        return cls(complex(a), complex(b)).normalized()

    # -- algebra
    def normalized(self):
        n = abs(self.a) ** 2 - abs(self.b) ** 2
        if n <= 0:
            raise ValueError("matrix does not preserve the disc")
        s = math.sqrt(n)
        return MoebiusMap(self.a / s, self.b / s)

    def __matmul__(self, other):
        return compose(self, other)

    def inverse(self):
        return MoebiusMap(self.a.conjugate(), -self.b)

    @property
    def trace(self):
        return 2.0 * self.a.real

    def norm_defect(self):
        return abs(abs(self.a) ** 2 - abs(self.b) ** 2 - 1.0)

    def matrix(self):
        return np.array([[self.a, self.b], [self.b.conjugate(), self.a.conjugate()]])

    def parts(self):
        return [self.a.real, self.a.imag, self.b.real, self.b.imag]

    def is_identity(self, tol=1e-9):
        """True for +-identity (the group acts through PSU(1,1))."""
        return abs(self.b) < tol and abs(abs(self.a.real) - 1.0) < tol and abs(self.a.imag) < tol

    def close_to(self, other, tol=1e-9):
        d1 = abs(self.a - other.a) + abs(self.b - other.b)
        d2 = abs(self.a + other.a) + abs(self.b + other.b)
        return min(d1, d2) < tol

    def key(self, grid=config.BFS_GRID):
        """Hashable key up to sign, on a rounded grid."""
        a, b = self.a, self.b
        if a.real < -0.5 * grid or (abs(a.real) <= 0.5 * grid and a.imag < 0):
            a, b = -a, -b
        return (round(a.real / grid), round(a.imag / grid),
                round(b.real / grid), round(b.imag / grid))

    # -- action
    def __call__(self, z):
        return (self.a * z + self.b) / (self.b.conjugate() * z + self.a.conjugate())

    def apply_boundary(self, theta):
        return as_boundary_point(boundary_image(self.a, self.b, theta))

    def boundary_derivative(self, theta):
        return 1.0 / denom_sq(self.a, self.b, theta)

    def log_boundary_derivative(self, theta):
        return log_boundary_derivative(self.a, self.b, theta)

    def disc_derivative(self, z):
        return 1.0 / (self.b.conjugate() * z + self.a.conjugate()) ** 2

    def displacement(self):
        """d(0, g 0)."""
        return 2.0 * math.log(abs(self.a) + abs(self.b))

    def is_parabolic(self, tol=1e-9):
        return abs(abs(self.trace) - 2.0) < tol

    def fixed_points_boundary(self):
        """Boundary fixed points (angles) of a hyperbolic or parabolic map."""
        # fixed points solve conj(b) z^2 + (conj(a) - a) z - b = 0
        if abs(self.b) < 1e-15:
            return []
        c2, c1, c0 = self.b.conjugate(), self.a.conjugate() - self.a, -self.b
        disc = cmath.sqrt(c1 * c1 - 4 * c2 * c0)
        roots = [(-c1 + disc) / (2 * c2), (-c1 - disc) / (2 * c2)]
        out = []
        for r in roots:
            if abs(abs(r) - 1.0) < 1e-6:
                t = angle_of(r)
                if all(angular_gap(t, s) > 1e-9 for s in out):
                    out.append(t)
        return out


def compose(g: MoebiusMap, h: MoebiusMap) -> MoebiusMap:
    """Matrix product g h (apply h first).

    No renormalisation: |a|^2 - |b|^2 cancels badly once the entries are
    large, while the product of unimodular factors stays unimodular to a
    relative k*eps after k factors.
    """
    a = g.a * h.a + g.b * h.b.conjugate()
    b = g.a * h.b + g.b * h.a.conjugate()
    return MoebiusMap(a, b)


def inverse(g: MoebiusMap) -> MoebiusMap:
    return g.inverse()


def apply_boundary(g: MoebiusMap, theta):
    return g.apply_boundary(theta)


def boundary_derivative(g: MoebiusMap, theta):
    return g.boundary_derivative(theta)


def word_product(maps):
    """Ordered product m0 m1 ... m_{k-1}."""
    out = MoebiusMap.identity()
    for m in maps:
        out = compose(out, m)
    return out


# ---------------------------------------------------------------------------
# metric

def disc_distance(z, w):
    """Hyperbolic distance (curvature -1)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    r = np.abs(z - w) / np.abs(1.0 - np.conj(w) * z)
    r = np.minimum(r, 1.0 - 1e-17)
    out = 2.0 * np.arctanh(r)
    return float(out) if out.ndim == 0 else out


def distance_from_origin(z):
    return disc_distance(0j, z)


def poisson_kernel(x, theta):
    """P(x, xi) = (1 - |x|^2)/|xi - x|^2."""
    xi = np.exp(1j * np.asarray(theta, dtype=float))
    x = np.asarray(x, dtype=complex)
    out = (1.0 - np.abs(x) ** 2) / np.abs(xi - x) ** 2
    return float(out) if np.ndim(out) == 0 else out


def busemann(theta, a, b):
    """B_xi(a, b) = log P(b, xi) - log P(a, xi)."""
    return float(np.log(poisson_kernel(b, theta)) - np.log(poisson_kernel(a, theta)))


# ---------------------------------------------------------------------------
# geodesics

LEFT, RIGHT, ON = "left", "right", "on"


@dataclass(frozen=True)
class OrientedGeodesic:
    """Complete oriented geodesic from ``src`` (gamma^-) to ``dst`` (gamma^+).

    Side tests use F(z) = cos(h)(1 + |z|^2) - 2 Re(z e^{-i mu}), where mu
    and h are the midpoint and half-length of the boundary arc running
    anticlockwise from ``dst`` to ``src``; F < 0 exactly on the left.  The
    form degrades gracefully to a line test when the endpoints are antipodal.
    """

    src: float
    dst: float

    def __post_init__(self):
        object.__setattr__(self, "src", as_boundary_point(self.src))
        object.__setattr__(self, "dst", as_boundary_point(self.dst))
        if angular_gap(self.src, self.dst) <= config.EPS_DISTINCT:
            raise DegenerateGeodesic("geodesic endpoints coincide", src=self.src, dst=self.dst)

    @property
    def left_arc(self):
        span = float(ccw_dist(self.dst, self.src))
        return self.dst, span

    @property
    def _mu_h(self):
        lo, span = self.left_arc
        return lo + 0.5 * span, 0.5 * span

    def is_diameter(self):
        return abs(angular_gap(self.src, self.dst) - math.pi) < config.EPS_ANTIPODAL

    def circle(self):
        """(center, radius) of the carrying Euclidean circle, or None for a diameter."""
        if self.is_diameter():
            return None
        mu, h = self._mu_h
        c = cmath.exp(1j * mu) / math.cos(h)
        return c, abs(math.tan(h))

    def signed(self, z):
        """F(z); negative on the left."""
        mu, h = self._mu_h
        z = np.asarray(z, dtype=complex)
        return math.cos(h) * (1.0 + np.abs(z) ** 2) - 2.0 * np.real(z * cmath.exp(-1j * mu))

    def sinh_distance(self, z):
        """sinh of the signed hyperbolic distance, positive on the left."""
        z = np.asarray(z, dtype=complex)
        _, h = self._mu_h
        return -self.signed(z) / (math.sin(h) * (1.0 - np.abs(z) ** 2))

    def side_of(self, z, eps=config.EPS_ON):
        s = float(self.sinh_distance(z))
        if abs(s) <= eps:
            return ON
        return LEFT if s > 0 else RIGHT

    def side_of_boundary(self, theta, eps=config.EPS_ON):
        """Side of a boundary point: left iff it lies on the arc dst -> src."""
        lo, span = self.left_arc
        off = float(ccw_dist(lo, theta))
        if min(off, span - off, TWO_PI - off) <= eps and (off <= eps or abs(span - off) <= eps or TWO_PI - off <= eps):
            return ON
        return LEFT if off < span else RIGHT

    def _frame(self):
        """Moebius map sending the real diameter (-1 -> 1) onto this geodesic."""
        mu, h = self._mu_h
        if h > 0.5 * math.pi:
            nu, hs = mu + math.pi, math.pi - h
        else:
            nu, hs = mu, h
        # closest point to 0 sits on the ray at angle nu
        rho = (1.0 - math.sin(hs)) / math.cos(hs) if hs < 0.5 * math.pi - 1e-15 else 0.0
        s = 2.0 * math.atanh(rho)
        delta = nu + 0.5 * math.pi
        frame = compose(MoebiusMap.translation(nu, s), MoebiusMap.rotation(delta))
        if angular_gap(frame.apply_boundary(0.0), self.dst) > 1e-6:
            frame = compose(MoebiusMap.translation(nu, s), MoebiusMap.rotation(delta + math.pi))
        return frame

    def point_at(self, t):
        """Unit speed parametrisation with t = 0 the point closest to the origin."""
        return self._frame()(math.tanh(0.5 * t))

    def param_of(self, z):
        w = self._frame().inverse()(z)
        return 2.0 * math.atanh(max(-1.0 + 1e-16, min(1.0 - 1e-16, w.real)))

    def image(self, g: MoebiusMap):
        return OrientedGeodesic(g.apply_boundary(self.src), g.apply_boundary(self.dst))

    def reversed(self):
        return OrientedGeodesic(self.dst, self.src)

    def euclidean_gap_to_origin(self):
        """Euclidean distance from 0 to the geodesic."""
        h = 0.5 * float(angular_gap(self.src, self.dst))
        if abs(h - 0.5 * math.pi) < 1e-15:
            return 0.0
        return (1.0 - math.sin(h)) / math.cos(h)

    def crosses_segment(self, p, q, eps=config.EPS_ON):
        """Intersection with the geodesic segment [p, q], if any.

        ``p`` and ``q`` may lie on the boundary circle.  Returns the crossing
        point, or None when both ends are strictly on the same side.
        """
        fp, fq = float(self.signed(p)), float(self.signed(q))
        if abs(fp) <= eps:
            return complex(p)
        if abs(fq) <= eps:
            return complex(q)
        if (fp > 0) == (fq > 0):
            return None
        return _segment_root(self, complex(p), complex(q))


def from_endpoints(src, dst):
    return OrientedGeodesic(src, dst)


def _segment_root(gamma, p, q):
    """Solve F = 0 on the segment [p, q] after moving p to the origin."""
    if abs(p) >= 1.0 - 1e-15:
        p, q = q, p
    if abs(p) >= 1.0 - 1e-15:
        # ideal segment: it is itself a complete geodesic
        other = OrientedGeodesic(angle_of(p), angle_of(q))
        return _geodesic_intersection(gamma, other)
    tau = MoebiusMap(1.0 + 0j, -p).normalized()       # tau(p) = 0
    g2 = gamma.image(tau)
    u = tau(q)
    ru = abs(u)
    direction = u / ru
    mu, h = g2._mu_h
    ch = math.cos(h)
    k = (direction * cmath.exp(-1j * mu)).real
    # ch (1 + t^2) - 2 t k = 0 on t in [0, ru]
    if abs(ch) < 1e-15:
        t = 0.0
    else:
        disc = max(k * k - ch * ch, 0.0)
        roots = [(k - math.sqrt(disc)) / ch, (k + math.sqrt(disc)) / ch]
        cands = [r for r in roots if -1e-12 <= r <= ru + 1e-12]
        if not cands:
            return None
        t = min(cands, key=lambda r: abs(r - 0.5 * ru))
    return tau.inverse()(t * direction)


def _geodesic_intersection(g1, g2):
    f = [float(g1.signed(on_circle(g2.src))), float(g1.signed(on_circle(g2.dst)))]
    if (f[0] > 0) == (f[1] > 0):
        return None
    # bisect along g2 in its own parametrisation
    lo, hi = -60.0, 60.0
    flo = float(g1.signed(g2.point_at(lo)))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = float(g1.signed(g2.point_at(mid)))
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return g2.point_at(0.5 * (lo + hi))


def geodesic_through(z, w, ideal_tol=1e-12):
    """Complete geodesic through z and w, oriented from z to w.

    Either point may sit on the boundary circle.
    """
    z, w = complex(z), complex(w)
    z_ideal = abs(z) >= 1.0 - ideal_tol
    w_ideal = abs(w) >= 1.0 - ideal_tol
    if z_ideal and w_ideal:
        return OrientedGeodesic(angle_of(z), angle_of(w))
    if z_ideal:
        return geodesic_through(w, z, ideal_tol).reversed()
    tau = MoebiusMap(1.0 + 0j, -z).normalized()
    u = tau(w)
    d = u / abs(u)
    ti = tau.inverse()
    return OrientedGeodesic(angle_of(ti(-d)), angle_of(ti(d)))


def geodesic_direction_at(z, w):
    """Unit tangent direction (angle) at z of the geodesic from z towards w.

    ``w`` may be a boundary point given as a unit complex number.
    """
    tau = MoebiusMap(1.0 + 0j, -complex(z)).normalized()
    u = tau(w)
    # tau'(z) is a positive real multiple of 1/(1-|z|^2), so directions at z
    # match directions at 0 after the map
    return float(np.angle(u))
