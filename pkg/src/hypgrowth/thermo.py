"""Pressure of -beta log|f'| and its Legendre transform.

Two estimators are provided.  ``cylinder_pressure`` gives a bracket from
exact per-cylinder derivative extrema; ``TransferOperator`` gives a fast
point estimate from a Galerkin (Ulam) discretisation of the weighted
transfer operator on a fine grid of bins subordinate to the Markov arcs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, isotonic_regression
from scipy.sparse.linalg import ArpackNoConvergence, eigs
from scipy.special import logsumexp

from .config import ThermoConfig
from .cylinders import iter_cylinders, part_image_lengths
from .errors import AlphaOutOfRange, PowerIterationStall
from .hyperbolic import TWO_PI, boundary_image, log_boundary_derivative


# ---------------------------------------------------------------------------
# cylinder brackets

def cylinder_pressure_many(part, betas, n, normalize=True, cap=None):
    """Brackets (P_inf, P_sup) at several betas from one enumeration.

    Each cylinder w of depth n contributes (ell_w / |(f^n)'|)^beta where
    ell_w is the normalised length of f^n(w).  At beta = 1 the sum then
    brackets sum_w |w| / 2 pi = 1, so the bracket contains 0 exactly as
    the change of variables formula demands.  ``normalize=False`` drops
    ell_w and gives the plain derivative sums.
    """
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    lo_acc = np.full(len(betas), -np.inf)
    hi_acc = np.full(len(betas), -np.inf)
    ell = np.log(part_image_lengths(part) / TWO_PI)
    for batch in iter_cylinders(part, n, cap=cap):
        le = ell[batch.last] if normalize else 0.0
        # log weight = beta (le - log|f'|); extremes come from dmin / dmax
        w_small = betas[:, None] * (le - batch.dmax)[None, :]
        w_big = betas[:, None] * (le - batch.dmin)[None, :]
        lo_terms = np.minimum(w_small, w_big)
        hi_terms = np.maximum(w_small, w_big)
        lo_acc = np.logaddexp(lo_acc, logsumexp(lo_terms, axis=1))
        hi_acc = np.logaddexp(hi_acc, logsumexp(hi_terms, axis=1))
    return lo_acc / n, hi_acc / n


def cylinder_pressure(part, beta, n, normalize=True, cap=None):
    lo, hi = cylinder_pressure_many(part, [beta], n, normalize, cap)
    return float(lo[0]), float(hi[0])


def richardson(values, ns):
    """Extrapolate v_n = P + c/n to n = infinity from the last two depths."""
    (n1, v1), (n2, v2) = sorted(zip(ns, values))[-2:]
    return (n2 * np.asarray(v2) - n1 * np.asarray(v1)) / (n2 - n1)


def extrapolated_bracket(part, betas, ns=(6, 7), normalize=True, cap=None):
    """Both bracket ends extrapolated in 1/n; not a certified bound."""
    los, his = zip(*(cylinder_pressure_many(part, betas, n, normalize, cap) for n in ns))
    lo, hi = richardson(los, ns), richardson(his, ns)
    return np.minimum(lo, hi), np.maximum(lo, hi)


def periodic_pressure(part, betas, n, cap=None):
    """(1/n) log sum over period-n points of |(f^n)'|^-beta.

    Every cylinder whose last symbol may be followed by its first carries
    exactly one fixed point of f^n, with multiplier exp(l) where l is the
    translation length of the cylinder's matrix (zero for parabolic words).
    """
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    acc = np.full(len(betas), -np.inf)
    for batch in iter_cylinders(part, n, cap=cap):
        closed = part.M[batch.last, batch.first] == 1
        ell = 2.0 * np.arccosh(np.maximum(np.abs(batch.a.real[closed]), 1.0))
        if len(ell):
            acc = np.logaddexp(acc, logsumexp(-betas[:, None] * ell[None, :], axis=1))
    return acc / n


# ---------------------------------------------------------------------------
# transfer operator

class TransferOperator:
    """Galerkin matrix L_ij = (1/h_i) int_{B_j cap f^-1 B_i} |f'|^(1-beta).

    The integral is taken in image coordinates, where it reads
    int |(g^-1)'(y)|^beta dy over the part of f(B_j) inside B_i, with
    Gauss-Legendre nodes on each piece.  Only the weights depend on beta.
    At beta = 1 the vector of bin lengths is a left eigenvector with
    eigenvalue 1.
    """

    def __init__(self, part, k=2048, nodes=4):
        self.part = part
        per = np.maximum(1, np.rint(k * part.width / TWO_PI).astype(int))
        edges = []
        owner = []
        for a in range(part.size):
            t = part.lo[a] + part.width[a] * np.arange(per[a]) / per[a]
            edges.append(t)
            owner.append(np.full(per[a], a))
        lo = np.mod(np.concatenate(edges), TWO_PI)
        owner = np.concatenate(owner)
        order = np.argsort(lo)
        self.lo = lo[order]
        self.owner = owner[order]
        self.k = len(self.lo)
        self.h = np.diff(np.concatenate([self.lo, [self.lo[0] + TWO_PI]]))
        self._build(nodes)

    def bin_of(self, y):
        i = np.searchsorted(self.lo, np.mod(y, TWO_PI), side="right") - 1
        return np.mod(i, self.k)

    def _build(self, nodes):
        part = self.part
        a = part._a[self.owner]
        b = part._b[self.owner]
        x0 = self.lo
        x1 = self.lo + self.h
        y0 = boundary_image(a, b, x0)
        # orientation preserving, so the image runs anticlockwise from y0
        y1 = boundary_image(a, b, x1)
        span = np.mod(y1 - y0, TWO_PI)
        span = np.where(span < 1e-15, TWO_PI, span)
        e2 = np.concatenate([self.lo, self.lo + TWO_PI, self.lo + 2 * TWO_PI])
        k0 = np.searchsorted(e2, y0, side="right")
        k1 = np.searchsorted(e2, y0 + span, side="left")
        cnt = np.maximum(k1 - k0, 0) + 1
        src = np.repeat(np.arange(self.k), cnt)
        pos = np.arange(len(src)) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        kk = np.repeat(k0, cnt) + pos
        left = np.where(pos == 0, np.repeat(y0, cnt), e2[np.minimum(kk - 1, len(e2) - 1)])
        last = pos == np.repeat(cnt - 1, cnt)
        right = np.where(last, np.repeat(y0 + span, cnt), e2[np.minimum(kk, len(e2) - 1)])
        keep = right - left > 0
        src, left, right = src[keep], left[keep], right[keep]
        dst = self.bin_of(0.5 * (left + right))
        xg, wg = np.polynomial.legendre.leggauss(nodes)
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        ys = mid[:, None] + half[:, None] * xg[None, :]
        ia = np.conj(part._a[self.owner[src]])[:, None]
        ib = -part._b[self.owner[src]][:, None]
        self._logs = log_boundary_derivative(ia, ib, ys)     # log|(g^-1)'|
        self._w = half[:, None] * wg[None, :]
        self._rows, self._cols = dst, src

    def matrix(self, beta):
        vals = np.sum(self._w * np.exp(beta * self._logs), axis=1) / self.h[self._rows]
        return sparse.csr_matrix((vals, (self._rows, self._cols)), shape=(self.k, self.k))

    def spectral_radius(self, beta, tol=1e-10, maxiter=10_000, fallback=True):
        L = self.matrix(beta)
        rho, lo, hi, ok = power_iteration(L, tol, maxiter)
        if ok:
            return rho
        if fallback:
            try:
                # near-degenerate cusp modes slow the power method down; a
                # Krylov solve is accepted only inside the certified bracket
                val = eigs(L, k=1, which="LM", return_eigenvectors=False, tol=1e-12,
                           maxiter=100 * maxiter, ncv=min(40, L.shape[0] - 2))
                r = float(abs(val[0]))
                if lo * (1 - 1e-9) <= r <= hi * (1 + 1e-9):
                    return r
            except ArpackNoConvergence:
                pass
        raise PowerIterationStall("power iteration did not converge", beta=beta,
                                  lower=lo, upper=hi)

    def pressure(self, beta, **kw):
        return math.log(self.spectral_radius(beta, **kw))


def power_iteration(L, tol=1e-10, maxiter=10_000):
    """Perron root of a nonnegative matrix with Collatz-Wielandt bounds.

    Returns (estimate, lower, upper, converged).
    """
    n = L.shape[0]
    v = np.full(n, 1.0 / n)
    lo, hi = 0.0, np.inf
    for it in range(maxiter):
        w = L @ v
        pos = v > 1e-300
        r = w[pos] / v[pos]
        lo, hi = float(r.min()), float(r.max())
        s = w.sum()
        if s <= 0:
            return 0.0, 0.0, 0.0, True
        v = w / s
        if hi - lo <= tol * max(hi, 1e-300):
            return 0.5 * (lo + hi), lo, hi, True
    return 0.5 * (lo + hi), lo, hi, False


_OPERATORS = {}


def transfer_operator(part, k=2048, nodes=4):
    key = (id(part), k, nodes)
    op = _OPERATORS.get(key)
    if op is None or op.part is not part:
        op = TransferOperator(part, k, nodes)
        _OPERATORS[key] = op
    return op


def transfer_pressure(part, beta, k=2048, nodes=4, tol=1e-10, maxiter=10_000):
    return transfer_operator(part, k, nodes).pressure(beta, tol=tol, maxiter=maxiter)


# ---------------------------------------------------------------------------
# pressure curve

@dataclass
class PressureCurve:
    group: str
    betas: np.ndarray
    P_hat: np.ndarray
    estimator: str = "transfer-operator"
    parabolic: bool = False
    brackets: dict = field(default_factory=dict)    # n -> (betas, P_inf, P_sup)
    extrapolated: tuple = None                      # (betas, lo, hi) in 1/n
    config: dict = field(default_factory=dict)

    def value(self, beta):
        return float(np.interp(beta, self.betas, self.P_hat))

    def second_differences(self):
        b, p = self.betas, self.P_hat
        h1 = np.diff(b)[:-1]
        h2 = np.diff(b)[1:]
        return 2 * (h2 * p[:-2] - (h1 + h2) * p[1:-1] + h1 * p[2:]) / (h1 * h2 * (h1 + h2))

    def rows(self):
        out = []
        for n, (bs, lo, hi) in sorted(self.brackets.items()):
            for bb, l, h in zip(bs, lo, hi):
                out.append((float(bb), int(n), float(l), float(h), self.value(bb)))
        return out


def beta_grid(cfg):
    coarse = np.arange(cfg.beta_min, cfg.beta_max + 0.5 * cfg.beta_step, cfg.beta_step)
    fine = np.arange(cfg.refine_lo, cfg.refine_hi + 0.5 * cfg.refine_step, cfg.refine_step)
    g = np.unique(np.round(np.concatenate([coarse, fine]), 10))
    return g


def pressure_curve(part, cfg=None, checkpoints=(), bracket_n=()):
    """P_hat on the beta grid, with cylinder brackets at checkpoint betas."""
    cfg = cfg or ThermoConfig()
    betas = beta_grid(cfg)
    op = transfer_operator(part, cfg.bins, cfg.quad_nodes)
    P = np.array([op.pressure(b, tol=cfg.power_tol, maxiter=cfg.power_maxiter) for b in betas])
    curve = PressureCurve(part.f.domain.name, betas, P, parabolic=bool(part.f.domain.cusps),
                          config=cfg.to_dict())
    if checkpoints:
        cps = np.asarray(checkpoints, dtype=float)
        for n in bracket_n:
            lo, hi = cylinder_pressure_many(part, cps, n, cap=cfg.cylinder_cap)
            curve.brackets[int(n)] = (cps, lo, hi)
        if cfg.extrapolation == "richardson" and len(bracket_n) >= 2:
            ns = sorted(bracket_n)[-2:]
            lo = richardson([curve.brackets[n][1] for n in ns], ns)
            hi = richardson([curve.brackets[n][2] for n in ns], ns)
            curve.extrapolated = (cps, np.minimum(lo, hi), np.maximum(lo, hi))
    return curve


# ---------------------------------------------------------------------------
# Legendre transform

@dataclass
class SlopeFit:
    """Monotone fit Q of P' and the primitive of Q anchored on the data."""

    Q: PchipInterpolator
    Pfit: object
    beta_lo: float
    beta_hi: float

    def P(self, beta):
        return self.Pfit(beta)

    def alpha_range(self):
        return float(-self.Q(self.beta_hi)), float(-self.Q(self.beta_lo))


def fit_slopes(curve, beta_cap=None):
    """Isotonic slopes of P_hat at interval midpoints, interpolated monotonically."""
    b, p = curve.betas, curve.P_hat
    if beta_cap is not None:
        keep = b <= beta_cap + 1e-12
        b, p = b[keep], p[keep]
    mids = 0.5 * (b[1:] + b[:-1])
    slopes = np.diff(p) / np.diff(b)
    iso = isotonic_regression(slopes, weights=np.diff(b), increasing=True).x
    Q = PchipInterpolator(mids, iso, extrapolate=True)
    prim = Q.antiderivative()
    # anchor the primitive by least squares on the data
    c = float(np.mean(p - prim(b)))
    Pfit = lambda x, prim=prim, c=c: prim(x) + c
    return SlopeFit(Q, Pfit, float(mids[0]), float(mids[-1]))


def legendre_data(fit, alpha):
    """(beta(alpha), b(alpha), I(alpha)) from -P'(beta) = alpha."""
    if alpha == 0:
        raise AlphaOutOfRange("alpha = 0 is excluded from the Legendre formulas", alpha=alpha)
    amin, amax = fit.alpha_range()
    if not (amin < alpha < amax):
        raise AlphaOutOfRange(f"alpha {alpha} outside ({amin}, {amax})", alpha=alpha,
                              lower=amin, upper=amax)
    beta = brentq(lambda x: -float(fit.Q(x)) - alpha, fit.beta_lo, fit.beta_hi, xtol=1e-14,
                  rtol=1e-15, maxiter=500)
    P = float(fit.P(beta))
    bval = P / alpha + beta
    return beta, bval, alpha * (1.0 - bval)


def alpha_G(fit):
    return float(-fit.Q(1.0))


@dataclass
class SpectrumCurve:
    group: str
    alphas: np.ndarray
    beta: np.ndarray
    b: np.ndarray
    I: np.ndarray
    I_prime: np.ndarray
    b_prime: np.ndarray
    alpha_G: float
    alpha_lo: float
    alpha_hi: float
    fit: SlopeFit = None

    def I_second(self):
        a, I = self.alphas, self.I
        h = np.diff(a)
        return 2 * (h[1:] * I[:-2] - (h[:-1] + h[1:]) * I[1:-1] + h[:-1] * I[2:]) / (
            h[:-1] * h[1:] * (h[:-1] + h[1:]))

    def rows(self):
        return list(zip(self.alphas, self.beta, self.b, self.I, self.I_prime))

    def rate(self, alpha):
        """I(alpha), +inf outside the spectrum."""
        if alpha < self.alpha_lo or alpha > self.alpha_hi:
            return math.inf
        if alpha == 0:
            return 0.0
        return legendre_data(self.fit, alpha)[2]


def alpha_bounds(part, n, cap=None):
    """(min_w sup log|(f^n)'| / n, max_w inf log|(f^n)'| / n)."""
    lo, hi = np.inf, -np.inf
    for batch in iter_cylinders(part, n, cap=cap):
        lo = min(lo, float(batch.dmax.min()))
        hi = max(hi, float(batch.dmin.max()))
    return lo / n, hi / n


def spectrum_curve(curve, cfg=None, points=None, bounds=None):
    """Legendre data on an alpha grid inside the attainable range.

    With cusps the fit is restricted to beta below the configured cap and
    alpha = 0 (the typical value) is excluded.
    """
    cfg = cfg or ThermoConfig()
    points = points or cfg.alpha_points
    cap = cfg.parabolic_beta_cap if curve.parabolic else None
    fit = fit_slopes(curve, beta_cap=cap)
    amin, amax = fit.alpha_range()
    if bounds is not None:
        amin, amax = max(amin, bounds[0]), min(amax, bounds[1])
    d = cfg.alpha_margin
    grid = np.linspace(amin + d, amax - d, points)
    grid = grid[grid != 0]
    beta, bval, I = (np.array(v) for v in zip(*(legendre_data(fit, a) for a in grid)))
    eps = 1e-5
    bp = []
    for a in grid:
        up = legendre_data(fit, a + eps)[1] if a + eps < amax else None
        dn = legendre_data(fit, a - eps)[1] if a - eps > amin else None
        if up is not None and dn is not None:
            bp.append((up - dn) / (2 * eps))
        else:
            bp.append(np.nan)
    aG = alpha_G(fit) if not curve.parabolic else 0.0
    return SpectrumCurve(curve.group, grid, beta, bval, I, np.gradient(I, grid), np.array(bp), aG,
                         amin, amax, fit)
