"""Empirical large-deviation checks.

Tails of the growth rate are measured through the Birkhoff average
(1/n) log|(f^n)'xi| of Lebesgue-random boundary points; the comparison
between t_n and log|(f^n)'gamma^+| (bounded, or 2 log n in the cusped case)
licenses the substitution and is re-checked on a subsample in slow mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .cylinders import at_least_prune, at_most_prune, iter_cylinders, max_log_derivative, \
    min_log_derivative
from .errors import CalibrationFailed, ZeroHits
from .geodesics import growth_trace, neighbour_set, sample_geodesics
from .hyperbolic import TWO_PI

UPPER, LOWER = "upper", "lower"


@dataclass
class TailEstimate:
    alpha: float
    side: str
    n: np.ndarray
    m: np.ndarray               # estimated measure (normalised to 1)
    se: np.ndarray
    hits: np.ndarray
    method: str
    slope: float = float("nan")
    intercept: float = float("nan")
    samples: int = 0

    def usable(self, min_hits=50):
        return self.hits >= min_hits

    def rows(self):
        return [(self.alpha, self.side, int(n), float(m), float(s), int(h), self.method)
                for n, m, s, h in zip(self.n, self.m, self.se, self.hits)]


def birkhoff_sums(f, n_list, samples, seed, chunk=250_000):
    """S_n(xi) = log|(f^n)'xi| at every n in ``n_list`` for uniform xi.

    Returns an array of shape (samples, len(n_list)).  The stream is
    split into fixed-size chunks seeded from ``seed`` so the result does not
    depend on how the work is divided.
    """
    n_list = np.asarray(sorted(n_list), dtype=int)
    out = np.empty((samples, len(n_list)))
    ss = np.random.SeedSequence(seed)
    kids = ss.spawn((samples + chunk - 1) // chunk)
    for c, kid in enumerate(kids):
        lo = c * chunk
        hi = min(samples, lo + chunk)
        rng = np.random.default_rng(kid)
        x = rng.uniform(0.0, TWO_PI, hi - lo)
        total = np.zeros(hi - lo)
        j = 0
        for k in range(1, n_list[-1] + 1):
            x, ld, _ = f.step(x)
            total += ld
            if k == n_list[j]:
                out[lo:hi, j] = total
                j += 1
    return out


def _fit_slope(n, m, hits, samples, min_hits):
    ok = (hits >= min_hits) & (m > 0)
    if ok.sum() < 2:
        return float("nan"), float("nan")
    x = n[ok].astype(float)
    y = -np.log(m[ok])
    p = m[ok]
    w = samples * p / np.maximum(1.0 - p, 1e-12)     # 1 / var(log m_hat)
    A = np.vstack([np.ones_like(x), x]).T * np.sqrt(w)[:, None]
    coef, *_ = np.linalg.lstsq(A, y * np.sqrt(w), rcond=None)
    return float(coef[1]), float(coef[0])


def tail_from_sums(sums, n_list, alpha, side, samples, min_hits=50, raise_empty=False):
    n = np.asarray(sorted(n_list), dtype=int)
    avg = sums / n[None, :]
    hit = avg >= alpha if side == UPPER else avg <= alpha
    hits = hit.sum(axis=0)
    m = hits / samples
    se = np.sqrt(m * (1 - m) / samples)
    if raise_empty and np.any(hits == 0):
        k = int(n[np.argmax(hits == 0)])
        raise ZeroHits(f"no sample in the tail at n={k}", n=k,
                       upper_bound=3.0 / samples)      # 95% rule of three
    slope, icpt = _fit_slope(n, m, hits, samples, min_hits)
    return TailEstimate(alpha, side, n, m, se, hits, "monte-carlo", slope, icpt, samples)


def birkhoff_tail_mc(f, alpha, side, n_list, samples, seed, min_hits=50, sums=None):
    if samples < 10_000:
        raise ValueError("need at least 1e4 samples")
    if sums is None:
        sums = birkhoff_sums(f, n_list, samples, seed)
    return tail_from_sums(sums, n_list, alpha, side, samples, min_hits, raise_empty=True)


def cylinder_tail(part, alpha, n, side=UPPER, cap=None):
    """Total length / 2pi of cylinders whose derivative range reaches the tail.

    Upper side: sup log|(f^n)'| >= alpha n; lower side: inf <= alpha n.
    Subtrees that cannot reach the tail are pruned with the global
    one-step derivative bounds.
    """
    if side == UPPER:
        prune = at_least_prune(alpha, max_log_derivative(part))
        keep = lambda b: b.dmax >= alpha * n
    else:
        prune = at_most_prune(alpha, min_log_derivative(part))
        keep = lambda b: b.dmin <= alpha * n
    total = 0.0
    count = 0
    for batch in iter_cylinders(part, n, prune=prune, cap=cap):
        k = keep(batch)
        total += float(batch.width[k].sum())
        count += int(k.sum())
    return total / TWO_PI, count


def distortion(part, n, cap=None):
    """max over depth-n cylinders of log(sup|(f^n)'| / inf|(f^n)'|)."""
    worst = 0.0
    for batch in iter_cylinders(part, n, cap=cap):
        worst = max(worst, float((batch.dmax - batch.dmin).max()))
    return worst


# ---------------------------------------------------------------------------
# two-sided tail bound with distortion constants

def bound_threshold(alpha, kappa0=1.0, parabolic=False):
    n0 = kappa0 / alpha
    if parabolic:
        n = 3                    # log n / n decreases from n = e on
        while math.log(n) / n > alpha / 3:
            n += 1
        n0 = max(n0, n)
    return n0


def _cells(tails, spectrum_at, parabolic, min_hits, use_n2=True, kappa0=1.0):
    rows = []
    for t in tails:
        I, Ip = spectrum_at(t.alpha)
        n0 = bound_threshold(t.alpha, kappa0, parabolic)
        for n, m, h in zip(t.n, t.m, t.hits):
            if h < min_hits or n < n0:
                continue
            r = math.log(m) + I * n
            if parabolic and use_n2:
                r -= 2.0 * math.log(n)
            rows.append((t.alpha, int(n), r, abs(Ip)))
    return rows


def fit_kappas(tails, spectrum_at, parabolic=False, min_hits=50, use_n2=True):
    """Smallest log kappa_1 + log kappa_2 >= 0 covering every calibration cell.

    Each cell (alpha, n) requires log m_n + I n [- 2 log n] <= x + |I'| y
    with x = log kappa_1, y = log kappa_2.
    """
    cells = _cells(tails, spectrum_at, parabolic, min_hits, use_n2)
    if not cells:
        raise CalibrationFailed("no calibration cell has enough hits")
    A = np.array([[-1.0, -c[3]] for c in cells])
    b = np.array([-c[2] for c in cells])
    res = linprog([1.0, 1.0], A_ub=A, b_ub=b, bounds=[(0, None), (0, None)], method="highs")
    if not res.success:
        raise CalibrationFailed(f"linear program failed: {res.message}")
    x, y = res.x
    return math.exp(x), math.exp(y)


def tail_bound_margin(tails, spectrum_at, kappa1, kappa2, parabolic=False, min_hits=50,
                     use_n2=True):
    """Per-cell margin log m_n - (log k1 + |I'| log k2 [+ 2 log n] - I n)."""
    out = []
    for alpha, n, r, ip in _cells(tails, spectrum_at, parabolic, min_hits, use_n2):
        out.append({"alpha": alpha, "n": n,
                    "margin": r - math.log(kappa1) - ip * math.log(kappa2)})
    return out


# ---------------------------------------------------------------------------
# slow mode: the comparison bound on actual cutting sequences

def comparison_sweep(dom, f, count, n, seed, radius=None):
    """Per-geodesic |t_k - s_k| for k = 0..n; array of shape (count, n+1)."""
    nb = neighbour_set(dom)
    geos = sample_geodesics(dom, count, seed, radius=radius, f=f)
    out = np.empty((count, n + 1))
    adj = True
    for i, g in enumerate(geos):
        tr = growth_trace(dom, f, g, n, neighbours=nb)
        out[i] = np.abs(tr.t - tr.s)
        adj = adj and all(tr.adjacency_ok)
    return out, adj


def fit_comparison_constant(dev, parabolic):
    """C0 with dev_k <= C0 (+ 2 log k in the cusped case) for all k >= 1."""
    k = np.arange(dev.shape[1])
    worst = dev.max(axis=0)
    if parabolic:
        worst = worst[1:] - 2.0 * np.log(k[1:])
    else:
        worst = worst[1:]
    return float(worst.max())


@dataclass
class LdpReport:
    group: str
    alphas: list
    tails: list
    rates: dict                 # alpha -> I(alpha)
    slopes: dict                # (alpha, side) -> fitted slope
    kappas: tuple = None
    margins: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def rows(self):
        out = []
        for t in self.tails:
            out.extend(t.rows())
        return out


def default_alphas(spectrum, fractions=(0.2, 0.3)):
    """(alpha, side) pairs on each side of alpha_G at fractions of the span."""
    aG, lo, hi = spectrum.alpha_G, spectrum.alpha_lo, spectrum.alpha_hi
    out = [(aG + c * (hi - aG), UPPER) for c in fractions]
    if aG > lo:
        out += [(aG - c * (aG - lo), LOWER) for c in fractions]
    return out


def spectrum_lookup(spectrum):
    """alpha -> (I(alpha), I'(alpha)); I' = 1 - beta(alpha) by the Legendre identities."""
    from .thermo import legendre_data

    def at(alpha):
        if spectrum.alpha_G and abs(alpha - spectrum.alpha_G) < 1e-12:
            return 0.0, 0.0
        beta, _, I = legendre_data(spectrum.fit, alpha)
        return I, 1.0 - beta
    return at


def simulate(f, part, spectrum, cells, hcfg, cylinder_n=8, cap=None):
    """Tail tables for every (alpha, side) cell and the slope comparison."""
    n_list = sorted(hcfg.n_list)
    at = spectrum_lookup(spectrum)
    tails, rates, slopes, failures = [], {}, {}, []
    sums = None
    if hcfg.method in ("mc", "both"):
        sums = birkhoff_sums(f, n_list, hcfg.samples, hcfg.seed)
    for alpha, side in cells:
        try:
            rates[alpha] = at(alpha)[0]
        except Exception as exc:            # outside the spectrum: I = +inf
            rates[alpha] = math.inf
            failures.append({"alpha": alpha, "side": side, "error": type(exc).__name__})
        if sums is not None:
            try:
                t = tail_from_sums(sums, n_list, alpha, side, hcfg.samples, hcfg.min_hits,
                                   raise_empty=True)
            except ZeroHits as exc:
                failures.append({"alpha": alpha, "side": side, "error": "ZeroHits",
                                 **exc.details})
                t = tail_from_sums(sums, n_list, alpha, side, hcfg.samples, hcfg.min_hits)
            tails.append(t)
            slopes[(alpha, side)] = t.slope
        if hcfg.method in ("cylinder", "both"):
            m, _ = cylinder_tail(part, alpha, cylinder_n, side, cap)
            tails.append(TailEstimate(alpha, side, np.array([cylinder_n]), np.array([m]),
                                      np.array([0.0]), np.array([0]), "cylinder"))
    return LdpReport(f.domain.name, [c[0] for c in cells], tails, rates, slopes,
                     failures=failures)


def calibrate(report, spectrum, parabolic, min_hits=50, held_out_every=2, use_n2=True):
    """Fit kappas on every other Monte-Carlo tail and record held-out margins."""
    at = spectrum_lookup(spectrum)
    mc = [t for t in report.tails if t.method == "monte-carlo"]
    cal = mc[::held_out_every]
    held = [t for i, t in enumerate(mc) if i % held_out_every]
    k1, k2 = fit_kappas(cal, at, parabolic, min_hits, use_n2)
    report.kappas = (k1, k2)
    report.margins = tail_bound_margin(held, at, k1, k2, parabolic, min_hits, use_n2)
    return report
