"""Cylinder sets of the Markov coding.

Cylinders are produced in numpy batches, depth first over chunks so memory
stays bounded.  For a word w of length n the batch stores the Moebius map
g_w (equal to f^n on the cylinder), the arc of the cylinder, and the exact
range of log|(f^n)'| over that arc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Overflow
from .hyperbolic import (TWO_PI, boundary_image, ccw_dist, denom_sq,
                         derivative_extrema)

CHUNK = 1 << 18


@dataclass
class CylinderBatch:
    """Parallel arrays describing cylinders of one depth."""

    depth: int
    first: np.ndarray
    last: np.ndarray
    a: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    width: np.ndarray
    dmin: np.ndarray            # min over the arc of log|(f^n)'|
    dmax: np.ndarray
    words: np.ndarray = None    # (count, depth) when requested

    def __len__(self):
        return len(self.lo)

    def take(self, idx):
        w = None if self.words is None else self.words[idx]
        return CylinderBatch(self.depth, self.first[idx], self.last[idx], self.a[idx],
                             self.b[idx], self.lo[idx], self.width[idx],
                             self.dmin[idx], self.dmax[idx], w)

    def image_length(self, part):
        """Length of f^n(cylinder), the union of the successor arcs of ``last``."""
        return part_image_lengths(part)[self.last]

    def word(self, k):
        return None if self.words is None else self.words[k].tolist()


def part_image_lengths(part):
    cache = getattr(part, "_image_len", None)
    if cache is None:
        cache = (part.M.astype(float) @ part.width)
        part._image_len = cache
    return cache


def _successors(part):
    cache = getattr(part, "_succ", None)
    if cache is None:
        rows = [np.flatnonzero(r) for r in part.M]
        deg = np.array([len(r) for r in rows])
        ptr = np.concatenate([[0], np.cumsum(deg)])
        cache = (np.concatenate(rows), ptr, deg)
        part._succ = cache
    return cache


def image_width(a, b, lo, width):
    """Length of the image of [lo, lo+width] under (a, b); vectorised.

    Uses |g x - g y| = sqrt(|g'(x)| |g'(y)|) |x - y| for chords, which keeps
    full relative precision on tiny arcs.
    """
    hi = lo + width
    chord = 2.0 * np.sin(0.5 * np.minimum(width, math.pi))
    scale = 1.0 / np.sqrt(denom_sq(a, b, lo) * denom_sq(a, b, hi))
    c = np.minimum(chord * scale, 2.0)
    short = 2.0 * np.arcsin(0.5 * c)
    # long arcs (or arcs whose image is long) are measured by angles
    glo = boundary_image(a, b, lo)
    ghi = boundary_image(a, b, hi)
    direct = ccw_dist(glo, ghi)
    direct = np.where(direct == 0, TWO_PI, direct)
    use_direct = (width >= math.pi) | (direct > 1.0)
    return np.where(use_direct, direct, short)


def level_one(part, keep_words=False):
    n = part.size
    sym = np.arange(n)
    a, b = part._a.copy(), part._b.copy()
    lo, width = part.lo.copy(), part.width.copy()
    dmin, dmax = derivative_extrema(a, b, lo, lo + width)
    words = sym[:, None].astype(np.int16) if keep_words else None
    return CylinderBatch(1, sym, sym.copy(), a, b, lo, width, dmin, dmax, words)


def extend(part, batch):
    """All admissible one-symbol extensions of a batch."""
    flat, ptr, deg = _successors(part)
    d = deg[batch.last]
    parent = np.repeat(np.arange(len(batch)), d)
    start = np.repeat(ptr[batch.last], d)
    offs = np.arange(len(parent)) - np.repeat(np.cumsum(d) - d, d)
    child = flat[start + offs]
    a, b = batch.a[parent], batch.b[parent]
    # new cylinder = g_w^{-1}(arc(child)); inverse of (a, b) is (conj a, -b)
    ia, ib = np.conj(a), -b
    lo = boundary_image(ia, ib, part.lo[child])
    width = image_width(ia, ib, part.lo[child], part.width[child])
    # g_{wc} = branch(c) o g_w
    ca, cb = part._a[child], part._b[child]
    na = ca * a + cb * np.conj(b)
    nb = ca * b + cb * np.conj(a)
    s = np.sqrt(np.abs(na) ** 2 - np.abs(nb) ** 2)
    na, nb = na / s, nb / s
    dmin, dmax = derivative_extrema(na, nb, lo, lo + width)
    words = None
    if batch.words is not None:
        words = np.concatenate([batch.words[parent], child[:, None].astype(np.int16)], axis=1)
    return CylinderBatch(batch.depth + 1, batch.first[parent], child, na, nb, lo, width,
                         dmin, dmax, words)


def max_log_derivative(part):
    """sup over the circle of log|f'|."""
    _, dmax = derivative_extrema(part._a, part._b, part.lo, part.lo + part.width)
    return float(np.max(dmax))


def min_log_derivative(part):
    dmin, _ = derivative_extrema(part._a, part._b, part.lo, part.lo + part.width)
    return float(np.min(dmin))


def iter_cylinders(part, n, prune=None, cap=None, keep_words=False, chunk=CHUNK):
    """Yield batches covering every admissible word of length n.

    ``prune(batch, n)`` returns a boolean mask of cylinders whose subtree
    is worth exploring; it is called at every depth.
    """
    if n < 1:
        raise ValueError("depth must be at least 1")
    emitted = [0]

    def walk(batch):
        if prune is not None:
            batch = batch.take(np.flatnonzero(prune(batch, n)))
        if len(batch) == 0:
            return
        if batch.depth == n:
            emitted[0] += len(batch)
            if cap is not None and emitted[0] > cap:
                raise Overflow(f"more than {cap} cylinders at depth {n}", cap=cap)
            yield batch
            return
        child = extend(part, batch)
        for s in range(0, len(child), chunk):
            yield from walk(child.take(slice(s, s + chunk)))

    yield from walk(level_one(part, keep_words))


def enumerate_cylinders(part, n, prune=None, cap=None, keep_words=False):
    """All cylinders of depth n concatenated into one batch."""
    parts = list(iter_cylinders(part, n, prune, cap, keep_words))
    if not parts:
        e = np.array([], dtype=float)
        return CylinderBatch(n, e.astype(int), e.astype(int), e.astype(complex),
                             e.astype(complex), e, e, e, e, None)
    cat = lambda k: np.concatenate([getattr(p, k) for p in parts])
    words = np.concatenate([p.words for p in parts]) if keep_words else None
    return CylinderBatch(n, cat("first"), cat("last"), cat("a"), cat("b"), cat("lo"),
                         cat("width"), cat("dmin"), cat("dmax"), words)


def cylinder_count(part, n, cap=None):
    return sum(len(b) for b in iter_cylinders(part, n, cap=cap))


def count_from_matrix(part, n):
    """Number of admissible words of length n from powers of M (exact integers)."""
    v = np.ones(part.size, dtype=object)
    M = part.M.astype(object)
    for _ in range(n - 1):
        v = M.dot(v)
    return int(sum(v))


def cylinder_derivative_bracket(batch):
    """(inf, sup) of |(f^n)'| over each cylinder of the batch."""
    return np.exp(batch.dmin), np.exp(batch.dmax)


def at_least_prune(alpha, max_step):
    """Keep cylinders that may still reach sup log|(f^n)'| >= alpha n."""
    def keep(batch, n):
        return batch.dmax + (n - batch.depth) * max_step >= alpha * n
    return keep


def at_most_prune(alpha, min_step):
    """Keep cylinders that may still reach inf log|(f^n)'| <= alpha n."""
    def keep(batch, n):
        return batch.dmin + (n - batch.depth) * min_step <= alpha * n
    return keep


def parents_of(part, batch):
    """Parent index of every child produced by ``extend(part, batch)``."""
    _, _, deg = _successors(part)
    return np.repeat(np.arange(len(batch)), deg[batch.last])
