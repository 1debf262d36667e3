"""Kolmogorov and Wasserstein distances: empirical estimators and exact oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

from .bounds import Metric
from .index_models import IndexModel, sample_index
from .limits import LimitLaw, std_normal_cdf
from .summands import (DEFAULT_SIZE_CAP, LatticePMF, SummandModel, integer_lattices,
                       sample_sums_of_lengths)

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    metric: Metric
    method: str
    band: float = 0.0
    n_samples: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.value < 0 or self.band < 0:
            raise ValueError(f"distance and band must be nonnegative: {self}")
        if self.method not in ("empirical", "exact_lattice", "numeric_cdf"):
            raise ValueError(f"unknown estimation method {self.method!r}")


def dkw_band(n: int, delta: float) -> float:
    """Half-width sqrt(ln(2/delta) / 2n) of the DKW confidence band."""
    if n < 1 or not 0 < delta < 1:
        raise ValueError("need n >= 1 and 0 < delta < 1")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


def empirical_dk(samples, target_cdf: Callable, delta: float = 0.01,
                 seed: Optional[int] = None) -> DistanceEstimate:
    """sup |F_n - F| for a continuous target F.

    Samples are sorted internally, so input order does not matter.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 1:
        raise ValueError("need at least one sample")
    f = np.asarray(target_cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    value = max(np.max(np.abs(i / n - f)), np.max(np.abs((i - 1) / n - f)))
    return DistanceEstimate(float(value), Metric.KOLMOGOROV, "empirical",
                            dkw_band(n, delta), n, seed)


def _interval_abs_integral(x, a, b, law: LimitLaw, qa, qb, ma, mb):
    """Integral over u in [a, b] of |x - Q(u)|, vectorized over intervals.

    ``qa``/``qb`` are Q(a), Q(b) and ``ma``/``mb`` the partial means M(a), M(b),
    with M(u) = E[Y; Y <= Q(u)].
    """
    fx = np.asarray(law.cdf(x), dtype=float)
    ustar = np.clip(fx, a, b)
    mstar = np.where(fx <= a, ma, np.where(fx >= b, mb, law.partial_mean(x)))
    below = x * (ustar - a) - (mstar - ma)
    above = (mb - mstar) - x * (b - ustar)
    return np.maximum(below, 0.0) + np.maximum(above, 0.0)


def empirical_w1(samples, target: LimitLaw, seed: Optional[int] = None) -> DistanceEstimate:
    """W1 between the empirical law and ``target``: sum over order statistics of
    the exact integral of |x_(i) - Q(u)| on u in [(i-1)/n, i/n]."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 1:
        raise ValueError("need at least one sample")
    edges = np.arange(n + 1) / n
    q = np.empty(n + 1)
    q[0], q[-1] = -np.inf, np.inf
    if n > 1:
        q[1:-1] = target.quantile(edges[1:-1])
    m = np.empty(n + 1)
    m[0], m[-1] = 0.0, target.mean()
    if n > 1:
        m[1:-1] = target.partial_mean(q[1:-1])
    pieces = _interval_abs_integral(x, edges[:-1], edges[1:], target, q[:-1], q[1:], m[:-1], m[1:])
    return DistanceEstimate(float(pieces.sum()), Metric.WASSERSTEIN, "empirical", 0.0, n, seed)


def exact_dk_lattice(pmf: LatticePMF, target_cdf: Callable,
                     target_cdf_left: Optional[Callable] = None) -> DistanceEstimate:
    """sup over atoms of |F_lattice - F| at both jump edges; deficiency goes into the band.

    The target is taken as continuous. For a target with atoms pass its left
    limit ``target_cdf_left``; its atoms must then lie on the lattice support.
    """
    if pmf.probs.size == 0:
        raise ValueError("empty pmf")
    keep = pmf.probs > 0
    x = pmf.support()[keep]
    w = pmf.probs[keep]
    right = np.cumsum(w)
    left = right - w
    f = np.asarray(target_cdf(x), dtype=float)
    f_left = f if target_cdf_left is None else np.asarray(target_cdf_left(x), dtype=float)
    value = max(np.max(np.abs(right - f)), np.max(np.abs(left - f_left)))
    return DistanceEstimate(float(value), Metric.KOLMOGOROV, "exact_lattice", float(pmf.deficiency))


def exact_w1_lattice(pmf: LatticePMF, target: LimitLaw) -> DistanceEstimate:
    """Integral of |F_lattice - F| for a lattice law against a closed-form target."""
    keep = pmf.probs > 0
    x = pmf.support()[keep]
    w = pmf.probs[keep]
    c = np.cumsum(w)

    def antideriv(t):
        # integral of F over (-inf, t]
        return t * target.cdf(t) - target.partial_mean(t)

    # missing mass is treated as sitting on the last atom and charged to the band
    total = antideriv(x[0]) + target.excess_mean(x[-1])
    lo, hi, lev = x[:-1], x[1:], c[:-1]
    g_lo, g_hi = antideriv(lo), antideriv(hi)
    f_lo, f_hi = target.cdf(lo), target.cdf(hi)
    plain_above = f_lo >= lev
    plain_below = f_hi <= lev
    seg = np.where(plain_above, (g_hi - g_lo) - lev * (hi - lo), 0.0)
    seg = np.where(plain_below, lev * (hi - lo) - (g_hi - g_lo), seg)
    cross = ~(plain_above | plain_below)
    if np.any(cross):
        t = target.quantile(lev[cross])
        g_t = antideriv(t)
        left = lev[cross] * (t - lo[cross]) - (g_t - g_lo[cross])
        right = (g_hi[cross] - g_t) - lev[cross] * (hi[cross] - t)
        seg[cross] = left + right
    total += float(np.sum(np.maximum(seg, 0.0)))
    # moving the missing mass from wherever it sits to x[-1] costs at most this
    band = float(pmf.deficiency) * abs(x[-1]) + float(pmf.tail_abs_mean)
    return DistanceEstimate(float(total), Metric.WASSERSTEIN, "exact_lattice", band)


def numeric_w1_between_cdfs(cdf_a: Callable, cdf_b: Callable, tail_tol: float = 1e-8,
                            support: Optional[tuple] = None,
                            breakpoints=(0.0,)) -> DistanceEstimate:
    """Integral of |F_a - F_b| by adaptive quadrature.

    ``cdf_a``/``cdf_b`` may be :class:`LimitLaw` instances, whose tail envelopes
    choose the range, or plain callables together with an explicit ``support``
    [L, R] outside which the caller guarantees at most ``tail_tol`` of mass.
    """
    if tail_tol <= 0:
        raise ValueError("tail tolerance must be positive")
    laws = [c for c in (cdf_a, cdf_b) if isinstance(c, LimitLaw)]
    if support is None:
        if len(laws) != 2:
            raise ValueError("no tail envelope: pass LimitLaw inputs or an explicit support")
        edges = [law.support_edges(tail_tol / 2) for law in laws]
        support = (min(e[0] for e in edges), max(e[1] for e in edges))
    fa = cdf_a.cdf if isinstance(cdf_a, LimitLaw) else cdf_a
    fb = cdf_b.cdf if isinstance(cdf_b, LimitLaw) else cdf_b
    lo, hi = support
    pts = sorted(p for p in breakpoints if lo < p < hi)
    knots = [lo, *pts, hi]
    total, err = 0.0, 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        val, e = integrate.quad(lambda z: abs(float(fa(z)) - float(fb(z))), a, b,
                                epsabs=tail_tol, epsrel=1e-10, limit=2000)
        total += val
        err += e
    return DistanceEstimate(total, Metric.WASSERSTEIN, "numeric_cdf", 2 * tail_tol + err)


def numeric_dk_between_cdfs(cdf_a: Callable, cdf_b: Callable, support: tuple,
                            grid: int = 20001) -> DistanceEstimate:
    """sup |F_a - F_b| for continuous CDFs: dense grid, then local refinement."""
    z = np.linspace(support[0], support[1], grid)
    d = np.abs(np.asarray(cdf_a(z)) - np.asarray(cdf_b(z)))
    i = int(np.argmax(d))
    a, b = z[max(i - 1, 0)], z[min(i + 1, grid - 1)]
    res = optimize.minimize_scalar(lambda t: -abs(float(cdf_a(t)) - float(cdf_b(t))),
                                   bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    value = max(float(d[i]), -float(res.fun))
    return DistanceEstimate(value, Metric.KOLMOGOROV, "numeric_cdf", 1e-12)


def random_sum_exact_pmf(index: IndexModel, summands: SummandModel, tail_tol: float = 1e-10,
                         size_cap: int = DEFAULT_SIZE_CAP) -> LatticePMF:
    """Exact pmf of W = mu^(-1/2) (X_1 + ... + X_N) for lattice summands.

    The index is truncated at the first N_max with P(N > N_max) <= tail_tol; the
    dropped mass is returned as ``deficiency``. All partial sums live on one
    integer grid, so atoms for different n merge exactly by integer key.
    """
    mu = index.mean()
    n_max = index.cutoff(tail_tol)
    weights = index.pmf(np.arange(n_max + 1))
    unit, lats = integer_lattices(summands, n_max)
    k0 = np.array([k for k, _ in lats], dtype=np.int64)
    k1 = np.array([k + q.size - 1 for k, q in lats], dtype=np.int64)
    lo_path = np.concatenate([[0], np.cumsum(k0)])
    hi_path = np.concatenate([[0], np.cumsum(k1)])
    lo, hi = int(lo_path.min()), int(hi_path.max())
    if hi - lo + 1 > size_cap:
        raise ValueError(f"random-sum support of {hi - lo + 1} points exceeds the size cap {size_cap}")
    acc = np.zeros(hi - lo + 1)
    probs = np.array([1.0])
    acc[-lo] += weights[0]
    for n in range(1, n_max + 1):
        probs = np.convolve(probs, lats[n - 1][1])
        if weights[n] > 0:
            start = int(lo_path[n]) - lo
            acc[start:start + probs.size] += weights[n] * probs
    deficiency = max(0.0, 1.0 - float(acc.sum()), index.tail(n_max))
    nz = np.flatnonzero(acc)
    acc = acc[nz[0]:nz[-1] + 1]
    # E|S_n| <= sqrt(n) sigma_max <= n sigma_max bounds E|W| over the dropped n > n_max
    sigma_max = math.sqrt(summands.variance_bounds()[1])
    tail_abs = sigma_max * index.tail_first_moment(n_max) / math.sqrt(mu)
    return LatticePMF(float(unit) / math.sqrt(mu), lo + int(nz[0]), acc, deficiency, tail_abs)


def gaussian_pair_exact(sigma: float, tau: float, metric) -> DistanceEstimate:
    """Exact distance between N(0, sigma^2) and N(0, tau^2)."""
    metric = Metric(metric.value if isinstance(metric, Metric) else metric)
    if not (sigma > 0 and tau > 0):
        raise ValueError("both standard deviations must be positive")
    if metric is Metric.WASSERSTEIN:
        return DistanceEstimate(SQRT_2_OVER_PI * abs(sigma - tau), metric, "numeric_cdf")
    if sigma == tau:
        return DistanceEstimate(0.0, metric, "numeric_cdf")
    # the two densities cross where t^2 = 2 s^2 t^2 log(s/t) / (s^2 - t^2)
    t = math.sqrt(2.0 * sigma ** 2 * tau ** 2 * math.log(sigma / tau) / (sigma ** 2 - tau ** 2))
    value = abs(float(std_normal_cdf(t / sigma) - std_normal_cdf(t / tau)))
    return DistanceEstimate(value, metric, "numeric_cdf", 1e-15)


def sample_random_sum(index: IndexModel, summands: SummandModel, rng: np.random.Generator,
                      count: int) -> np.ndarray:
    """``count`` independent draws of W."""
    n = sample_index(index, rng, count)
    return sample_sums_of_lengths(summands, n, rng) / math.sqrt(index.mean())


def gaussian_random_sum_law(index: IndexModel, summands: SummandModel) -> LimitLaw:
    """Exact law of W when the summands are iid Gaussian: a discrete scale mixture."""
    base = summands.base
    if not (summands.is_iid and base.preset == "gaussian"):
        raise ValueError("W has a closed-form law only for iid Gaussian summands")
    return LimitLaw.scale_mixture(math.sqrt(base.moments()[0]), index)
