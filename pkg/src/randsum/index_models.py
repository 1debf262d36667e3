"""Distributions of the random index N and the scaled index N/mu."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import stats

FAMILIES = ("geometric", "poisson", "binomial", "custom")

# Truncation point used when an exact distance needs the whole index support.
_EXACT_TAIL = 1e-15


@dataclass(frozen=True)
class IndexModel:
    """Law of a nonnegative integer index.

    Build instances with the classmethod constructors rather than directly.
    ``custom`` models are either finitely supported (``probs``) or given by a
    pmf callable together with a geometric envelope ``P(N=k) <= c * r**k``.
    """

    family: str
    p: Optional[float] = None
    lam: Optional[float] = None
    m: Optional[int] = None
    probs: Optional[tuple] = None
    pmf_fn: Optional[Callable[[int], float]] = field(default=None, compare=False)
    envelope: Optional[tuple] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown index family {self.family!r}")
        if self.family == "geometric":
            if self.p is None or not 0.0 < self.p <= 1.0:
                raise ValueError(f"geometric p must lie in (0, 1], got {self.p}")
        elif self.family == "poisson":
            if self.lam is None or not self.lam > 0:
                raise ValueError(f"poisson rate must be positive, got {self.lam}")
        elif self.family == "binomial":
            if self.m is None or int(self.m) != self.m or self.m < 1:
                raise ValueError(f"binomial m must be a positive integer, got {self.m}")
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValueError(f"binomial p must lie in [0, 1], got {self.p}")
        else:
            self._check_custom()

    def _check_custom(self):
        if self.probs is not None:
            arr = np.asarray(self.probs, dtype=float)
            if arr.ndim != 1 or arr.size == 0:
                raise ValueError("custom pmf must be a nonempty sequence")
            if np.any(arr < 0) or np.any(arr > 1):
                raise ValueError("custom pmf values must lie in [0, 1]")
            if abs(arr.sum() - 1.0) > 1e-12:
                raise ValueError(f"custom pmf sums to {arr.sum()!r}, not 1")
        elif self.pmf_fn is not None:
            if self.envelope is None:
                raise ValueError(
                    "infinite custom pmf needs a geometric tail envelope (c, r)"
                )
            c, r = self.envelope
            if not (c > 0 and 0 < r < 1):
                raise ValueError(f"tail envelope must have c > 0 and 0 < r < 1, got {self.envelope}")
        else:
            raise ValueError("custom index needs either probs or pmf_fn")

    # constructors

    @classmethod
    def geometric(cls, p: float) -> "IndexModel":
        return cls("geometric", p=float(p))

    @classmethod
    def poisson(cls, lam: float) -> "IndexModel":
        return cls("poisson", lam=float(lam))

    @classmethod
    def binomial(cls, m: int, p: float) -> "IndexModel":
        return cls("binomial", m=int(m), p=float(p))

    @classmethod
    def custom(cls, pmf: Mapping[int, float] | list) -> "IndexModel":
        """Finitely supported index from a ``{n: prob}`` map or a list indexed by n."""
        if isinstance(pmf, Mapping):
            if any(int(k) != k or k < 0 for k in pmf):
                raise ValueError("custom pmf keys must be nonnegative integers")
            top = max(pmf)
            arr = [0.0] * (top + 1)
            for k, v in pmf.items():
                arr[int(k)] = float(v)
        else:
            arr = [float(v) for v in pmf]
        return cls("custom", probs=tuple(arr))

    @classmethod
    def custom_infinite(cls, pmf_fn: Callable[[int], float], c: float, r: float) -> "IndexModel":
        return cls("custom", pmf_fn=pmf_fn, envelope=(float(c), float(r)))

    @classmethod
    def deterministic(cls, n: int) -> "IndexModel":
        return cls.custom({int(n): 1.0})

    # basic quantities

    def describe(self) -> dict:
        if self.family == "geometric":
            return {"family": "geometric", "p": self.p}
        if self.family == "poisson":
            return {"family": "poisson", "lam": self.lam}
        if self.family == "binomial":
            return {"family": "binomial", "m": self.m, "p": self.p}
        if self.probs is not None:
            return {"family": "custom", "probs": list(self.probs)}
        return {"family": "custom", "envelope": list(self.envelope)}

    def pmf(self, n) -> np.ndarray | float:
        """P(N = n); zero outside the support. Accepts scalars or arrays."""
        scalar = np.isscalar(n)
        k = np.asarray(n)
        if self.family == "geometric":
            out = np.where(k >= 1, stats.geom.pmf(np.maximum(k, 1), self.p), 0.0)
            if self.p == 1.0:
                out = (k == 1).astype(float)
        elif self.family == "poisson":
            out = stats.poisson.pmf(k, self.lam)
        elif self.family == "binomial":
            out = stats.binom.pmf(k, self.m, self.p)
        elif self.probs is not None:
            arr = np.asarray(self.probs)
            inside = (k >= 0) & (k < arr.size)
            out = np.where(inside, arr[np.clip(k, 0, arr.size - 1)], 0.0)
        else:
            out = np.array([self.pmf_fn(int(x)) if x >= 0 else 0.0 for x in np.ravel(k)])
            out = out.reshape(k.shape)
        out = np.asarray(out, dtype=float)
        return float(out) if scalar else out

    def mean(self) -> float:
        return index_moments(self)[0]

    def var(self) -> float:
        return index_moments(self)[1]

    def min_support(self) -> int:
        """Smallest n with positive mass."""
        if self.family == "geometric":
            return 1
        if self.family in ("poisson",):
            return 0
        if self.family == "binomial":
            return self.m if self.p == 1.0 else 0
        if self.probs is not None:
            return int(np.flatnonzero(np.asarray(self.probs) > 0)[0])
        k = 0
        while self.pmf_fn(k) == 0.0:
            k += 1
        return k

    def tail(self, k: int) -> float:
        """Upper bound on P(N > k)."""
        k = int(k)
        if k < 0:
            return 1.0
        if self.family == "geometric":
            return (1.0 - self.p) ** k
        if self.family == "poisson":
            return float(stats.poisson.sf(k, self.lam))
        if self.family == "binomial":
            return float(stats.binom.sf(k, self.m, self.p))
        if self.probs is not None:
            return float(np.sum(self.probs[k + 1:]))
        c, r = self.envelope
        return c * r ** (k + 1) / (1.0 - r)

    def tail_first_moment(self, k: int) -> float:
        """Upper bound on E[N; N > k]."""
        k = int(k)
        if self.family == "geometric":
            q = 1.0 - self.p
            # sum_{n>k} n p q^(n-1) = q^k (k + 1/p)
            return q ** k * (k + 1.0 / self.p)
        if self.family == "poisson":
            # E[N; N > k] = lam P(N >= k)
            return self.lam * float(stats.poisson.sf(k - 1, self.lam))
        if self.family == "binomial":
            return self.m * self.p * float(stats.binom.sf(k - 1, self.m - 1, self.p))
        if self.probs is not None:
            arr = np.asarray(self.probs)
            n = np.arange(arr.size)
            return float(np.sum((n * arr)[k + 1:]))
        c, r = self.envelope
        # sum_{n>k} n c r^n
        j = k + 1
        return c * r ** j * (j / (1 - r) + r / (1 - r) ** 2)

    def cutoff(self, tol: float, weight: str = "bounded") -> int:
        """Smallest K whose tail bound is at most ``tol``.

        ``weight="bounded"`` bounds P(N > K); ``"first"`` bounds E[N; N > K].
        """
        if tol <= 0:
            raise ValueError(f"tolerance must be positive, got {tol}")
        fn = self.tail if weight == "bounded" else self.tail_first_moment
        if self.family == "binomial":
            return self.m
        if self.probs is not None:
            return len(self.probs) - 1
        hi = max(1, int(math.ceil(self._scale_hint())))
        while fn(hi) > tol:
            hi *= 2
        lo = 0
        while lo < hi:
            mid = (lo + hi) // 2
            if fn(mid) <= tol:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def _scale_hint(self) -> float:
        if self.family == "geometric":
            return 1.0 / self.p
        if self.family == "poisson":
            return self.lam + 10 * math.sqrt(self.lam)
        return 16.0


@dataclass(frozen=True)
class ScaledIndexLimit:
    """Candidate law U for the scaled index N/mu.

    ``custom`` takes a continuous CDF on [0, inf), optionally with a density
    (needed for mixture CDF evaluation).
    """

    kind: str
    cdf_fn: Optional[Callable[[float], float]] = field(default=None, compare=False)
    pdf_fn: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("exponential_rate_one", "point_mass_one", "custom"):
            raise ValueError(f"unknown scaled-index limit {self.kind!r}")
        if self.kind == "custom" and self.cdf_fn is None:
            raise ValueError("custom scaled-index limit needs a cdf")

    @classmethod
    def exponential(cls) -> "ScaledIndexLimit":
        return cls("exponential_rate_one")

    @classmethod
    def point_mass(cls) -> "ScaledIndexLimit":
        return cls("point_mass_one")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "exponential_rate_one":
            return np.where(x > 0, -np.expm1(-np.maximum(x, 0.0)), 0.0)
        if self.kind == "point_mass_one":
            return (x >= 1.0).astype(float)
        return np.vectorize(lambda t: float(self.cdf_fn(t)) if t >= 0 else 0.0)(x)

    def atoms(self) -> np.ndarray:
        return np.array([1.0]) if self.kind == "point_mass_one" else np.array([])

    def cdf_left(self, x):
        """P(U < x)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "point_mass_one":
            return (x > 1.0).astype(float)
        return self.cdf(x)

    def upper_tail(self, x: float) -> float:
        return float(1.0 - self.cdf(x))


def pmf(model: IndexModel, n: int) -> float:
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    return model.pmf(int(n))


def index_moments(model: IndexModel) -> tuple[float, float]:
    """Mean and variance of N."""
    if model.family == "geometric":
        p = model.p
        return 1.0 / p, (1.0 - p) / p ** 2
    if model.family == "poisson":
        return model.lam, model.lam
    if model.family == "binomial":
        mu = model.m * model.p
        return mu, mu * (1.0 - model.p)
    if model.probs is not None:
        arr = np.asarray(model.probs)
        n = np.arange(arr.size, dtype=float)
        mu = float(np.dot(n, arr))
        var = float(np.dot((n - mu) ** 2, arr))
    else:
        k = model.cutoff(1e-16, weight="first")
        n = np.arange(k + 1, dtype=float)
        w = model.pmf(n.astype(int))
        mu = float(np.dot(n, w))
        var = float(np.dot(n * n, w)) - mu * mu
    if not mu > 0:
        raise ValueError("index mean must be strictly positive")
    return mu, var


def certified_sum(model: IndexModel, fn, tol: float, growth: str = "bounded",
                  bound: float = 1.0, start: int = 1) -> tuple[float, float]:
    """Sum of fn(n) P(N=n) over n >= start, with a certified truncation bound.

    ``growth="bounded"`` promises |fn(n)| <= bound for all n; ``"sqrt"``
    promises |fn(n)| <= bound * sqrt(n). ``fn`` is called on an integer array.
    Returns ``(value, truncation_error)``.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if growth == "bounded":
        k = model.cutoff(tol / max(bound, 1e-300))
        err = bound * model.tail(k)
    elif growth == "sqrt":
        # sqrt(n) <= n / sqrt(K) for n > K
        k = model.cutoff(tol / max(bound, 1e-300), weight="first")
        k = max(k, 1)
        err = bound * model.tail_first_moment(k) / math.sqrt(k)
    else:
        raise ValueError(f"unknown growth class {growth!r}")
    if k < start:
        return 0.0, err
    n = np.arange(start, k + 1)
    w = model.pmf(n)
    vals = np.asarray(fn(n), dtype=float)
    return float(np.dot(vals, w)), float(err)


def inv_sqrt_moment(model: IndexModel, tol: float = 1e-12) -> tuple[float, float]:
    """E[N^(-1/2)] with the n = 0 term taken as 0."""
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    k = model.cutoff(tol)
    n = np.arange(1, max(k, 1) + 1)
    value = float(np.dot(n ** -0.5, model.pmf(n)))
    err = model.tail(k) / math.sqrt(k + 1)
    return value, err


def inv_moment_geometric(p: float) -> float:
    """E[1/N] for N geometric on {1, 2, ...}."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if p == 1.0:
        return 1.0
    return -p * math.log(p) / (1.0 - p)


def sample_index(model: IndexModel, rng: np.random.Generator, count: int) -> np.ndarray:
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    if model.family == "geometric":
        return rng.geometric(model.p, size=count).astype(np.int64)
    if model.family == "poisson":
        return rng.poisson(model.lam, size=count).astype(np.int64)
    if model.family == "binomial":
        return rng.binomial(model.m, model.p, size=count).astype(np.int64)
    if model.probs is not None:
        probs = np.asarray(model.probs)
    else:
        k = model.cutoff(1e-16)
        probs = model.pmf(np.arange(k + 1))
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    return np.searchsorted(cdf, rng.random(count), side="right").astype(np.int64)


def exact_dk_scaled_index(model: IndexModel, limit: ScaledIndexLimit) -> float:
    """sup_x |P(N/mu <= x) - P(U <= x)|, evaluated on both edges of every jump."""
    mu = model.mean()
    k = model.cutoff(_EXACT_TAIL)
    n = np.arange(model.min_support(), k + 1)
    w = model.pmf(n)
    right = np.cumsum(w)
    left = right - w
    x = n / mu
    diffs = [np.abs(right - limit.cdf(x)), np.abs(left - limit.cdf_left(x))]
    for a in limit.atoms():
        idx = np.searchsorted(n, a * mu, side="right")
        f_n = right[idx - 1] if idx > 0 else 0.0
        idx_left = np.searchsorted(n, a * mu, side="left")
        f_n_left = right[idx_left - 1] if idx_left > 0 else 0.0
        diffs.append(np.array([abs(f_n - limit.cdf(a)), abs(f_n_left - limit.cdf_left(a))]))
    sup = max(float(np.max(d)) for d in diffs)
    # beyond the last retained atom both CDFs are within their tails of 1
    tail_gap = max(model.tail(k), limit.upper_tail(k / mu))
    return max(sup, tail_gap)


__all__ = [
    "IndexModel",
    "ScaledIndexLimit",
    "pmf",
    "index_moments",
    "certified_sum",
    "inv_sqrt_moment",
    "inv_moment_geometric",
    "sample_index",
    "exact_dk_scaled_index",
]
