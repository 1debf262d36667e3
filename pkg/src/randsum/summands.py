"""Centered summand laws: iid presets, variance schedules, lattice convolution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

PRESETS = (
    "rademacher",
    "two_point",
    "centered_uniform",
    "centered_exponential",
    "gaussian",
    "lattice",
)

# Centered Exp(1): E|E - 1|^3 = 12/e - 2.
_CENTERED_EXP_XI = 12.0 / math.e - 2.0

DEFAULT_SIZE_CAP = 50_000_000


@dataclass(frozen=True)
class LatticePMF:
    """Probabilities on the points ``unit * (kmin + i)``.

    ``deficiency`` is the probability mass known to be missing (truncation) and
    ``tail_abs_mean`` an upper bound on E|X| over that missing part.
    """

    unit: float
    kmin: int
    probs: np.ndarray
    deficiency: float = 0.0
    tail_abs_mean: float = 0.0

    @property
    def offset(self) -> float:
        return self.unit * self.kmin

    @property
    def step(self) -> float:
        return self.unit

    def support(self) -> np.ndarray:
        return self.unit * (self.kmin + np.arange(self.probs.size))

    def as_dict(self, cutoff: float = 0.0) -> dict:
        return {float(x): float(q) for x, q in zip(self.support(), self.probs) if q > cutoff}

    def moment(self, order: int, absolute: bool = False) -> float:
        x = self.support()
        if absolute:
            x = np.abs(x)
        return float(np.dot(x ** order, self.probs))

    def scaled(self, factor: float) -> "LatticePMF":
        return LatticePMF(self.unit * factor, self.kmin, self.probs, self.deficiency,
                          self.tail_abs_mean * abs(factor))


@dataclass(frozen=True)
class SummandDist:
    """One centered summand law, optionally multiplied by ``scale``."""

    preset: str
    params: tuple = ()
    scale: float = 1.0

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown summand preset {self.preset!r}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.preset == "two_point":
            a, b = self.params
            if not a < 0 < b:
                raise ValueError(f"two_point needs a < 0 < b, got {self.params}")
        elif self.preset in ("centered_uniform", "gaussian"):
            if not self.params[0] > 0:
                raise ValueError(f"{self.preset} parameter must be positive")
        elif self.preset == "lattice":
            offset, step, probs = self.params
            probs = np.asarray(probs, dtype=float)
            if step <= 0 or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
                raise ValueError("lattice preset needs step > 0 and a probability vector")
            mean = float(np.dot(offset + step * np.arange(probs.size), probs))
            if abs(mean) > 1e-12 * max(1.0, abs(offset) + step * probs.size):
                raise ValueError(f"lattice preset is not centered (mean {mean!r})")

    @classmethod
    def rademacher(cls) -> "SummandDist":
        return cls("rademacher")

    @classmethod
    def two_point(cls, a: float, b: float) -> "SummandDist":
        return cls("two_point", (float(a), float(b)))

    @classmethod
    def centered_uniform(cls, half_width: float) -> "SummandDist":
        return cls("centered_uniform", (float(half_width),))

    @classmethod
    def centered_exponential(cls) -> "SummandDist":
        return cls("centered_exponential")

    @classmethod
    def gaussian(cls, sigma: float) -> "SummandDist":
        return cls("gaussian", (float(sigma),))

    @classmethod
    def lattice(cls, offset: float, step: float, probs) -> "SummandDist":
        return cls("lattice", (float(offset), float(step), tuple(float(q) for q in probs)))

    def scaled(self, c: float) -> "SummandDist":
        return SummandDist(self.preset, self.params, self.scale * c)

    def describe(self) -> dict:
        out = {"preset": self.preset}
        if self.params:
            out["params"] = [list(p) if isinstance(p, tuple) else p for p in self.params]
        if self.scale != 1.0:
            out["scale"] = self.scale
        return out

    def _base_moments(self) -> tuple[float, float]:
        if self.preset == "rademacher":
            return 1.0, 1.0
        if self.preset == "two_point":
            a, b = self.params
            pa, pb = b / (b - a), -a / (b - a)
            return pa * a * a + pb * b * b, pa * abs(a) ** 3 + pb * b ** 3
        if self.preset == "centered_uniform":
            h = self.params[0]
            return h * h / 3.0, h ** 3 / 4.0
        if self.preset == "centered_exponential":
            return 1.0, _CENTERED_EXP_XI
        if self.preset == "gaussian":
            s = self.params[0]
            return s * s, 2.0 * math.sqrt(2.0 / math.pi) * s ** 3
        offset, step, probs = self.params
        x = offset + step * np.arange(len(probs))
        probs = np.asarray(probs)
        return float(np.dot(x * x, probs)), float(np.dot(np.abs(x) ** 3, probs))

    def moments(self) -> tuple[float, float]:
        """(E[X^2], E|X|^3)."""
        s2, xi = self._base_moments()
        return s2 * self.scale ** 2, xi * self.scale ** 3

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.preset == "rademacher":
            x = 2.0 * rng.integers(0, 2, size=size) - 1.0
        elif self.preset == "two_point":
            a, b = self.params
            x = np.where(rng.random(size) < -a / (b - a), b, a)
        elif self.preset == "centered_uniform":
            h = self.params[0]
            x = rng.uniform(-h, h, size=size)
        elif self.preset == "centered_exponential":
            x = rng.exponential(1.0, size=size) - 1.0
        elif self.preset == "gaussian":
            x = rng.normal(0.0, self.params[0], size=size)
        else:
            offset, step, probs = self.params
            idx = rng.choice(len(probs), size=size, p=np.asarray(probs))
            x = offset + step * idx
        return x * self.scale

    def integer_lattice(self) -> Optional[tuple[Fraction, int, np.ndarray]]:
        """Exact lattice description ``(unit, kmin, probs)`` or None if not lattice."""
        if self.preset == "rademacher":
            values, probs = [Fraction(-1), Fraction(1)], [0.5, 0.5]
        elif self.preset == "two_point":
            a, b = self.params
            values = [_as_fraction(a), _as_fraction(b)]
            probs = [b / (b - a), -a / (b - a)]
        elif self.preset == "lattice":
            offset, step, pr = self.params
            values = [_as_fraction(offset + step * i) for i in range(len(pr))]
            probs = list(pr)
        else:
            return None
        scale = _as_fraction(self.scale)
        if None in values or scale is None:
            return None
        values = [v * scale for v in values]
        unit = _fraction_gcd(values)
        ints = [int(v / unit) for v in values]
        kmin = min(ints)
        arr = np.zeros(max(ints) - kmin + 1)
        for k, q in zip(ints, probs):
            arr[k - kmin] += q
        return unit, kmin, arr


def _as_fraction(x: float) -> Optional[Fraction]:
    f = Fraction(x).limit_denominator(10 ** 6)
    if abs(float(f) - x) > 4 * np.finfo(float).eps * max(1.0, abs(x)):
        return None
    return f


def _fraction_gcd(values) -> Fraction:
    nums = [v for v in values if v != 0]
    den = math.lcm(*[v.denominator for v in nums])
    g = 0
    for v in nums:
        g = math.gcd(g, int(v * den))
    return Fraction(g, den)


@dataclass(frozen=True)
class MomentAggregates:
    n: int
    sigma_hat_n_sq: float
    xi_hat_n: float
    sigma_hat_sq_limit: Optional[float]


@dataclass(frozen=True)
class SummandModel:
    """Summand sequence: iid copies of ``base`` or ``base`` scaled by sqrt(rule(j)).

    For schedules ``rule`` maps j >= 1 to a variance multiplier. ``rule_limit`` is
    the Cesaro limit of the multipliers (if it exists) and ``rule_bounds`` a
    closed interval containing every multiplier; both are declared, not estimated.
    """

    base: SummandDist
    rule: Optional[Callable] = field(default=None, compare=False)
    rule_name: Optional[str] = None
    rule_limit: Optional[float] = None
    rule_bounds: Optional[tuple] = None

    @classmethod
    def iid(cls, dist: SummandDist) -> "SummandModel":
        return cls(dist)

    @classmethod
    def schedule(cls, base: SummandDist, rule: Callable, *, limit: Optional[float],
                 bounds: tuple, name: str = "custom") -> "SummandModel":
        lo, hi = bounds
        if not 0 < lo <= hi < math.inf:
            raise ValueError(f"schedule bounds must satisfy 0 < lo <= hi < inf, got {bounds}")
        return cls(base, rule, name, limit, (float(lo), float(hi)))

    @classmethod
    def harmonic_schedule(cls, base: SummandDist, c: float = 1.0) -> "SummandModel":
        """Variances sigma_j^2 = sigma^2 (1 + c/j)."""
        if c < 0:
            raise ValueError("harmonic schedule needs c >= 0")
        return cls.schedule(base, lambda j: 1.0 + c / np.asarray(j, dtype=float),
                            limit=1.0, bounds=(1.0, 1.0 + c), name=f"harmonic(c={c!r})")

    @property
    def is_iid(self) -> bool:
        return self.rule is None

    def describe(self) -> dict:
        out = {"base": self.base.describe()}
        if not self.is_iid:
            out["schedule"] = self.rule_name
        return out

    def multipliers(self, j) -> np.ndarray:
        j = np.asarray(j)
        if self.is_iid:
            return np.ones(j.shape)
        return np.broadcast_to(np.asarray(self.rule(j), dtype=float), j.shape)

    def dist_at(self, j: int) -> SummandDist:
        if j < 1:
            raise ValueError(f"summand index starts at 1, got {j}")
        if self.is_iid:
            return self.base
        return self.base.scaled(math.sqrt(float(self.multipliers(j))))

    def moment_arrays(self, n_max: int) -> tuple[np.ndarray, np.ndarray]:
        """(sigma_j^2, xi_j) for j = 1..n_max."""
        s2, xi = self.base.moments()
        c = self.multipliers(np.arange(1, n_max + 1))
        return s2 * c, xi * c ** 1.5

    def aggregate_arrays(self, n_max: int) -> tuple[np.ndarray, np.ndarray]:
        """Running means (sigma_hat_n^2, xi_hat_n) for n = 1..n_max."""
        s2, xi = self.moment_arrays(n_max)
        n = np.arange(1, n_max + 1)
        if self.is_iid:
            return s2, xi
        return np.cumsum(s2) / n, np.cumsum(xi) / n

    def sigma_hat_sq(self) -> Optional[float]:
        s2, _ = self.base.moments()
        if self.is_iid:
            return s2
        return None if self.rule_limit is None else s2 * self.rule_limit

    def variance_bounds(self) -> tuple[float, float]:
        s2, _ = self.base.moments()
        lo, hi = (1.0, 1.0) if self.is_iid else self.rule_bounds
        return s2 * lo, s2 * hi

    def xi_sup(self) -> float:
        _, xi = self.base.moments()
        hi = 1.0 if self.is_iid else self.rule_bounds[1]
        return xi * hi ** 1.5


def moments_at(model: SummandModel, j: int) -> tuple[float, float]:
    return model.dist_at(j).moments()


def aggregates(model: SummandModel, n: int) -> MomentAggregates:
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    s2, xi = model.aggregate_arrays(n)
    return MomentAggregates(n, float(s2[-1]), float(xi[-1]), model.sigma_hat_sq())


class RunningAggregates:
    """O(1) incremental running means of sigma_j^2 and xi_j."""

    def __init__(self, model: SummandModel):
        self.model = model
        self.n = 0
        self._s2 = 0.0
        self._xi = 0.0

    def step(self) -> MomentAggregates:
        self.n += 1
        s2, xi = moments_at(self.model, self.n)
        self._s2 += s2
        self._xi += xi
        return MomentAggregates(self.n, self._s2 / self.n, self._xi / self.n,
                                self.model.sigma_hat_sq())


def sample_partial_sums(model: SummandModel, n: int, rng: np.random.Generator,
                        reps: int = 1, chunk: int = 4_000_000) -> np.ndarray:
    """``reps`` independent realizations of X_1 + ... + X_n."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    if n == 0:
        return np.zeros(reps)
    return sample_sums_of_lengths(model, np.full(reps, n, dtype=np.int64), rng, chunk)


def sample_partial_sum(model: SummandModel, n: int, rng: np.random.Generator) -> float:
    return float(sample_partial_sums(model, n, rng, 1)[0])


def sample_sums_of_lengths(model: SummandModel, lengths: np.ndarray,
                           rng: np.random.Generator, chunk: int = 4_000_000) -> np.ndarray:
    """Sums X_1 + ... + X_{lengths[i]} for every i, independent across i."""
    lengths = np.asarray(lengths, dtype=np.int64)
    base = model.base
    if model.is_iid and base.scale == 1.0:
        if base.preset == "rademacher":
            return 2.0 * rng.binomial(lengths, 0.5) - lengths
        if base.preset == "two_point":
            a, b = base.params
            hits = rng.binomial(lengths, -a / (b - a))
            return b * hits + a * (lengths - hits)
        if base.preset == "gaussian":
            return base.params[0] * np.sqrt(lengths) * rng.standard_normal(lengths.size)
    out = np.zeros(lengths.size)
    start = 0
    while start < lengths.size:
        # grow the block until it holds about `chunk` draws
        cum = np.cumsum(lengths[start:])
        stop = start + max(1, int(np.searchsorted(cum, chunk, side="right")))
        block = lengths[start:stop]
        total = int(block.sum())
        if total:
            draws = base.sample(rng, total)
            if not model.is_iid:
                # position j within each sum, 1-based
                firsts = np.repeat(np.cumsum(block) - block, block)
                j = np.arange(total) - firsts + 1
                draws = draws * np.sqrt(model.multipliers(j))
            owner = np.repeat(np.arange(block.size), block)
            out[start:stop] = np.bincount(owner, weights=draws, minlength=block.size)
        start = stop
    return out


def integer_lattices(model: SummandModel, n: int):
    """Per-summand integer lattices on a shared unit, j = 1..n."""
    if model.is_iid:
        lat = model.base.integer_lattice()
        if lat is None:
            raise ValueError(f"summand preset {model.base.preset!r} is not a lattice law")
        return lat[0], [(lat[1], lat[2])] * n
    lats = []
    for j in range(1, n + 1):
        lat = model.dist_at(j).integer_lattice()
        if lat is None:
            raise ValueError(f"summand {j} is not a lattice law with a rational span")
        lats.append(lat)
    unit = _fraction_gcd([lat[0] for lat in lats]) if lats else Fraction(1)
    out = []
    for u, kmin, probs in lats:
        ratio = u / unit
        if ratio.denominator != 1:
            raise ValueError("summand lattices are incompatible")
        r = int(ratio)
        if r == 1:
            out.append((kmin * r, probs))
        else:
            spread = np.zeros((probs.size - 1) * r + 1)
            spread[::r] = probs
            out.append((kmin * r, spread))
    return unit, out


def lattice_partial_pmf(model: SummandModel, n: int,
                        size_cap: int = DEFAULT_SIZE_CAP) -> LatticePMF:
    """Exact pmf of X_1 + ... + X_n by iterated convolution."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    if n == 0:
        return LatticePMF(1.0, 0, np.array([1.0]))
    unit, lats = integer_lattices(model, n)
    width = sum(p.size - 1 for _, p in lats) + 1
    if width > size_cap:
        raise ValueError(f"partial-sum support of {width} points exceeds the size cap {size_cap}")
    probs = np.array([1.0])
    kmin = 0
    for k0, q in lats:
        probs = np.convolve(probs, q)
        kmin += k0
    return LatticePMF(float(unit), kmin, probs)
