"""Error bounds for random sums, each returned with its provenance.

Every function returns a :class:`BoundValue`. Infinite expectations over the
index are summed with an explicit tail bound, reported as ``truncation_error``.
The n = 0 term of any expectation over N is 0: given N = 0 both W and Z are the
point mass at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import stats

from .index_models import IndexModel, certified_sum, index_moments, inv_sqrt_moment
from .limits import LimitLaw, laplace_for_sigma
from .summands import SummandModel

DEFAULT_TOL = 1e-10
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class Metric(str, Enum):
    KOLMOGOROV = "kolmogorov"
    WASSERSTEIN = "wasserstein"


@dataclass(frozen=True)
class ConstantsRegistry:
    """Berry-Esseen constants for the Kolmogorov and Wasserstein metrics."""

    c_k: float = 0.56
    c_w: float = 6.0

    def __post_init__(self):
        if not (self.c_k > 0 and self.c_w > 0):
            raise ValueError("Berry-Esseen constants must be positive")


DEFAULT_CONSTANTS = ConstantsRegistry()


@dataclass(frozen=True)
class BoundValue:
    value: float
    metric: Metric
    theorem_tag: str
    truncation_error: float = 0.0
    inputs: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.value >= 0 or not self.truncation_error >= 0:
            raise ValueError(f"bound and truncation error must be nonnegative: {self}")

    @property
    def certified(self) -> float:
        """Value plus the truncation error, a safe upper bound."""
        return self.value + self.truncation_error

    def __add__(self, other: "BoundValue") -> "BoundValue":
        if other.metric != self.metric:
            raise ValueError("cannot add bounds for different metrics")
        return BoundValue(self.value + other.value, self.metric,
                          f"{self.theorem_tag}+{other.theorem_tag}",
                          self.truncation_error + other.truncation_error,
                          {**self.inputs, **other.inputs})


def _metric(metric) -> Metric:
    return Metric(metric.value if isinstance(metric, Metric) else str(metric).lower())


def _require_limit(summands: SummandModel) -> float:
    s2 = summands.sigma_hat_sq()
    if s2 is None or not s2 > 0:
        raise ValueError("summand schedule has no declared limit of the averaged variances")
    return s2


def conditional_be_bound(n: int, summands: SummandModel, mu: float, metric,
                         constants: ConstantsRegistry = DEFAULT_CONSTANTS) -> BoundValue:
    """Berry-Esseen bound for the law of W given N = n against N(0, s_n^2)."""
    metric = _metric(metric)
    if n < 0 or mu <= 0:
        raise ValueError("need n >= 0 and mu > 0")
    if n == 0:
        return BoundValue(0.0, metric, "conditional_be")
    s2, xi = summands.moment_arrays(n)
    s_n_sq = s2.sum() / mu
    xi_sum = xi.sum()
    if metric is Metric.WASSERSTEIN:
        value = constants.c_w * xi_sum / (s_n_sq * mu ** 1.5)
    else:
        value = constants.c_k * xi_sum / (s_n_sq ** 1.5 * mu ** 1.5)
    return BoundValue(float(value), metric, "conditional_be", 0.0, {"n": n, "mu": mu})


def _ratio_series(index: IndexModel, summands: SummandModel, metric: Metric, tol: float):
    """E[xi_hat_N / sigma_hat_N^3 / sqrt(N)] (K) or E[xi_hat_N / sigma_hat_N^2] (W)."""
    s_lo, _ = summands.variance_bounds()
    xi_hi = summands.xi_sup()
    power = 1.5 if metric is Metric.KOLMOGOROV else 1.0
    bound = xi_hi / s_lo ** power

    def terms(n):
        sh, xh = summands.aggregate_arrays(int(n[-1]))
        sh, xh = sh[n - 1], xh[n - 1]
        out = xh / sh ** power
        return out / np.sqrt(n) if metric is Metric.KOLMOGOROV else out

    return certified_sum(index, terms, tol, "bounded", bound)


def w_vs_z_bound(index: IndexModel, summands: SummandModel, metric,
                 constants: ConstantsRegistry = DEFAULT_CONSTANTS,
                 tol: float = DEFAULT_TOL, fast_path: bool = True) -> BoundValue:
    """Bound on the distance between W and its Gaussian counterpart Z, averaged over N."""
    metric = _metric(metric)
    mu = index.mean()
    inputs = {"index": index.describe(), "summands": summands.describe()}
    if summands.is_iid and fast_path:
        s2, xi = summands.base.moments()
        if metric is Metric.WASSERSTEIN:
            value = constants.c_w * xi / (math.sqrt(mu) * s2)
            return BoundValue(value, metric, "w_vs_z_iid", 0.0, inputs)
        m, err = inv_sqrt_moment(index, tol)
        factor = constants.c_k * xi / s2 ** 1.5
        return BoundValue(factor * m, metric, "w_vs_z_iid", factor * err, inputs)
    value, err = _ratio_series(index, summands, metric, tol)
    c = constants.c_k if metric is Metric.KOLMOGOROV else constants.c_w / math.sqrt(mu)
    return BoundValue(c * value, metric, "w_vs_z", c * err, inputs)


def mixture_transfer_dk(dk_scaled_index: float) -> BoundValue:
    """Kolmogorov distance of sigma*sqrt(N/mu)*zeta to sigma*sqrt(U)*zeta, any sigma."""
    if dk_scaled_index < 0:
        raise ValueError("a distance cannot be negative")
    return BoundValue(float(dk_scaled_index), Metric.KOLMOGOROV, "mixture_transfer")


def mixture_vs_normal_w1_bound(sigma: float, index: IndexModel) -> BoundValue:
    """W1 of sigma*sqrt(N/mu)*zeta to N(0, sigma^2)."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    mu, var = index_moments(index)
    value = sigma * SQRT_2_OVER_PI * math.sqrt(max(var, 0.0)) / mu
    return BoundValue(value, Metric.WASSERSTEIN, "mixture_vs_normal",
                      0.0, {"sigma": sigma, "index": index.describe()})


def _pair_terms(sigma, tau, metric: Metric):
    r_ts = 1.0 - tau ** 2 / sigma ** 2
    r_st = 1.0 - sigma ** 2 / tau ** 2
    if metric is Metric.KOLMOGOROV:
        return np.minimum(np.abs(r_ts), np.abs(r_st))
    return 2.0 * np.minimum(sigma * np.abs(r_ts), tau * np.abs(r_st))


def gaussian_pair_bound(sigma: float, tau: float, metric) -> BoundValue:
    """Bound on the distance between N(0, sigma^2) and N(0, tau^2)."""
    metric = _metric(metric)
    if not (sigma > 0 and tau > 0):
        raise ValueError("both standard deviations must be positive")
    return BoundValue(float(_pair_terms(sigma, tau, metric)), metric, "gaussian_pair",
                      0.0, {"sigma": sigma, "tau": tau})


def variance_drift_bound(index: IndexModel, summands: SummandModel, metric,
                         tol: float = DEFAULT_TOL) -> BoundValue:
    """Distance between Z and sigma_hat*sqrt(N/mu)*zeta caused by sigma_hat_n != sigma_hat."""
    metric = _metric(metric)
    s2_lim = _require_limit(summands)
    inputs = {"index": index.describe(), "summands": summands.describe()}
    if summands.is_iid:
        return BoundValue(0.0, metric, "variance_drift", 0.0, inputs)
    s_lim = math.sqrt(s2_lim)

    def terms(n):
        sh, _ = summands.aggregate_arrays(int(n[-1]))
        sh = sh[n - 1]
        vals = _pair_terms(np.sqrt(sh), s_lim, metric)
        # the pair term carries the factor 2 already
        return vals if metric is Metric.KOLMOGOROV else np.sqrt(n) * vals

    if metric is Metric.KOLMOGOROV:
        # each min-term is below 1
        value, err = certified_sum(index, terms, tol, "bounded", 1.0)
        return BoundValue(value, metric, "variance_drift", err, inputs)
    _, s_hi = summands.variance_bounds()
    env = 2.0 * max(math.sqrt(s_hi), s_lim)
    mu = index.mean()
    value, err = certified_sum(index, terms, tol * math.sqrt(mu), "sqrt", env)
    return BoundValue(value / math.sqrt(mu), metric, "variance_drift", err / math.sqrt(mu), inputs)


def combined_limit_bound(index: IndexModel, summands: SummandModel, mode: str,
                         dk_index_vs_u: Optional[float] = None,
                         constants: ConstantsRegistry = DEFAULT_CONSTANTS,
                         tol: float = DEFAULT_TOL) -> BoundValue:
    """Distance from Z to sigma_hat*sqrt(U)*zeta (``mixture_dk``) or to N(0, sigma_hat^2) (``normal_w1``).

    Add :func:`w_vs_z_bound` to get a bound for W itself.
    """
    s2_lim = _require_limit(summands)
    if mode == "mixture_dk":
        if dk_index_vs_u is None:
            raise ValueError("mixture_dk mode needs the Kolmogorov distance of N/mu to U")
        return variance_drift_bound(index, summands, Metric.KOLMOGOROV, tol) + \
            mixture_transfer_dk(dk_index_vs_u)
    if mode == "normal_w1":
        return variance_drift_bound(index, summands, Metric.WASSERSTEIN, tol) + \
            mixture_vs_normal_w1_bound(math.sqrt(s2_lim), index)
    raise ValueError(f"unknown combination mode {mode!r}")


def geometric_inv_sqrt_envelope(p: float) -> tuple[float, float]:
    """Lower and upper envelope of E[N_p^(-1/2)] for geometric N_p."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    r = math.sqrt(p)
    return r, 2.0 * r / (1.0 + r)


def variance_of_w(index: IndexModel, summands: SummandModel,
                  tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Var(W) = mu^-1 sum_j sigma_j^2 P(N >= j), with its truncation error."""
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    mu = index.mean()
    if summands.is_iid:
        return summands.base.moments()[0], 0.0
    _, s_hi = summands.variance_bounds()
    # sum_{j>K} P(N >= j) = E[(N-K)^+] <= E[N; N > K]
    k = max(1, index.cutoff(tol * mu / s_hi, weight="first"))
    j = np.arange(1, k + 1)
    s2, _ = summands.moment_arrays(k)
    survival = _survival(index, j)
    value = float(np.dot(s2, survival)) / mu
    err = s_hi * index.tail_first_moment(k) / mu
    return value, err


def _survival(index: IndexModel, j: np.ndarray) -> np.ndarray:
    """P(N >= j) for an array of j >= 1."""
    if index.family == "geometric":
        return (1.0 - index.p) ** (j - 1)
    if index.family == "poisson":
        return stats.poisson.sf(j - 1, index.lam)
    if index.family == "binomial":
        return stats.binom.sf(j - 1, index.m, index.p)
    return np.array([index.tail(int(i) - 1) for i in j])


def geometric_laplace_bound(p: float, summands: SummandModel, mode: str = "iid",
                            constants: ConstantsRegistry = DEFAULT_CONSTANTS,
                            tol: float = DEFAULT_TOL,
                            sharp: bool = False) -> tuple[BoundValue, LimitLaw]:
    """Kolmogorov bound for a geometric sum against its Laplace limit.

    ``mode`` is ``iid``, ``noniid`` or ``noniid_alt``. In ``iid`` mode the default
    uses the envelope 2*sqrt(p) for E[N^-1/2]; ``sharp=True`` uses the series.
    """
    index = IndexModel.geometric(p)
    inputs = {"p": p, "summands": summands.describe(), "mode": mode}
    kolm = Metric.KOLMOGOROV
    if mode == "iid":
        if not summands.is_iid:
            raise ValueError("iid mode needs an iid summand model")
        s2, xi = summands.base.moments()
        sigma = math.sqrt(s2)
        factor = constants.c_k * xi / sigma ** 3
        if sharp:
            m, err = inv_sqrt_moment(index, tol)
            bound = BoundValue(factor * m + 12 * p, kolm, "geometric_iid_sharp", factor * err, inputs)
        else:
            bound = BoundValue(2 * factor * math.sqrt(p) + 12 * p, kolm, "geometric_iid", 0.0, inputs)
        return bound, laplace_for_sigma(sigma)
    if mode == "noniid":
        s2_lim = _require_limit(summands)
        drift = variance_drift_bound(index, summands, kolm, tol / 2)
        be = w_vs_z_bound(index, summands, kolm, constants, tol / 2, fast_path=False)
        bound = BoundValue(12 * p + drift.value + be.value, kolm, "geometric_noniid",
                           drift.truncation_error + be.truncation_error, inputs)
        return bound, laplace_for_sigma(math.sqrt(s2_lim))
    if mode == "noniid_alt":
        be = w_vs_z_bound(index, summands, kolm, constants, tol / 2, fast_path=False)
        ev, ev_err = variance_of_w(index, summands, tol / 2)
        k = index.cutoff(tol)
        s2, _ = summands.moment_arrays(max(k, 1))
        sup = float(s2.max())
        # a smaller E[sigma_N^2] only enlarges the second term
        alt = 12 * p * sup / ev
        alt_err = 12 * p * sup * (1.0 / max(ev - ev_err, 1e-300) - 1.0 / ev)
        bound = BoundValue(be.value + alt, kolm, "geometric_noniid_alt",
                           be.truncation_error + alt_err, inputs)
        return bound, laplace_for_sigma(math.sqrt(ev))
    raise ValueError(f"unknown mode {mode!r}")


def normal_limit_bound(index: IndexModel, summands: SummandModel, mode: str = "iid",
                       constants: ConstantsRegistry = DEFAULT_CONSTANTS,
                       tol: float = DEFAULT_TOL) -> tuple[BoundValue, LimitLaw]:
    """Wasserstein bound for a Poisson or binomial random sum against its normal limit."""
    if index.family not in ("poisson", "binomial"):
        raise ValueError("normal limit bounds are stated for Poisson and binomial indices")
    mu, var = index_moments(index)
    if not mu > 0:
        raise ValueError("index mean must be positive")
    w1 = Metric.WASSERSTEIN
    tag = "poisson" if index.family == "poisson" else "binomial"
    inputs = {"index": index.describe(), "summands": summands.describe(), "mode": mode}
    if mode == "iid":
        if not summands.is_iid:
            raise ValueError("iid mode needs an iid summand model")
        s2, xi = summands.base.moments()
        sigma = math.sqrt(s2)
        value = (constants.c_w * xi / s2 + sigma * SQRT_2_OVER_PI * math.sqrt(var / mu)) / math.sqrt(mu)
        return BoundValue(value, w1, f"{tag}_iid", 0.0, inputs), LimitLaw.normal(sigma)
    if mode == "noniid":
        s2_lim = _require_limit(summands)
        sigma = math.sqrt(s2_lim)
        be = w_vs_z_bound(index, summands, w1, constants, tol / 2, fast_path=False)
        drift = variance_drift_bound(index, summands, w1, tol / 2)
        mix = mixture_vs_normal_w1_bound(sigma, index)
        bound = BoundValue(be.value + drift.value + mix.value, w1, f"{tag}_noniid",
                           be.truncation_error + drift.truncation_error, inputs)
        return bound, LimitLaw.normal(sigma)
    raise ValueError(f"unknown mode {mode!r}")


def general_bound(index: IndexModel, summands: SummandModel, metric,
                  mixing_dk: Optional[float] = None,
                  constants: ConstantsRegistry = DEFAULT_CONSTANTS,
                  tol: float = DEFAULT_TOL) -> BoundValue:
    """Bound for W against the mixture limit for any index, by the triangle inequality.

    Kolmogorov needs ``mixing_dk``, a bound on d_K(N/mu, U); Wasserstein targets
    N(0, sigma_hat^2).
    """
    metric = _metric(metric)
    first = w_vs_z_bound(index, summands, metric, constants, tol / 2)
    mode = "mixture_dk" if metric is Metric.KOLMOGOROV else "normal_w1"
    second = combined_limit_bound(index, summands, mode, mixing_dk, constants, tol / 2)
    return first + second
