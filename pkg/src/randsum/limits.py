"""Target laws: centered normal, Laplace, and normal scale mixtures sigma*sqrt(U)*zeta."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate, special

from .index_models import IndexModel, ScaledIndexLimit, sample_index

MIXTURE_TOL = 1e-9
# Mass of the scaled index discarded when a mixture sums over a discrete law.
MIXING_TAIL = 1e-13

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class IntegrationError(RuntimeError):
    """Quadrature did not reach the requested accuracy."""


def std_normal_cdf(x):
    return special.ndtr(x)


def std_normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class LimitLaw:
    kind: str
    sigma: float = 1.0
    a: float = 0.0
    b: float = 1.0
    mixing: Optional[Union[ScaledIndexLimit, IndexModel]] = None

    def __post_init__(self):
        if self.kind not in ("normal", "laplace", "scale_mixture"):
            raise ValueError(f"unknown limit law {self.kind!r}")
        if self.kind == "laplace":
            if not self.b > 0:
                raise ValueError(f"laplace scale must be positive, got {self.b}")
        elif not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.kind == "scale_mixture" and self.mixing is None:
            raise ValueError("scale mixture needs a mixing law")

    @classmethod
    def normal(cls, sigma: float = 1.0) -> "LimitLaw":
        return cls("normal", sigma=float(sigma))

    @classmethod
    def laplace(cls, a: float = 0.0, b: float = 1.0) -> "LimitLaw":
        return cls("laplace", a=float(a), b=float(b))

    @classmethod
    def scale_mixture(cls, sigma: float, mixing) -> "LimitLaw":
        return cls("scale_mixture", sigma=float(sigma), mixing=mixing)

    def describe(self) -> dict:
        if self.kind == "normal":
            return {"kind": "normal", "sigma": self.sigma}
        if self.kind == "laplace":
            return {"kind": "laplace", "a": self.a, "b": self.b}
        mix = self.mixing.describe() if isinstance(self.mixing, IndexModel) else self.mixing.kind
        return {"kind": "scale_mixture", "sigma": self.sigma, "mixing": mix}

    # discrete mixing over N/mu

    def _discrete_scales(self):
        model = self.mixing
        mu = model.mean()
        k = model.cutoff(MIXING_TAIL)
        n = np.arange(0, k + 1)
        w = model.pmf(n)
        keep = w > 0
        return self.sigma * np.sqrt(n[keep] / mu), w[keep], model.tail(k)

    def mixing_deficiency(self) -> float:
        if self.kind == "scale_mixture" and isinstance(self.mixing, IndexModel):
            return self._discrete_scales()[2]
        return 0.0

    def _scales_expect(self, z, fn_pos, fn_zero):
        """sum_n w_n f(z; s_n) for the discrete mixture, over an array z."""
        s, w, _ = self._discrete_scales()
        z = np.atleast_1d(np.asarray(z, dtype=float))
        out = np.zeros(z.shape)
        pos = s > 0
        for block in np.array_split(np.arange(z.size), max(1, z.size * s.size // 2_000_000)):
            zz = z[block][:, None]
            vals = fn_pos(zz, s[pos][None, :]) @ w[pos]
            if np.any(~pos):
                vals = vals + fn_zero(z[block]) * w[~pos].sum()
            out[block] = vals
        return out

    def _continuous_expect(self, fn_u, z):
        """E[g(z, U)] for a continuous mixing law, by quadrature in t = sqrt(u)."""
        mix = self.mixing
        if mix.kind == "exponential_rate_one":
            def density(t):
                return 2.0 * t * math.exp(-t * t)
        elif mix.pdf_fn is not None:
            def density(t):
                return 2.0 * t * mix.pdf_fn(t * t)
        else:
            raise IntegrationError("mixture CDF over a custom mixing law needs its density")
        out = []
        for zi in np.atleast_1d(z):
            if mix.kind == "exponential_rate_one":
                # integrand varies fastest near t = |z|/sigma; mass beyond t=9 is e^-81
                kink = min(abs(zi) / self.sigma, 8.0)
                pts = [kink] if kink > 0 else None
                val, err = integrate.quad(lambda t: fn_u(zi, t) * density(t), 0.0, 9.0,
                                          epsabs=1e-13, epsrel=1e-13, limit=400, points=pts)
            else:
                val, err = integrate.quad(lambda t: fn_u(zi, t) * density(t), 0.0, np.inf,
                                          epsabs=1e-13, epsrel=1e-13, limit=400)
            if err > MIXTURE_TOL:
                raise IntegrationError(f"mixture quadrature error {err:.2e} at z={zi}")
            out.append(val)
        return np.array(out)

    # distribution functions

    def cdf(self, z):
        scalar = np.isscalar(z)
        z = np.asarray(z, dtype=float)
        if self.kind == "normal":
            out = std_normal_cdf(z / self.sigma)
        elif self.kind == "laplace":
            u = (z - self.a) / self.b
            out = np.where(u < 0, 0.5 * np.exp(np.minimum(u, 0)), 1 - 0.5 * np.exp(-np.maximum(u, 0)))
        elif isinstance(self.mixing, IndexModel):
            out = self._scales_expect(z, lambda zz, s: std_normal_cdf(zz / s),
                                      lambda zz: (zz >= 0).astype(float)).reshape(z.shape)
        elif self.mixing.kind == "point_mass_one":
            out = std_normal_cdf(z / self.sigma)
        else:
            sig = self.sigma

            def g(zi, t):
                if t == 0.0:
                    return 1.0 if zi >= 0 else 0.0
                return float(special.ndtr(zi / (sig * t)))
            out = self._continuous_expect(g, z.ravel()).reshape(z.shape)
        return float(out) if scalar else np.asarray(out)

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "normal":
            return std_normal_pdf(z / self.sigma) / self.sigma
        if self.kind == "laplace":
            return np.exp(-np.abs(z - self.a) / self.b) / (2 * self.b)
        if isinstance(self.mixing, IndexModel):
            return self._scales_expect(z, lambda zz, s: std_normal_pdf(zz / s) / s,
                                       lambda zz: np.zeros(zz.shape)).reshape(z.shape)
        if self.mixing.kind == "point_mass_one":
            return std_normal_pdf(z / self.sigma) / self.sigma
        sig = self.sigma

        def g(zi, t):
            if t == 0.0:
                return 0.0
            return float(std_normal_pdf(zi / (sig * t)) / (sig * t))
        return self._continuous_expect(g, z.ravel()).reshape(z.shape)

    def mean(self) -> float:
        return self.a if self.kind == "laplace" else 0.0

    def partial_mean(self, q):
        """E[Y; Y <= q]."""
        q = np.asarray(q, dtype=float)
        if self.kind == "normal":
            return -self.sigma * std_normal_pdf(q / self.sigma)
        if self.kind == "laplace":
            a, b = self.a, self.b
            u = (q - a) / b
            low = 0.5 * np.exp(np.minimum(u, 0)) * (q - b)
            high = a - 0.5 * np.exp(-np.maximum(u, 0)) * (q + b)
            return np.where(u <= 0, low, high)
        if isinstance(self.mixing, IndexModel):
            return self._scales_expect(q, lambda zz, s: -s * std_normal_pdf(zz / s),
                                       lambda zz: np.zeros(zz.shape)).reshape(q.shape)
        if self.mixing.kind == "point_mass_one":
            return -self.sigma * std_normal_pdf(q / self.sigma)
        sig = self.sigma

        def g(zi, t):
            if t == 0.0:
                return 0.0
            return float(-sig * t * std_normal_pdf(zi / (sig * t)))
        return self._continuous_expect(g, q.ravel()).reshape(q.shape)

    def excess_mean(self, t: float) -> float:
        """E[(Y - t)^+]."""
        return float(self.mean() - self.partial_mean(t) - t * (1.0 - self.cdf(t)))

    def shortfall_mean(self, t: float) -> float:
        """E[(t - Y)^+]."""
        return float(t * self.cdf(t) - self.partial_mean(t))

    def first_abs_moment(self) -> float:
        return self.excess_mean(0.0) + self.shortfall_mean(0.0)

    def quantile(self, q):
        scalar = np.isscalar(q)
        q = np.asarray(q, dtype=float)
        if np.any((q <= 0) | (q >= 1)):
            raise ValueError("quantile level must lie strictly between 0 and 1")
        if self.kind == "normal" or (self.kind == "scale_mixture"
                                     and isinstance(self.mixing, ScaledIndexLimit)
                                     and self.mixing.kind == "point_mass_one"):
            out = self.sigma * special.ndtri(q)
        elif self.kind == "laplace":
            d = q - 0.5
            out = self.a - self.b * np.sign(d) * np.log1p(-2 * np.abs(d))
        else:
            out = self._bisect_quantile(q)
        return float(out) if scalar else out

    def _bisect_quantile(self, q: np.ndarray) -> np.ndarray:
        """Generalized inverse inf{x : F(x) >= q} by vectorized bisection."""
        flat = q.ravel()
        lo = np.full(flat.shape, -1.0)
        hi = np.full(flat.shape, 1.0)
        for _ in range(200):
            need = self.cdf(lo) >= flat
            if not need.any():
                break
            lo[need] *= 2
        for _ in range(200):
            need = self.cdf(hi) < flat
            if not need.any():
                break
            hi[need] *= 2
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < flat
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 1e-13 * np.maximum(1.0, np.abs(hi))):
                break
        return hi.reshape(q.shape)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if count < 1:
            raise ValueError(f"count must be positive, got {count}")
        if self.kind == "normal":
            return self.sigma * rng.standard_normal(count)
        if self.kind == "laplace":
            return rng.laplace(self.a, self.b, size=count)
        if isinstance(self.mixing, IndexModel):
            u = sample_index(self.mixing, rng, count) / self.mixing.mean()
        elif self.mixing.kind == "exponential_rate_one":
            u = rng.exponential(1.0, size=count)
        elif self.mixing.kind == "point_mass_one":
            u = np.ones(count)
        else:
            raise ValueError("sampling a custom mixing law is not supported")
        return self.sigma * np.sqrt(u) * rng.standard_normal(count)

    def support_edges(self, tail_tol: float) -> tuple[float, float]:
        """[L, R] with E[(L - Y)^+] and E[(Y - R)^+] both at most ``tail_tol``."""
        r = 1.0
        while self.excess_mean(r) > tail_tol:
            r *= 1.5
        left = 1.0
        while self.shortfall_mean(-left) > tail_tol:
            left *= 1.5
        return -left, r


def limit_cdf(law: LimitLaw, z):
    return law.cdf(z)


def limit_quantile(law: LimitLaw, q):
    return law.quantile(q)


def sample_limit(law: LimitLaw, rng: np.random.Generator, count: int) -> np.ndarray:
    return law.sample(rng, count)


def laplace_for_sigma(sigma: float) -> LimitLaw:
    """Laplace(0, sigma/sqrt(2)), the variance-sigma^2 Laplace law."""
    return LimitLaw.laplace(0.0, sigma / math.sqrt(2.0))


__all__ = [
    "LimitLaw",
    "IntegrationError",
    "limit_cdf",
    "limit_quantile",
    "sample_limit",
    "laplace_for_sigma",
    "std_normal_cdf",
    "std_normal_pdf",
]
