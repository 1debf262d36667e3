import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from randsum.bounds import (ConstantsRegistry, Metric, combined_limit_bound, conditional_be_bound,
                            gaussian_pair_bound, general_bound, geometric_inv_sqrt_envelope,
                            geometric_laplace_bound, mixture_transfer_dk,
                            mixture_vs_normal_w1_bound, normal_limit_bound, variance_drift_bound,
                            variance_of_w, w_vs_z_bound)
from randsum.distances import sample_random_sum
from randsum.index_models import IndexModel, ScaledIndexLimit, exact_dk_scaled_index
from randsum.summands import SummandDist, SummandModel

RAD = SummandModel.iid(SummandDist.rademacher())
HARM = SummandModel.harmonic_schedule(SummandDist.rademacher())
K, W = Metric.KOLMOGOROV, Metric.WASSERSTEIN


def harmonic_drift_oracle(p, terms=400):
    # sum_n P(N=n) min(|1 - 1/s_n|, |1 - s_n|) with s_n = 1 + H_n / n
    mpmath.mp.dps = 30
    p = mpmath.mpf(p)
    total = mpmath.mpf(0)
    for n in range(1, terms):
        s = 1 + mpmath.harmonic(n) / n
        total += p * (1 - p) ** (n - 1) * min(abs(1 - 1 / s), abs(1 - s))
    return float(total)


def test_conditional_be_bound():
    for n in (1, 4, 100):
        assert conditional_be_bound(n, RAD, n, K).value == pytest.approx(0.56 / math.sqrt(n), rel=1e-14)
        assert conditional_be_bound(n, RAD, n, W).value == pytest.approx(6 / math.sqrt(n), rel=1e-14)
    assert conditional_be_bound(0, RAD, 3.0, K).value == 0.0


def test_w_vs_z_bound_examples():
    p = 0.04
    kb = w_vs_z_bound(IndexModel.geometric(p), RAD, K)
    assert kb.value <= 2 * 0.56 * math.sqrt(p)
    assert w_vs_z_bound(IndexModel.poisson(25.0), RAD, W).value == pytest.approx(6 / 5, rel=1e-14)
    g = w_vs_z_bound(IndexModel.poisson(9.0), SummandModel.iid(SummandDist.gaussian(2.0)), K)
    assert math.isfinite(g.value) and g.value >= 0


def test_w_vs_z_series_matches_fast_path():
    # the series path on an iid model must agree with the closed form
    for index in (IndexModel.geometric(0.05), IndexModel.binomial(40, 0.3)):
        for metric in (K, W):
            fast = w_vs_z_bound(index, RAD, metric)
            slow = w_vs_z_bound(index, RAD, metric, fast_path=False)
            # a positive P(N = 0) drops out of the series under the N = 0 convention
            p0 = float(index.pmf(0))
            target = fast.value * (1 - p0) if metric is W else fast.value
            assert slow.value == pytest.approx(target, abs=1e-9)


def test_mixture_transfer_and_normal_w1():
    assert mixture_transfer_dk(0.0).value == 0.0
    dk = exact_dk_scaled_index(IndexModel.geometric(0.1), ScaledIndexLimit.exponential())
    assert mixture_transfer_dk(dk).value == dk
    assert mixture_transfer_dk(1.2).value == 1.2
    with pytest.raises(ValueError):
        mixture_transfer_dk(-0.1)
    assert mixture_vs_normal_w1_bound(3.0, IndexModel.binomial(20, 1.0)).value == 0.0
    assert mixture_vs_normal_w1_bound(1.0, IndexModel.poisson(64)).value == pytest.approx(
        math.sqrt(2 / math.pi) / 8, abs=1e-15)
    assert mixture_vs_normal_w1_bound(1.0, IndexModel.geometric(0.5)).value == pytest.approx(
        math.sqrt(2 / math.pi) * math.sqrt(0.5), abs=1e-15)


def test_gaussian_pair_bound():
    for metric in (K, W):
        assert gaussian_pair_bound(1.3, 1.3, metric).value == 0.0
    assert gaussian_pair_bound(1.0, 2.0, K).value == 0.75
    assert gaussian_pair_bound(1.0, 2.0, W).value == 3.0


def test_variance_drift_bound():
    assert variance_drift_bound(IndexModel.poisson(4.0), RAD, K).value == 0.0
    b = variance_drift_bound(IndexModel.geometric(0.5), HARM, K, tol=1e-12)
    assert b.value == pytest.approx(harmonic_drift_oracle(0.5), abs=1e-12)
    assert b.value <= 1.0
    wb = variance_drift_bound(IndexModel.geometric(0.5), HARM, W, tol=1e-12)
    assert wb.value > 0 and wb.truncation_error <= 1e-12


def test_combined_limit_bound():
    idx = IndexModel.geometric(0.1)
    assert combined_limit_bound(idx, RAD, "mixture_dk", 0.3).value == 0.3
    pois = combined_limit_bound(IndexModel.poisson(16.0), RAD, "normal_w1")
    assert pois.value == pytest.approx(math.sqrt(2 / math.pi) / 4, abs=1e-15)
    mix = combined_limit_bound(idx, HARM, "mixture_dk", 1.2, tol=1e-12)
    assert mix.value == pytest.approx(harmonic_drift_oracle(0.1, 2000) + 1.2, abs=1e-11)
    with pytest.raises(ValueError):
        combined_limit_bound(idx, RAD, "mixture_dk")


def test_envelope():
    assert geometric_inv_sqrt_envelope(1.0) == (1.0, 1.0)
    assert geometric_inv_sqrt_envelope(0.25) == pytest.approx((0.5, 2 / 3))
    assert geometric_inv_sqrt_envelope(0.01) == pytest.approx((0.1, 0.2 / 1.1))
    with pytest.raises(ValueError):
        geometric_inv_sqrt_envelope(0.0)


def test_geometric_laplace_bound_iid():
    bound, target = geometric_laplace_bound(0.01, RAD)
    assert bound.value == pytest.approx(0.232, abs=1e-12)
    assert target.kind == "laplace" and target.b == pytest.approx(1 / math.sqrt(2))
    sharp, _ = geometric_laplace_bound(0.01, RAD, sharp=True)
    assert sharp.certified <= bound.value


def test_noniid_modes_reduce_on_iid_model():
    for p in (0.5, 0.05, 0.003):
        sharp, _ = geometric_laplace_bound(p, RAD, "iid", sharp=True)
        envelope, _ = geometric_laplace_bound(p, RAD, "iid")
        non, _ = geometric_laplace_bound(p, RAD, "noniid", tol=1e-10)
        alt, _ = geometric_laplace_bound(p, RAD, "noniid_alt", tol=1e-10)
        assert non.value == pytest.approx(sharp.value, abs=1e-9)
        assert alt.value == pytest.approx(sharp.value, abs=1e-9)
        assert alt.value <= envelope.value


def test_geometric_noniid_harmonic():
    bound, target = geometric_laplace_bound(0.05, HARM, "noniid", tol=1e-8)
    assert bound.truncation_error <= 1e-8
    assert bound.value == pytest.approx(1.006875874236424, abs=1e-8)
    assert target.b == pytest.approx(1 / math.sqrt(2))
    alt, alt_target = geometric_laplace_bound(0.05, HARM, "noniid_alt", tol=1e-8)
    ev, _ = variance_of_w(IndexModel.geometric(0.05), HARM, 1e-12)
    assert alt_target.b == pytest.approx(math.sqrt(ev / 2), rel=1e-10)
    with pytest.raises(ValueError):
        geometric_laplace_bound(0.05, HARM, "iid")


def test_normal_limit_bound_closed_forms():
    b, target = normal_limit_bound(IndexModel.poisson(100.0), RAD)
    assert b.value == pytest.approx((6 + math.sqrt(2 / math.pi)) / 10, abs=1e-12)
    assert target.kind == "normal" and target.sigma == 1.0
    b, _ = normal_limit_bound(IndexModel.binomial(100, 0.25), RAD)
    assert b.value == pytest.approx((6 + math.sqrt(1.5 / math.pi)) / 5, abs=1e-12)
    b, _ = normal_limit_bound(IndexModel.binomial(49, 1.0), RAD)
    assert b.value == pytest.approx(6 / 7, abs=1e-15)
    with pytest.raises(ValueError):
        normal_limit_bound(IndexModel.geometric(0.5), RAD)


def test_normal_limit_noniid_reduces_at_large_mean():
    # on iid summands the only gap is the N = 0 term, P(N = 0) * C_W xi / (sigma^2 sqrt(mu))
    index = IndexModel.poisson(50.0)
    iid, _ = normal_limit_bound(index, RAD, "iid")
    non, _ = normal_limit_bound(index, RAD, "noniid")
    gap = math.exp(-50.0) * 6 / math.sqrt(50.0)
    assert non.value == pytest.approx(iid.value - gap, abs=1e-9)
    index = IndexModel.binomial(64, 0.25)
    iid, _ = normal_limit_bound(index, RAD, "iid")
    non, _ = normal_limit_bound(index, RAD, "noniid")
    gap = 0.75 ** 64 * 6 / 4.0
    assert non.value == pytest.approx(iid.value - gap, abs=1e-9)


def test_variance_of_w():
    assert variance_of_w(IndexModel.poisson(3.0), RAD)[0] == 1.0
    two = SummandModel.iid(SummandDist.rademacher().scaled(math.sqrt(2.0)))
    assert variance_of_w(IndexModel.geometric(0.3), two)[0] == pytest.approx(2.0)
    value, err = variance_of_w(IndexModel.geometric(0.5), HARM, 1e-13)
    assert value == pytest.approx(1 + math.log(2), abs=1e-12)
    assert err <= 1e-13
    w = sample_random_sum(IndexModel.geometric(0.5), HARM, np.random.default_rng(3), 400_000)
    se = w.var() * math.sqrt(2.0 / (w.size - 1)) * 2  # kurtosis-inflated standard error
    assert abs(w.var() - value) <= 3 * se


def test_general_bound_composes():
    index = IndexModel.poisson(30.0)
    dk = exact_dk_scaled_index(index, ScaledIndexLimit.point_mass())
    b = general_bound(index, RAD, K, dk)
    ref = w_vs_z_bound(index, RAD, K, tol=1e-14)
    assert abs(b.value - (ref.value + dk)) <= b.truncation_error + ref.truncation_error
    with pytest.raises(ValueError):
        general_bound(index, RAD, K)


# property-based checks

probs = st.floats(min_value=1e-4, max_value=0.999)


@given(probs, st.floats(min_value=0.1, max_value=2.0), st.floats(min_value=1.01, max_value=3.0))
def test_monotone_in_constants(p, c, factor):
    low, _ = geometric_laplace_bound(p, RAD, constants=ConstantsRegistry(c_k=c))
    high, _ = geometric_laplace_bound(p, RAD, constants=ConstantsRegistry(c_k=c * factor))
    assert high.value > low.value
    lw, _ = normal_limit_bound(IndexModel.poisson(1 / p), RAD, constants=ConstantsRegistry(c_w=c))
    hw, _ = normal_limit_bound(IndexModel.poisson(1 / p), RAD, constants=ConstantsRegistry(c_w=c * factor))
    assert hw.value > lw.value


@given(probs, st.floats(min_value=0.05, max_value=20.0))
def test_geometric_bound_scale_invariant(p, c):
    base = SummandDist.two_point(-1.0, 3.0)
    b1, t1 = geometric_laplace_bound(p, SummandModel.iid(base))
    b2, t2 = geometric_laplace_bound(p, SummandModel.iid(base.scaled(c)))
    assert b2.value == pytest.approx(b1.value, rel=1e-12)
    assert t2.b == pytest.approx(c * t1.b, rel=1e-12)


@given(st.floats(min_value=0.01, max_value=1e6))
def test_poisson_ratio_two(lam):
    a, _ = normal_limit_bound(IndexModel.poisson(lam), RAD)
    b, _ = normal_limit_bound(IndexModel.poisson(4 * lam), RAD)
    assert a.value / b.value == pytest.approx(2.0, rel=1e-13)


@given(st.integers(min_value=1, max_value=10 ** 5), st.floats(min_value=0.01, max_value=1.0))
def test_binomial_homogeneity(m, p):
    a, _ = normal_limit_bound(IndexModel.binomial(m, p), RAD)
    b, _ = normal_limit_bound(IndexModel.binomial(4 * m, p), RAD)
    assert a.value / b.value == pytest.approx(2.0, rel=1e-12)


@given(probs)
def test_envelope_consistency(p):
    b = w_vs_z_bound(IndexModel.geometric(p), RAD, K)
    assert b.certified <= 2 * 0.56 * math.sqrt(p) * (1 + 1e-12)


@given(st.floats(min_value=0.05, max_value=20), st.floats(min_value=0.05, max_value=20))
def test_pair_bound_nonnegative_symmetric_kolmogorov(s, t):
    a = gaussian_pair_bound(s, t, K).value
    assert a >= 0 and a == pytest.approx(gaussian_pair_bound(t, s, K).value)


@given(st.sampled_from(["poisson", "binomial", "geometric"]), st.floats(min_value=0.5, max_value=200))
def test_bounds_finite_nonnegative(family, scale):
    index = {"poisson": IndexModel.poisson(scale),
             "binomial": IndexModel.binomial(int(scale) + 1, 0.5),
             "geometric": IndexModel.geometric(1 / (1 + scale))}[family]
    for metric in (K, W):
        b = w_vs_z_bound(index, HARM, metric, tol=1e-8)
        assert math.isfinite(b.value) and b.value >= 0
