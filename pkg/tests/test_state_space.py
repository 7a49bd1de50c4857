import numpy as np
import pytest

from oracles import dense_random_walk_moments
from tvpsvm.errors import NumericalError
from tvpsvm.rng import make_rng
from tvpsvm.state_space import (
    LinearGaussianSystem,
    ar1_ffbs,
    ar1_loglik,
    ar1_prior_logpdf,
    ffbs,
    kalman_filter,
    smoother_moments,
)


def random_system(rng, T, k, missing=False):
    x = rng.normal(size=(T, k))
    x[:, 0] = 1.0
    y = rng.normal(size=T) * 2
    if missing and T > 2:
        y[rng.integers(0, T)] = np.nan
    return LinearGaussianSystem(
        y=y, x=x, r=rng.uniform(0.2, 2.0, T), q=rng.uniform(0.01, 0.5, (T, k)),
        m0=rng.normal(size=k), p0=rng.uniform(0.5, 3.0, k),
    )


@pytest.mark.parametrize("seed", range(20))
def test_filter_and_smoother_match_dense_oracle(seed):
    rng = make_rng(seed)
    sys = random_system(rng, int(rng.integers(1, 11)), int(rng.integers(1, 4)), missing=seed % 4 == 0)
    _, _, loglik = kalman_filter(sys)
    sm, sP = smoother_moments(sys)
    ref_ll, ref_m, ref_P = dense_random_walk_moments(sys.y, sys.x, sys.r, sys.q, sys.m0, sys.p0)
    assert loglik == pytest.approx(ref_ll, rel=1e-8)
    np.testing.assert_allclose(sm, ref_m, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(sP, ref_P, rtol=1e-8, atol=1e-10)


def test_scalar_filter_hand_computed():
    # one step: prior N(0, 1), q = 1, r = 1, x = 1, y = 2
    sys = LinearGaussianSystem(y=[2.0], x=[[1.0]], r=1.0, q=1.0, m0=0.0, p0=1.0)
    ms, Ps, ll = kalman_filter(sys)
    assert ms[0, 0] == pytest.approx(2 * 2 / 3)
    assert Ps[0, 0, 0] == pytest.approx(2 / 3)
    assert ll == pytest.approx(-0.5 * (np.log(2 * np.pi * 3) + 4 / 3))


def test_all_missing_returns_prior_moments():
    sys = LinearGaussianSystem(y=[np.nan] * 3, x=np.ones((3, 1)), r=1.0, q=0.5, m0=1.0, p0=2.0)
    sm, sP = smoother_moments(sys)
    np.testing.assert_allclose(sm[:, 0], 1.0)
    np.testing.assert_allclose(sP[:, 0, 0], [2.5, 3.0, 3.5])
    assert kalman_filter(sys)[2] == 0.0


def test_zero_innovations_give_constant_paths():
    rng = make_rng(3)
    sys = LinearGaussianSystem(y=rng.normal(size=8), x=np.ones((8, 2)), r=1.0, q=0.0, m0=0.0, p0=1.0)
    draw = ffbs(sys, rng)
    np.testing.assert_allclose(draw.path, np.tile(draw.initial, (8, 1)), atol=1e-9)


def test_ffbs_mean_within_three_standard_errors():
    rng = make_rng(11)
    sys = random_system(rng, 50, 2)
    sm, sP = smoother_moments(sys)
    n = 20_000
    acc = np.zeros_like(sm)
    for _ in range(n):
        acc += ffbs(sys, rng).path
    se = np.sqrt(np.einsum("tii->ti", sP) / n)
    assert np.all(np.abs(acc / n - sm) < 3 * se + 1e-12)


def test_ffbs_initial_state_moments():
    # theta_0 | y from the dense oracle: extend the system with a leading missing observation
    rng = make_rng(4)
    base = random_system(rng, 6, 1)
    ext = LinearGaussianSystem(y=np.r_[np.nan, base.y], x=np.vstack([base.x[:1], base.x]),
                               r=np.r_[1.0, base.r], q=np.vstack([np.zeros((1, 1)), base.q]),
                               m0=base.m0, p0=base.p0)
    _, ref_m, ref_P = dense_random_walk_moments(ext.y, ext.x, ext.r, ext.q, ext.m0, ext.p0)
    draws = np.array([ffbs(base, rng).initial[0] for _ in range(20_000)])
    se = np.sqrt(ref_P[0, 0, 0] / draws.size)
    assert abs(draws.mean() - ref_m[0, 0]) < 4 * se
    assert draws.var() == pytest.approx(ref_P[0, 0, 0], rel=0.05)


def test_invalid_inputs_raise():
    with pytest.raises(NumericalError):
        LinearGaussianSystem(y=[1.0], x=[[1.0]], r=0.0, q=1.0, m0=0.0, p0=1.0)
    with pytest.raises(NumericalError):
        LinearGaussianSystem(y=[1.0], x=[[np.nan]], r=1.0, q=1.0, m0=0.0, p0=1.0)
    with pytest.raises(ValueError):
        LinearGaussianSystem(y=[1.0, 2.0], x=[[1.0]], r=1.0, q=1.0, m0=0.0, p0=1.0)


def test_ar1_loglik_matches_dense_gaussian():
    from scipy.stats import multivariate_normal

    rng = make_rng(8)
    T, phi = 7, 0.8
    c = rng.normal(size=T)
    tv = rng.uniform(0.1, 0.5, T)
    ov = rng.uniform(0.5, 1.5, T)
    obs = rng.normal(size=T)
    m1, p1 = 0.3, 1.2
    # state mean and covariance by direct recursion
    A = np.zeros((T, T))
    mean = np.zeros(T)
    mean[0] = m1
    for t in range(1, T):
        mean[t] = c[t] + phi * mean[t - 1]
    var0 = np.r_[p1, tv[1:]]
    for t in range(T):
        for s in range(t + 1):
            A[t, s] = phi ** (t - s)
    cov = A @ np.diag(var0) @ A.T
    ref = multivariate_normal(mean, cov + np.diag(ov)).logpdf(obs)
    assert ar1_loglik(obs, ov, c, phi, tv, m1, p1) == pytest.approx(ref, rel=1e-10)
    path, ll = ar1_ffbs(obs, ov, c, phi, tv, m1, p1, rng)
    assert ll == pytest.approx(ref, rel=1e-10)
    assert ar1_prior_logpdf(path, c, phi, tv, m1, p1) == pytest.approx(
        multivariate_normal(mean, cov).logpdf(path), rel=1e-10)


def test_ar1_degenerate_innovation_is_deterministic():
    rng = make_rng(1)
    path, _ = ar1_ffbs(np.full(5, np.nan), 1.0, 0.1, 0.5, 0.0, 2.0, 0.0, rng)
    expected = [2.0]
    for _ in range(4):
        expected.append(0.1 + 0.5 * expected[-1])
    np.testing.assert_allclose(path, expected, atol=1e-12)
