import math

import numpy as np
import pytest

from tvpsvm.errors import DomainError, InputError
from tvpsvm.forecast import (
    ForecastDensity,
    log_pred_likelihood,
    point_error,
    rw_benchmark,
    rw_forecast,
    simulate_predictive,
)
from tvpsvm.model import DrawSet, Family, ModelConfig, run_mcmc
from tvpsvm.rng import make_rng
from tvpsvm.shrinkage import PriorKind
from tvpsvm.simulate import simulate_svm


def _draws(n=1, T=5, tau=2.0, gamma=0.0, h=0.0, mu=0.0, phi=0.0, delta=0.0, sigma2=0.0,
           omega=0.0, family=Family.UC_SVM, prior=PriorKind.NONE, scales=None):
    k = 2 if family.in_mean else 1
    theta = np.zeros((n, T, k))
    theta[:, :, 0] = tau
    if k == 2:
        theta[:, :, 1] = gamma
    if scales is None:
        scales = {"omega": np.full((n, k), omega)}
    return DrawSet(family=family, prior=prior, y=np.zeros(T), theta=theta, h=np.full((n, T), h),
                   mu=np.full(n, mu), phi=np.full(n, phi), delta=np.full(n, delta),
                   sigma2=np.full(n, sigma2), scales=scales, include_delta=delta != 0.0)


def test_one_step_conditional_pair():
    d = simulate_predictive(_draws(), 1, make_rng(0))
    assert d.samples == [(2.0, 1.0)]
    assert d.point == 2.0


@pytest.mark.parametrize("horizon", [1, 2, 4, 8])
def test_martingale_trend(horizon):
    d = simulate_predictive(_draws(n=50, tau=1.7, phi=0.9, sigma2=0.1), horizon, make_rng(1))
    np.testing.assert_allclose(d.means, 1.7)


def test_mean_equals_last_trend_per_draw():
    ds = _draws(n=4, family=Family.UC_SV, omega=0.02, sigma2=0.1, phi=0.9)
    ds.theta[:, -1, 0] = [0.5, 1.0, 1.5, 2.0]
    d = simulate_predictive(ds, 1, make_rng(2))
    np.testing.assert_allclose(d.means, [0.5, 1.0, 1.5, 2.0])
    assert d.point == pytest.approx(1.25)


def test_variance_grows_with_horizon_without_feedback():
    ds = _draws(n=1, family=Family.UC_SV, omega=0.5, sigma2=0.0)
    v = [simulate_predictive(ds, hz, make_rng(3)).variances[0] for hz in (1, 2, 3)]
    np.testing.assert_allclose(v, [1.5, 2.0, 2.5])


def test_clamp_flag():
    d = simulate_predictive(_draws(n=3, h=25.0, mu=25.0, phi=0.5, sigma2=0.01), 2, make_rng(4))
    assert d.clamped and np.all(np.isfinite(d.variances))


@pytest.mark.parametrize("prior", [PriorKind.SHS, PriorKind.DHS])
def test_time_varying_scales_forecast(prior):
    n = 200
    if prior is PriorKind.SHS:
        scales = {"lam": np.full((n, 2), 0.01)}
    else:
        scales = {"psi_last": np.full((n, 2), -5.0), "dhs_mu": np.full((n, 2), -5.0),
                  "dhs_phi": np.full((n, 2), 0.5)}
    ds = _draws(n=n, prior=prior, scales=scales, sigma2=0.05, phi=0.9, delta=0.05)
    for hz in (1, 4):
        d = simulate_predictive(ds, hz, make_rng(5))
        assert len(d) == n and np.all(d.variances > 0) and np.all(np.isfinite(d.means))


def test_regressors_required():
    ds = _draws(family=Family.TVP_SVM, scales={"omega": np.zeros((1, 3))})
    ds.theta = np.zeros((1, 5, 3))
    with pytest.raises(InputError):
        simulate_predictive(ds, 1, make_rng(0))
    d = simulate_predictive(ds, 2, make_rng(0), z_future=[[1.0], [1.0]])
    assert len(d) == 1


def test_horizon_must_be_positive():
    with pytest.raises(DomainError):
        simulate_predictive(_draws(), 0, make_rng(0))


def test_lpl_examples():
    single = ForecastDensity(1, [0.0], [1.0])
    assert log_pred_likelihood(single, 0.0) == pytest.approx(-0.91894, abs=5e-6)
    assert log_pred_likelihood(single, 0.0) == pytest.approx(-0.5 * math.log(2 * math.pi), rel=1e-14)
    double = ForecastDensity(1, [0.0, 0.0], [1.0, 1.0])
    assert log_pred_likelihood(double, 0.3) == pytest.approx(log_pred_likelihood(single, 0.3), rel=1e-14)
    far = log_pred_likelihood(ForecastDensity(1, [0.0, 1.0], [1.0, 1e-4]), 20.0)
    assert math.isfinite(far) and far < -150
    with pytest.raises(InputError):
        log_pred_likelihood(ForecastDensity(1, [], []), 0.0)
    with pytest.raises(InputError):
        log_pred_likelihood(single, float("nan"))


def test_lpl_below_best_component():
    rng = np.random.default_rng(9)
    for _ in range(50):
        m, v = rng.normal(0, 2, 7), rng.gamma(2, 1, 7)
        x = rng.normal(0, 3)
        best = np.max(-0.5 * (np.log(2 * np.pi * v) + (x - m) ** 2 / v))
        assert log_pred_likelihood(ForecastDensity(1, m, v), x) <= best + 1e-12


def test_density_quantile_and_cdf():
    d = ForecastDensity(1, [0.0, 2.0], [1.0, 1.0])
    assert d.cdf(1.0) == pytest.approx(0.5)
    assert d.quantile(0.5) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(DomainError):
        ForecastDensity(1, [0.0], [0.0])


def test_rw_examples():
    series = np.arange(1.0, 11.0)
    assert rw_forecast(series, 1).point == 10.0
    flat = rw_benchmark(np.full(20, 3.0))
    assert flat.sigma2 == 1e-6
    assert math.isfinite(log_pred_likelihood(flat.forecast(1), 3.0))
    walk = np.cumsum(np.random.default_rng(11).normal(size=401))
    assert 0.85 < rw_benchmark(walk).sigma2 < 1.15
    assert rw_forecast(walk, 4).variances[0] == pytest.approx(4 * rw_benchmark(walk).sigma2)
    with pytest.raises(InputError):
        rw_forecast(np.ones(7), 1)


def test_point_error_convention():
    assert point_error(2.0, 2.0) == 0.0
    assert point_error(1.0, 3.5) == 2.5
    assert point_error(3.5, 1.0) == -2.5


@pytest.mark.slow
def test_one_step_interval_calibration():
    # 200 synthetic UC-SV series, each forecast one step past its end
    hits = 0
    for rep in range(200):
        data = simulate_svm(81, make_rng(500, rep), gamma=0.0, phi=0.9, sigma2=0.1, omega_tau=0.01)
        cfg = ModelConfig(family="UC-SV", prior="None", burn_in=300, keep=400, seed=rep)
        dens = simulate_predictive(run_mcmc(data["y"][:80], None, cfg), 1, make_rng(600, rep))
        lo, hi = dens.quantile(0.05), dens.quantile(0.95)
        hits += lo <= data["y"][80] <= hi
    assert 0.85 <= hits / 200 <= 0.95
