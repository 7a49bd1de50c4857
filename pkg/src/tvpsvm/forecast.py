"""Predictive simulation, log predictive likelihoods and the random-walk benchmark.

A predictive density is stored as a mixture of Gaussians with one component
per retained draw: the conditional mean and variance of inflation at the
target date given that draw's simulated volatility path and innovation
scales.  Intermediate inflation values are simulated so that the ``delta``
feedback term of the volatility equation sees a coherent path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp
from scipy.stats import norm

from .errors import DomainError, InputError
from .rng import sample_inverse_gamma
from .shrinkage import PriorKind, dhs_step_ahead

H_CLAMP = 20.0
RW_MIN_OBS = 8
RW_VAR_FLOOR = 1e-6


@dataclass(frozen=True)
class ForecastDensity:
    """Gaussian mixture predictive for inflation ``horizon`` steps ahead.

    Attributes
    ----------
    horizon : int
        Number of steps ahead.
    means, variances : ndarray
        One conditional mean and variance per retained draw.
    clamped : bool
        True if any simulated log-volatility hit the +/-``H_CLAMP`` guard.
    """

    horizon: int
    means: np.ndarray
    variances: np.ndarray
    clamped: bool = False

    def __post_init__(self):
        means = np.atleast_1d(np.asarray(self.means, dtype=float))
        variances = np.atleast_1d(np.asarray(self.variances, dtype=float))
        if means.shape != variances.shape or means.ndim != 1:
            raise InputError("means and variances must be matching 1-d arrays")
        if self.horizon < 1:
            raise DomainError("horizon must be >= 1")
        if means.size and not np.all(variances > 0):
            raise DomainError("variance components must be positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    def __len__(self):
        return self.means.size

    @property
    def point(self) -> float:
        """Predictive mean (average of the mean components)."""
        return float(self.means.mean())

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.means.tolist(), self.variances.tolist()))

    def cdf(self, value: float) -> float:
        return float(norm.cdf(value, self.means, np.sqrt(self.variances)).mean())

    def quantile(self, prob: float) -> float:
        """Mixture quantile by root finding on the mixture CDF."""
        if not 0.0 < prob < 1.0:
            raise DomainError("prob must be in (0, 1)")
        sd = np.sqrt(self.variances)
        lo = float(np.min(self.means - 40.0 * sd))
        hi = float(np.max(self.means + 40.0 * sd))
        return float(brentq(lambda v: self.cdf(v) - prob, lo, hi, xtol=1e-10))

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "means": self.means.tolist(),
                "variances": self.variances.tolist(), "clamped": self.clamped}


@dataclass(frozen=True)
class RwBenchmark:
    """Random walk pi_t = pi_{t-1} + eta_t with eta_t ~ N(0, sigma2)."""

    sigma2: float
    last_obs: float

    def forecast(self, horizon: int) -> ForecastDensity:
        return ForecastDensity(horizon, np.array([self.last_obs]), np.array([horizon * self.sigma2]))


def rw_benchmark(series) -> RwBenchmark:
    """Fit the benchmark: variance of first differences (floored), last value."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < RW_MIN_OBS:
        raise InputError(f"random-walk benchmark needs at least {RW_MIN_OBS} observations")
    if not np.all(np.isfinite(x)):
        raise InputError("series contains non-finite values")
    s2 = float(np.var(np.diff(x), ddof=1))
    return RwBenchmark(sigma2=max(s2, RW_VAR_FLOOR), last_obs=float(x[-1]))


def rw_forecast(series, horizon: int) -> ForecastDensity:
    """h-step random-walk predictive N(last, horizon * sigma2)."""
    return rw_benchmark(series).forecast(horizon)


def _future_regressors(z_future, n_reg: int, horizon: int):
    if n_reg == 0:
        return np.empty((horizon, 0))
    if z_future is None:
        raise InputError(f"model has {n_reg} regressors; z_future of shape ({horizon}, {n_reg}) is required")
    z = np.asarray(z_future, dtype=float).reshape(horizon, n_reg)
    if not np.all(np.isfinite(z)):
        raise InputError("z_future contains non-finite values")
    return z


def _step_variances(draws, step_state: dict, rng) -> np.ndarray:
    # (n, k) innovation variances for one forecast step
    kind = draws.prior
    sc = draws.scales
    if kind in (PriorKind.NONE, PriorKind.HS):
        return sc["omega"]
    if kind is PriorKind.SHS:
        lam = sc["lam"]
        v = sample_inverse_gamma(0.5, 1.0, rng, size=lam.shape)
        phi = sample_inverse_gamma(0.5, 1.0 / v, rng, size=lam.shape)
        return lam * phi
    psi = dhs_step_ahead(step_state["psi"], sc["dhs_mu"], sc["dhs_phi"], draws.dhs_priors, rng)
    step_state["psi"] = psi
    return np.exp(psi)


def simulate_predictive(draws, horizon: int, rng, z_future=None) -> ForecastDensity:
    """Simulate the ``horizon``-step predictive mixture from a DrawSet.

    For each draw the log-volatility and the innovation scales are simulated
    forward, while the coefficient innovations are integrated out: the
    coefficients carry a Gaussian mean and covariance that grow by the
    simulated innovation variances each step.  Intermediate inflation values
    feeding the ``delta`` term are drawn from their predictive and condition
    the coefficients through a Kalman update, so each mixture component is
    the exact conditional of the target given the simulated quantities.

    Parameters
    ----------
    draws : DrawSet
        Posterior draws; the final-period states and scales are used.
    horizon : int
        Steps ahead (1 = next quarter).
    rng : numpy.random.Generator
    z_future : array_like, optional
        Regressor values for the ``horizon`` future periods; needed only when
        the model has extra regressors.
    """
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    n = len(draws)
    if n == 0:
        raise InputError("empty DrawSet")
    k = draws.theta.shape[2]
    n_reg = k - 1 - int(draws.family.in_mean)
    z = _future_regressors(z_future, n_reg, horizon)

    m = draws.theta[:, -1, :].copy()
    P = np.zeros((n, k, k))
    diag = np.arange(k)
    h = draws.h[:, -1].copy()
    pi_prev = np.full(n, float(draws.y[-1]))
    feedback = bool(draws.include_delta)
    delta = draws.delta if feedback else np.zeros(n)
    sig = np.sqrt(draws.sigma2)
    step_state = {"psi": draws.scales.get("psi_last")}
    clamped = False
    for s in range(horizon):
        h = draws.mu + draws.phi * (h - draws.mu) + delta * pi_prev + sig * rng.standard_normal(n)
        if np.any(np.abs(h) > H_CLAMP):
            clamped = True
            h = np.clip(h, -H_CLAMP, H_CLAMP)
        P[:, diag, diag] += _step_variances(draws, step_state, rng)
        eh = np.exp(h)
        x = np.empty((n, k))
        x[:, 0] = 1.0
        x[:, 1:1 + n_reg] = z[s]
        if draws.family.in_mean:
            x[:, -1] = eh
        Px = np.einsum("nij,nj->ni", P, x)
        f = np.einsum("ni,ni->n", x, m)
        S = np.einsum("ni,ni->n", x, Px) + eh
        if s + 1 == horizon:
            return ForecastDensity(horizon, f, S, clamped=clamped)
        pi_prev = f + np.sqrt(S) * rng.standard_normal(n)
        if feedback:
            gain = Px / S[:, None]
            m = m + gain * (pi_prev - f)[:, None]
            P = P - np.einsum("ni,nj->nij", gain, Px)


def log_pred_likelihood(density: ForecastDensity, realized: float) -> float:
    """log of the equally weighted Gaussian mixture density at ``realized``."""
    if len(density) == 0:
        raise InputError("forecast density has no components")
    if not math.isfinite(realized):
        raise InputError("realized value must be finite")
    v = density.variances
    comp = -0.5 * (np.log(2.0 * math.pi * v) + (realized - density.means) ** 2 / v)
    return float(logsumexp(comp) - math.log(comp.size))


def point_error(point: float, realized: float) -> float:
    """Forecast error with the convention realized minus point."""
    return float(realized) - float(point)
