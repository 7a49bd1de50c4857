"""Log-volatility path and volatility-equation parameter updates.

The observation equation is ``y_t = level_t + gamma_t * exp(h_t) + eps_t`` with
``eps_t ~ N(0, exp(h_t))`` and

    h_t = mu + phi * (h_{t-1} - mu) + delta * y_{t-1} + nu_t,  nu_t ~ N(0, sigma2),

with ``h_1`` drawn from the stationary law ``N(mu, sigma2 / (1 - phi^2))``.

The path update is a Metropolis-Hastings step on an extended target
``pi(h) * g(s | h)``, where ``s`` are the auxiliary mixture indicators of the
log-chi-square approximation.  Indicators are refreshed by Gibbs, then each
block of ``h`` is proposed by FFBS from a Gaussian approximation built at the
current path.  The acceptance ratio uses the exact conditional of ``h`` and
the proposal densities in both directions, so the chain targets the true
posterior.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import geninvgauss

from .errors import NumericalError, StationarityError
from .state_space import LOG_2PI, ar1_ffbs, ar1_loglik, ar1_prior_logpdf

LOG_OFFSET = 1e-4
LOG_CHI2_MEAN = -1.2704
LOG_CHI2_VAR = math.pi**2 / 2.0


@dataclass(frozen=True)
class SvParams:
    mu: float
    phi: float
    delta: float
    sigma2: float

    def __post_init__(self):
        if not abs(self.phi) < 1.0:
            raise StationarityError(f"|phi| must be < 1, got {self.phi}")
        if not self.sigma2 > 0.0:
            raise NumericalError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def stationary_variance(self) -> float:
        return self.sigma2 / (1.0 - self.phi**2)


@dataclass(frozen=True)
class SvPriors:
    """Priors on the volatility equation.

    mu ~ N(mu_mean, mu_var), (phi + 1) / 2 ~ Beta(phi_a, phi_b),
    delta ~ N(delta_mean, delta_var), sigma2 ~ Gamma(1/2, rate 1 / (2 * sigma2_scale)).
    """

    mu_mean: float = 0.0
    mu_var: float = 100.0
    phi_a: float = 5.0
    phi_b: float = 1.5
    delta_mean: float = 0.0
    delta_var: float = 100.0
    sigma2_scale: float = 1.0
    include_delta: bool = True
    max_rejections: int = 1000


@dataclass(frozen=True)
class MixtureTable:
    """Normal mixture approximating the log chi-square(1) density."""

    probs: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        m = np.asarray(self.means, dtype=float)
        v = np.asarray(self.variances, dtype=float)
        if not (p.shape == m.shape == v.shape):
            raise ValueError("mixture arrays must have equal length")
        if abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"mixture probabilities sum to {p.sum()!r}")
        if np.any(v <= 0) or np.any(p < 0):
            raise ValueError("mixture variances must be positive and weights non-negative")
        mean = p @ m
        var = p @ (v + m**2) - mean**2
        if abs(mean - LOG_CHI2_MEAN) > 1e-3 or abs(var - LOG_CHI2_VAR) > 1e-2:
            raise ValueError(f"mixture moments ({mean:.5f}, {var:.5f}) do not match log chi-square(1)")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)
        object.__setattr__(self, "_logp", np.log(p))
        object.__setattr__(self, "_logv", np.log(v))

    @property
    def n_components(self) -> int:
        return self.probs.size

    def component_logpdf(self, x):
        """Log of ``p_i * N(x; m_i, v_i)`` with shape ``x.shape + (n_components,)``."""
        d = np.asarray(x, dtype=float)[..., None] - self.means
        return self._logp - 0.5 * (LOG_2PI + self._logv + d * d / self.variances)

    def logpdf(self, x):
        return logsumexp(self.component_logpdf(x), axis=-1)

    def sample_indicators(self, x, rng):
        """Draw component labels given residuals ``x`` (one label per entry)."""
        lp = self.component_logpdf(x)
        lp -= lp.max(axis=-1, keepdims=True)
        cdf = np.cumsum(np.exp(lp), axis=-1)
        u = rng.random(np.shape(x)) * cdf[..., -1]
        idx = (cdf < u[..., None]).sum(axis=-1)
        return np.minimum(idx, self.n_components - 1)


# Omori, Chib, Shephard and Nakajima 10-component table for log chi-square(1).
OMORI10 = MixtureTable(
    probs=np.array([0.00609, 0.04775, 0.13057, 0.20674, 0.22715,
                    0.18842, 0.12047, 0.05591, 0.01575, 0.00115]),
    means=np.array([1.92677, 1.34744, 0.73504, 0.02266, -0.85173,
                    -1.97278, -3.46788, -5.55246, -8.68384, -14.65000]),
    variances=np.array([0.11265, 0.17788, 0.26768, 0.40611, 0.62699,
                        0.98583, 1.57469, 2.54498, 4.16591, 7.33342]),
)


def transition_terms(y, sv: SvParams, include_delta: bool = True):
    """Intercepts of the h transition (entry t used for t >= 1) and the h_1 prior."""
    y = np.asarray(y, dtype=float)
    intercept = np.full(y.shape[0], sv.mu * (1.0 - sv.phi))
    if include_delta and sv.delta != 0.0:
        intercept[1:] += sv.delta * y[:-1]
    return intercept, sv.mu, sv.stationary_variance


def h_log_target(h, y, level, gamma, sv: SvParams, include_delta: bool = True) -> float:
    """Log of p(h | params) * prod_t N(y_t; level_t + gamma_t e^{h_t}, e^{h_t})."""
    intercept, m1, p1 = transition_terms(y, sv, include_delta)
    prior = ar1_prior_logpdf(h, intercept, sv.phi, sv.sigma2, m1, p1)
    eh = np.exp(h)
    resid = y - level - gamma * eh
    return prior - 0.5 * float(np.sum(LOG_2PI + h + resid * resid / eh))


def _pseudo_obs(y, level, offset):
    r = y - level
    return np.log(r * r + offset)


def _indicator_logprob(ystar, h, s, table: MixtureTable):
    comp = table.component_logpdf(ystar - h)
    picked = np.take_along_axis(comp, s[:, None], axis=1)[:, 0]
    return float(np.sum(picked - logsumexp(comp, axis=1)))


def _block_system(ystar, s, gamma, expand_at, h, lo, hi, intercept, sv, m1, p1, table):
    """Gaussian proposal model for h[lo:hi] given indicators and the states outside the block.

    Each t carries the mixture observation of ``log r_t^2`` plus, when
    gamma_t != 0, a Gaussian observation from the second-order expansion of
    ``-gamma_t^2 exp(h_t) / 2`` at ``expand_at``.
    """
    sl = slice(lo, hi)
    var = table.variances[s[sl]]
    prec = 1.0 / var
    weighted = (ystar[sl] - table.means[s[sl]]) * prec
    curv = 0.5 * gamma[sl] ** 2 * np.exp(expand_at[sl])
    prec = prec + curv
    weighted = weighted + curv * (expand_at[sl] - 1.0)
    icpt = intercept[sl].copy()
    icpt[0] = 0.0
    if lo == 0:
        bm, bp = m1, p1
    else:
        bm, bp = intercept[lo] + sv.phi * h[lo - 1], sv.sigma2
    if hi < h.shape[0] and sv.phi != 0.0:
        # the fixed successor h[hi] acts as one more Gaussian observation of h[hi-1]
        extra_prec = sv.phi**2 / sv.sigma2
        prec[-1] += extra_prec
        weighted[-1] += extra_prec * (h[hi] - intercept[hi]) / sv.phi
    return weighted / prec, 1.0 / prec, icpt, bm, bp


def _block_logq(path, obs, var, icpt, phi, sigma2, bm, bp):
    if bp <= 0.0:
        return 0.0
    lp = ar1_prior_logpdf(path, icpt, phi, sigma2, bm, bp)
    d = obs - path
    lp -= 0.5 * float(np.sum(LOG_2PI + np.log(var) + d * d / var))
    return lp - ar1_loglik(obs, var, icpt, phi, sigma2, bm, bp)


def propose_h_block(y, level, gamma, h, s, lo, hi, sv: SvParams, rng,
                    table: MixtureTable = OMORI10, include_delta: bool = True,
                    offset: float = LOG_OFFSET):
    """Draw a proposal for ``h[lo:hi]`` given indicators ``s``.

    Returns the full proposed path (outside the block equal to ``h``) and
    the log proposal density of the block.
    """
    y = np.asarray(y, dtype=float)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), y.shape)
    intercept, m1, p1 = transition_terms(y, sv, include_delta)
    ystar = _pseudo_obs(y, np.asarray(level, dtype=float), offset)
    obs, var, icpt, bm, bp = _block_system(ystar, s, gamma, h, h, lo, hi, intercept, sv, m1, p1, table)
    block, _ = ar1_ffbs(obs, var, icpt, sv.phi, sv.sigma2, bm, bp, rng)
    prop = np.array(h, dtype=float)
    prop[lo:hi] = block
    return prop, _block_logq(block, obs, var, icpt, sv.phi, sv.sigma2, bm, bp)


def sample_h_path(y, level, gamma, sv: SvParams, h_cur, rng,
                  table: MixtureTable = OMORI10, n_blocks: int = 1,
                  include_delta: bool = True, offset: float = LOG_OFFSET):
    """One Metropolis-Hastings sweep over the log-volatility path.

    The Gaussian log-density of ``y_t`` splits exactly into a plain SV term
    for ``r_t = y_t - level_t`` and the factor ``exp(-gamma_t^2 e^{h_t} / 2)``.
    The SV term is handled by the mixture approximation of ``log(r_t^2 + offset)``;
    the extra factor is expanded to second order at the current path.

    Parameters
    ----------
    y : (T,) observations
    level : (T,) mean part excluding the in-mean term (``tau_t + beta_t' z_t``)
    gamma : (T,) in-mean coefficients (zeros for a plain SV model)
    sv : current volatility-equation parameters
    h_cur : (T,) current path
    n_blocks : 1 for whole-path updates; otherwise the path is split into this
        many contiguous blocks, visited in random order.

    Returns
    -------
    h : new path
    accepted : bool for whole-path updates, else the fraction of accepted blocks
    """
    y = np.asarray(y, dtype=float)
    level = np.asarray(level, dtype=float)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), y.shape)
    h = np.array(h_cur, dtype=float)
    T = y.shape[0]
    ystar = _pseudo_obs(y, level, offset)
    if not (np.all(np.isfinite(ystar)) and np.all(np.isfinite(gamma)) and np.all(np.isfinite(h))):
        raise NumericalError("non-finite residuals in volatility update")

    intercept, m1, p1 = transition_terms(y, sv, include_delta)
    s = table.sample_indicators(ystar - h, rng)

    edges = np.linspace(0, T, min(n_blocks, T) + 1).astype(int)
    order = np.arange(edges.size - 1)
    if order.size > 1:
        order = rng.permutation(order)
    n_acc = 0
    log_target = h_log_target(h, y, level, gamma, sv, include_delta)
    for b in order:
        lo, hi = edges[b], edges[b + 1]
        obs, var, icpt, bm, bp = _block_system(ystar, s, gamma, h, h, lo, hi, intercept, sv, m1, p1, table)
        block, _ = ar1_ffbs(obs, var, icpt, sv.phi, sv.sigma2, bm, bp, rng)
        logq_fwd = _block_logq(block, obs, var, icpt, sv.phi, sv.sigma2, bm, bp)
        prop = h.copy()
        prop[lo:hi] = block
        obs_r, var_r, _, _, _ = _block_system(ystar, s, gamma, prop, prop, lo, hi, intercept, sv, m1, p1, table)
        logq_rev = _block_logq(h[lo:hi], obs_r, var_r, icpt, sv.phi, sv.sigma2, bm, bp)

        log_target_p = h_log_target(prop, y, level, gamma, sv, include_delta)
        sl = slice(lo, hi)
        log_ind = _indicator_logprob(ystar[sl], h[sl], s[sl], table)
        log_ind_p = _indicator_logprob(ystar[sl], prop[sl], s[sl], table)
        log_ratio = (log_target_p + log_ind_p + logq_rev) - (log_target + log_ind + logq_fwd)
        if math.isnan(log_ratio):
            raise NumericalError("NaN Metropolis-Hastings ratio in volatility update")
        if math.log(rng.random()) < log_ratio:
            h = prop
            log_target = log_target_p
            n_acc += 1
    if order.size == 1:
        return h, bool(n_acc)
    return h, n_acc / order.size


def _log_phi_prior(phi, priors: SvPriors):
    # Beta density of (phi + 1) / 2 up to a constant
    return (priors.phi_a - 1.0) * math.log1p(phi) + (priors.phi_b - 1.0) * math.log1p(-phi)


def _stationary_logpdf(h0, mu, phi, sigma2):
    v = sigma2 / (1.0 - phi * phi)
    return -0.5 * (math.log(v) + (h0 - mu) ** 2 / v)


def _coef_log_correction(coef, h0, sigma2, priors: SvPriors):
    # target / proposal for (c, phi, delta): the proposal carries the
    # regression likelihood and the delta prior with flat c and phi
    c, phi = coef[0], coef[1]
    mu = c / (1.0 - phi)
    return (_log_phi_prior(phi, priors) + _stationary_logpdf(h0, mu, phi, sigma2)
            - 0.5 * (mu - priors.mu_mean) ** 2 / priors.mu_var - math.log(1.0 - phi))


def _draw_mu_given_rest(h, y, phi, delta, sigma2, priors: SvPriors, rng) -> float:
    # conjugate normal conditional of mu with phi and delta held fixed
    T = h.shape[0]
    lag_y = delta * y[:-1] if priors.include_delta else 0.0
    r = h[1:] - phi * h[:-1] - lag_y
    c = 1.0 - phi
    prec = ((T - 1) * c * c + (1.0 - phi * phi)) / sigma2 + 1.0 / priors.mu_var
    lin = (c * r.sum() + (1.0 - phi * phi) * h[0]) / sigma2 + priors.mu_mean / priors.mu_var
    return float(lin / prec + rng.standard_normal() / math.sqrt(prec))


def sample_gig(p: float, a: float, b: float, rng) -> float:
    """Draw from the generalized inverse Gaussian density x^(p-1) exp(-(a x + b / x) / 2)."""
    b = max(b, 1e-10)
    return float(geninvgauss.rvs(p, math.sqrt(a * b), scale=math.sqrt(b / a), random_state=rng))


def sample_sv_params(h, y, current: SvParams, priors: SvPriors, rng) -> SvParams:
    """Update (mu, phi, delta) jointly, then sigma2, given the path ``h``.

    The intercept ``c = mu (1 - phi)``, ``phi`` and ``delta`` are proposed from
    the Gaussian conditional of the regression of ``h_t`` on
    ``(1, h_{t-1}, y_{t-1})``, truncated to |phi| < 1 by rejection, and
    accepted with the ratio of the remaining prior terms (normal prior on mu
    with its Jacobian, Beta prior on phi) and the stationary density of
    ``h_1``.  sigma2 has a generalized inverse Gaussian conditional.
    """
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    T = h.shape[0]
    mu, phi, delta, sigma2 = current.mu, current.phi, current.delta, current.sigma2

    resp = h[1:]
    cols = [np.ones(T - 1), h[:-1]]
    prior_prec = [0.0, 0.0]
    prior_term = [0.0, 0.0]
    if priors.include_delta:
        cols.append(y[:-1])
        prior_prec.append(1.0 / priors.delta_var)
        prior_term.append(priors.delta_mean / priors.delta_var)
    X = np.column_stack(cols)
    prec = X.T @ X / sigma2 + np.diag(prior_prec)
    # a flat path (or lagged regressors without variation) leaves the
    # regression unidentified; keep the current values in that case
    try:
        chol = np.linalg.cholesky(prec)
        ok = np.ptp(h) > 0.0
    except np.linalg.LinAlgError:
        ok = False
    if ok:
        mean = np.linalg.solve(prec, X.T @ resp / sigma2 + np.asarray(prior_term))
        for _ in range(priors.max_rejections):
            cand = mean + np.linalg.solve(chol.T, rng.standard_normal(mean.size))
            if abs(cand[1]) < 1.0:
                break
        else:
            raise StationarityError("could not draw a stationary persistence for the volatility equation")
        cur = np.array([mu * (1.0 - phi), phi])
        log_acc = (_coef_log_correction(cand, h[0], sigma2, priors)
                   - _coef_log_correction(cur, h[0], sigma2, priors))
        if math.log(rng.random()) < log_acc:
            phi = float(cand[1])
            mu = float(cand[0] / (1.0 - phi))
            delta = float(cand[2]) if priors.include_delta else 0.0
    else:
        mu = _draw_mu_given_rest(h, y, phi, delta, sigma2, priors, rng)

    lag_y = delta * y[:-1] if priors.include_delta else 0.0
    resid = h[1:] - mu * (1.0 - phi) - phi * h[:-1] - lag_y
    ssq = float(resid @ resid + (1.0 - phi * phi) * (h[0] - mu) ** 2)
    sigma2 = sample_gig(0.5 * (1.0 - T), 1.0 / priors.sigma2_scale, ssq, rng)
    return SvParams(mu=mu, phi=phi, delta=delta, sigma2=sigma2)
