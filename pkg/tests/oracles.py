"""Independent brute-force references used by the tests."""
from __future__ import annotations

import numpy as np
from scipy.stats import multivariate_normal


def dense_random_walk_moments(y, x, r, q, m0, p0):
    """Joint Gaussian of (theta_0..theta_T, y_1..y_T) built element by element.

    Returns (loglik, smoothed means (T, k), smoothed covariances (T, k, k)).
    Missing observations (NaN) are dropped from the conditioning set.
    """
    T, k = x.shape
    n_state = (T + 1) * k
    # theta_t = theta_0 + sum_{s<=t} e_s, so Cov(theta_s, theta_t) = P0 + sum_{u<=min(s,t)} Q_u
    cum_q = np.vstack([np.zeros(k), np.cumsum(q, axis=0)])
    S = np.zeros((n_state, n_state))
    for s in range(T + 1):
        for t in range(T + 1):
            u = min(s, t)
            S[s * k:(s + 1) * k, t * k:(t + 1) * k] = np.diag(p0 + cum_q[u])
    mean_state = np.tile(m0, T + 1)
    # y_t = x_t' theta_t + eps_t
    H = np.zeros((T, n_state))
    for t in range(T):
        H[t, (t + 1) * k:(t + 2) * k] = x[t]
    obs = ~np.isnan(y)
    H = H[obs]
    Syy = H @ S @ H.T + np.diag(r[obs])
    Sxy = S @ H.T
    my = H @ mean_state
    loglik = multivariate_normal(my, Syy).logpdf(y[obs]) if obs.any() else 0.0
    K = np.linalg.solve(Syy, Sxy.T).T
    post_mean = mean_state + K @ (y[obs] - my)
    post_cov = S - K @ Sxy.T
    sm = post_mean[k:].reshape(T, k)
    sP = np.stack([post_cov[(t + 1) * k:(t + 2) * k, (t + 1) * k:(t + 2) * k] for t in range(T)])
    return float(loglik), sm, sP


def z_density(nu, a, b):
    """Density of the Z(a, b, 0, 1) distribution."""
    from scipy.special import betaln

    return np.exp(a * nu - (a + b) * np.logaddexp(0.0, nu) - betaln(a, b))


def z_cdf_numeric(grid, a, b):
    """CDF of Z(a, b, 0, 1) on a sorted grid by adaptive quadrature."""
    from scipy.integrate import quad

    out = np.empty(len(grid))
    acc, prev = quad(z_density, -np.inf, grid[0], args=(a, b))[0], grid[0]
    out[0] = acc
    for i, g in enumerate(grid[1:], start=1):
        acc += quad(z_density, prev, g, args=(a, b))[0]
        out[i] = acc
        prev = g
    return out


def ks_distance(sample, cdf_values_at_sorted_sample):
    """Two-sided KS distance given the model CDF evaluated at the sorted sample."""
    n = len(sample)
    F = np.asarray(cdf_values_at_sorted_sample)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
