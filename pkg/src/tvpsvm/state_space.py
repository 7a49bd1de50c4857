"""Linear-Gaussian state-space kernels with random-walk transitions.

Two families of kernels live here:

* the vector random-walk system used for the coefficient paths
  (``theta_t = theta_{t-1} + e_t``, diagonal innovation covariance), with a
  Kalman filter, Rauch-Tung-Striebel smoother and forward-filtering
  backward-sampling (FFBS);
* a scalar AR(1) system with time-varying intercepts and innovation
  variances, used for log-volatility and log-variance paths.

``m0``/``P0`` describe the state *before* the first observation (``theta_0``),
so ``ffbs`` also returns a draw of ``theta_0``.  Missing observations are
encoded as NaN and skipped in the update step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import NumericalError

VARIANCE_FLOOR = 1e-12
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LinearGaussianSystem:
    """Observation ``y_t = x_t' theta_t + N(0, r_t)``, ``theta_t = theta_{t-1} + N(0, diag(q_t))``.

    Attributes
    ----------
    y : (T,) observations, NaN for missing
    x : (T, k) loadings
    r : (T,) observation variances
    q : (T, k) diagonal state innovation variances
    m0 : (k,) mean of theta_0
    p0 : (k,) diagonal variance of theta_0
    """

    y: np.ndarray
    x: np.ndarray
    r: np.ndarray
    q: np.ndarray
    m0: np.ndarray
    p0: np.ndarray

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=float)
        x = np.ascontiguousarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        T, k = x.shape
        r = np.ascontiguousarray(np.broadcast_to(np.asarray(self.r, dtype=float), (T,)))
        q = np.ascontiguousarray(np.broadcast_to(np.asarray(self.q, dtype=float), (T, k)))
        m0 = np.ascontiguousarray(np.broadcast_to(np.asarray(self.m0, dtype=float), (k,)))
        p0 = np.ascontiguousarray(np.broadcast_to(np.asarray(self.p0, dtype=float), (k,)))
        if y.shape != (T,):
            raise ValueError(f"y has shape {y.shape}, expected ({T},)")
        for name, arr in (("x", x), ("r", r), ("q", q), ("m0", m0), ("p0", p0)):
            if not np.all(np.isfinite(arr)):
                raise NumericalError(f"non-finite entries in {name}")
        if np.any(np.isinf(y)):
            raise NumericalError("infinite observation")
        if np.any(r <= 0):
            raise NumericalError("observation variances must be positive")
        if np.any(q < 0) or np.any(p0 < 0):
            raise NumericalError("state variances must be non-negative")
        for name, arr in (("y", y), ("x", x), ("r", r), ("q", q), ("m0", m0), ("p0", p0)):
            object.__setattr__(self, name, arr)

    @property
    def T(self) -> int:
        return self.x.shape[0]

    @property
    def k(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class StatePathDraw:
    """A joint draw of ``theta_1..theta_T`` (``path``) and ``theta_0`` (``initial``)."""

    path: np.ndarray
    initial: np.ndarray


# ---------------------------------------------------------------------------
# numba kernels


@nb.njit(cache=True)
def _rw_filter(y, x, r, q, m0, p0):
    T, k = x.shape
    m = m0.copy()
    P = np.diag(p0.copy())
    ms = np.empty((T, k))
    Ps = np.empty((T, k, k))
    loglik = 0.0
    status = 0
    for t in range(T):
        for j in range(k):
            P[j, j] += q[t, j]
        if not math.isnan(y[t]):
            xt = x[t]
            Px = P @ xt
            f = xt @ Px + r[t]
            if not (f >= VARIANCE_FLOOR):
                if math.isnan(f):
                    status = 1
                    break
                f = VARIANCE_FLOOR
            e = y[t] - xt @ m
            kg = Px / f
            m = m + kg * e
            P = P - np.outer(kg, Px)
            P = 0.5 * (P + P.T)
            loglik += -0.5 * (LOG_2PI + math.log(f) + e * e / f)
        ms[t] = m
        Ps[t] = P
    if not math.isfinite(loglik):
        status = 1
    return ms, Ps, loglik, status


@nb.njit(cache=True)
def _gain(P, S):
    # P S^{-1} where rows/cols of S with zero diagonal belong to degenerate coordinates
    k = S.shape[0]
    Sm = S.copy()
    for j in range(k):
        if Sm[j, j] <= 0.0:
            for i in range(k):
                Sm[i, j] = 0.0
                Sm[j, i] = 0.0
            Sm[j, j] = 1.0
    return np.linalg.solve(Sm, P.T).T


@nb.njit(cache=True)
def _mvn(mean, V, z):
    k = mean.shape[0]
    if k == 1:
        v = V[0, 0]
        return mean + math.sqrt(v if v > 0.0 else 0.0) * z
    w, U = np.linalg.eigh(0.5 * (V + V.T))
    for j in range(k):
        w[j] = math.sqrt(w[j]) if w[j] > 0.0 else 0.0
    return mean + U @ (w * (U.T @ z))


@nb.njit(cache=True)
def _rw_backward_sample(ms, Ps, q, m0, p0, noise):
    T, k = ms.shape
    path = np.empty((T, k))
    path[T - 1] = _mvn(ms[T - 1], Ps[T - 1], noise[T])
    for t in range(T - 2, -1, -1):
        P = Ps[t]
        S = P.copy()
        for j in range(k):
            S[j, j] += q[t + 1, j]
        J = _gain(P, S)
        mean = ms[t] + J @ (path[t + 1] - ms[t])
        V = P - J @ P.T
        path[t] = _mvn(mean, V, noise[t + 1])
    P = np.diag(p0.copy())
    S = P.copy()
    for j in range(k):
        S[j, j] += q[0, j]
    J = _gain(P, S)
    mean = m0 + J @ (path[0] - m0)
    V = P - J @ P.T
    initial = _mvn(mean, V, noise[0])
    return path, initial


@nb.njit(cache=True)
def _rw_smoother(ms, Ps, q):
    T, k = ms.shape
    sm = ms.copy()
    sP = Ps.copy()
    for t in range(T - 2, -1, -1):
        P = Ps[t]
        S = P.copy()
        for j in range(k):
            S[j, j] += q[t + 1, j]
        J = _gain(P, S)
        sm[t] = ms[t] + J @ (sm[t + 1] - ms[t])
        V = P + J @ (sP[t + 1] - S) @ J.T
        sP[t] = 0.5 * (V + V.T)
    return sm, sP


@nb.njit(cache=True)
def _ar1_filter(obs, obs_var, intercept, phi, trans_var, m1, p1):
    # state s_0 ~ N(m1, p1); s_t = intercept[t] + phi * s_{t-1} + N(0, trans_var[t]) for t >= 1
    T = obs.shape[0]
    ms = np.empty(T)
    ps = np.empty(T)
    m = m1
    p = p1
    loglik = 0.0
    for t in range(T):
        if t > 0:
            m = intercept[t] + phi * m
            p = phi * phi * p + trans_var[t]
        if not math.isnan(obs[t]):
            f = p + obs_var[t]
            if f < VARIANCE_FLOOR:
                f = VARIANCE_FLOOR
            e = obs[t] - m
            g = p / f
            m = m + g * e
            p = p - g * p
            if p < 0.0:
                p = 0.0
            loglik += -0.5 * (LOG_2PI + math.log(f) + e * e / f)
        ms[t] = m
        ps[t] = p
    return ms, ps, loglik


@nb.njit(cache=True)
def _ar1_backward(ms, ps, phi, intercept, trans_var, noise):
    T = ms.shape[0]
    s = np.empty(T)
    s[T - 1] = ms[T - 1] + math.sqrt(ps[T - 1]) * noise[T - 1]
    for t in range(T - 2, -1, -1):
        p = ps[t]
        denom = phi * phi * p + trans_var[t + 1]
        if denom <= 0.0:
            mean = ms[t]
            var = p
        else:
            g = phi * p / denom
            mean = ms[t] + g * (s[t + 1] - intercept[t + 1] - phi * ms[t])
            var = p - g * phi * p
        if var < 0.0:
            var = 0.0
        s[t] = mean + math.sqrt(var) * noise[t]
    return s


# ---------------------------------------------------------------------------
# public API


def kalman_filter(sys: LinearGaussianSystem):
    """Run the Kalman filter.

    Returns
    -------
    means : (T, k) filtered means ``E[theta_t | y_1..y_t]``
    covs : (T, k, k) filtered covariances
    loglik : float
        Sum of one-step-ahead predictive log densities.
    """
    ms, Ps, loglik, status = _rw_filter(sys.y, sys.x, sys.r, sys.q, sys.m0, sys.p0)
    if status:
        raise NumericalError("non-finite predictive variance or likelihood in Kalman filter")
    return ms, Ps, loglik


def smoother_moments(sys: LinearGaussianSystem):
    """Marginal smoothing means (T, k) and covariances (T, k, k)."""
    ms, Ps, _ = kalman_filter(sys)
    return _rw_smoother(ms, Ps, sys.q)


def ffbs(sys: LinearGaussianSystem, rng: np.random.Generator) -> StatePathDraw:
    """Draw ``theta_0..theta_T`` jointly from their smoothing distribution."""
    ms, Ps, _ = kalman_filter(sys)
    noise = rng.standard_normal((sys.T + 1, sys.k))
    path, initial = _rw_backward_sample(ms, Ps, sys.q, sys.m0, sys.p0, noise)
    if not np.all(np.isfinite(path)):
        raise NumericalError("non-finite state draw in FFBS")
    return StatePathDraw(path=path, initial=initial)


def ar1_ffbs(obs, obs_var, intercept, phi, trans_var, m1, p1, rng):
    """FFBS for a scalar AR(1) state observed with Gaussian noise.

    The first state has prior ``N(m1, p1)``; for ``t >= 1`` the transition is
    ``s_t = intercept[t] + phi * s_{t-1} + N(0, trans_var[t])`` (entries at
    ``t = 0`` are ignored).  NaN observations are skipped.

    Returns ``(path, loglik)`` where ``loglik`` is the marginal log density of
    the observations.
    """
    obs = np.ascontiguousarray(obs, dtype=float)
    T = obs.shape[0]
    obs_var = np.ascontiguousarray(np.broadcast_to(np.asarray(obs_var, dtype=float), (T,)))
    intercept = np.ascontiguousarray(np.broadcast_to(np.asarray(intercept, dtype=float), (T,)))
    trans_var = np.ascontiguousarray(np.broadcast_to(np.asarray(trans_var, dtype=float), (T,)))
    ms, ps, loglik = _ar1_filter(obs, obs_var, intercept, float(phi), trans_var, float(m1), float(p1))
    noise = rng.standard_normal(T)
    path = _ar1_backward(ms, ps, float(phi), intercept, trans_var, noise)
    if not (np.all(np.isfinite(path)) and math.isfinite(loglik)):
        raise NumericalError("non-finite values in AR(1) FFBS")
    return path, loglik


def ar1_loglik(obs, obs_var, intercept, phi, trans_var, m1, p1) -> float:
    """Marginal log density of the observations under the scalar AR(1) system."""
    obs = np.ascontiguousarray(obs, dtype=float)
    T = obs.shape[0]
    obs_var = np.ascontiguousarray(np.broadcast_to(np.asarray(obs_var, dtype=float), (T,)))
    intercept = np.ascontiguousarray(np.broadcast_to(np.asarray(intercept, dtype=float), (T,)))
    trans_var = np.ascontiguousarray(np.broadcast_to(np.asarray(trans_var, dtype=float), (T,)))
    return _ar1_filter(obs, obs_var, intercept, float(phi), trans_var, float(m1), float(p1))[2]


def ar1_prior_logpdf(path, intercept, phi, trans_var, m1, p1) -> float:
    """Log density of a scalar AR(1) path under its transition law (no observations)."""
    path = np.asarray(path, dtype=float)
    intercept = np.broadcast_to(np.asarray(intercept, dtype=float), path.shape)
    trans_var = np.broadcast_to(np.asarray(trans_var, dtype=float), path.shape)
    out = -0.5 * (LOG_2PI + math.log(p1) + (path[0] - m1) ** 2 / p1)
    resid = path[1:] - intercept[1:] - phi * path[:-1]
    v = trans_var[1:]
    return float(out - 0.5 * np.sum(LOG_2PI + np.log(v) + resid * resid / v))
