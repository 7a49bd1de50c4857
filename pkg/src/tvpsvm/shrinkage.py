"""Shrinkage priors on the random-walk coefficient block and their Gibbs updates.

Four regimes are supported:

``NONE``
    independent inverse-gamma priors on constant innovation variances.
``HS``
    horseshoe on the non-centered parameters ``alpha = (theta_0, sqrt(omega))``,
    written with inverse-gamma auxiliaries.
``SHS``
    static horseshoe on time-varying innovation variances ``lam_j * phi_jt``.
``DHS``
    dynamic horseshoe: ``psi_jt = log(omega_jt)`` follows an AR(1) with
    Z(a, b, 0, 1) shocks, handled through Polya-gamma auxiliaries.

Increments always include the step from the initial state ``theta_0`` to
``theta_1``, so a path of length T contributes T squared increments.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import beta as beta_dist

from .errors import NumericalError, StationarityError
from .rng import sample_inverse_gamma, sample_polya_gamma, sample_z_innovation
from .state_space import ar1_ffbs
from .volatility import OMORI10, MixtureTable


class PriorKind(str, enum.Enum):
    NONE = "None"
    HS = "HS"
    SHS = "SHS"
    DHS = "DHS"

    @classmethod
    def parse(cls, text) -> "PriorKind":
        if isinstance(text, cls):
            return text
        for kind in cls:
            if kind.value.lower() == str(text).lower() or kind.name.lower() == str(text).lower():
                return kind
        raise ValueError(f"unknown prior kind {text!r}")


@dataclass(frozen=True)
class NoneState:
    omega: np.ndarray
    shape: float = 3.0
    scale: float = 0.03


@dataclass(frozen=True)
class HsState:
    alpha: np.ndarray
    phi: np.ndarray
    lam: float
    v: np.ndarray
    w: float

    @property
    def k(self) -> int:
        return self.alpha.size // 2

    @property
    def theta0(self) -> np.ndarray:
        return self.alpha[: self.k]

    @property
    def sqrt_omega(self) -> np.ndarray:
        return self.alpha[self.k:]


@dataclass(frozen=True)
class ShsState:
    lam: np.ndarray  # (k,)
    phi: np.ndarray  # (T, k)
    v: np.ndarray  # (T, k)
    w: np.ndarray  # (k,)


@dataclass(frozen=True)
class DhsPriors:
    mu_mean: float = -6.0
    mu_var: float = 10.0
    phi_a: float = 10.0
    phi_b: float = 2.0
    a: float = 0.5
    b: float = 0.5
    offset: float = 1e-8
    max_rejections: int = 1000


@dataclass(frozen=True)
class DhsState:
    psi: np.ndarray  # (T, k)
    mu: np.ndarray  # (k,)
    phi: np.ndarray  # (k,)
    xi: np.ndarray  # (T, k)
    priors: DhsPriors = DhsPriors()

    @property
    def a(self) -> float:
        return self.priors.a

    @property
    def b(self) -> float:
        return self.priors.b


def squared_increments(path, initial):
    """(theta_t - theta_{t-1})^2 for t = 1..T, with theta_0 = ``initial``."""
    path = np.asarray(path, dtype=float)
    if path.ndim == 1:
        path = path[:, None]
    full = np.vstack([np.atleast_1d(np.asarray(initial, dtype=float))[None, :], path])
    d = np.diff(full, axis=0) ** 2
    if not np.all(np.isfinite(d)):
        raise NumericalError("non-finite state increments")
    return d


# ---------------------------------------------------------------------------
# None


def update_none(path, initial, state: NoneState, rng) -> NoneState:
    """omega_j | path ~ IG(shape + T/2, scale + sum_t d_jt / 2), independently over j."""
    d = squared_increments(path, initial) if np.size(path) else np.zeros((0, state.omega.size))
    T = d.shape[0]
    omega = sample_inverse_gamma(state.shape + 0.5 * T, state.scale + 0.5 * d.sum(axis=0), rng,
                                 size=state.omega.shape)
    return replace(state, omega=np.atleast_1d(omega))


# ---------------------------------------------------------------------------
# HS


def hs_design(x, theta_tilde):
    """Regressors (x_t, theta_tilde_t * x_t) of the non-centered observation equation."""
    x = np.asarray(x, dtype=float)
    return np.hstack([x, np.asarray(theta_tilde, dtype=float) * x])


def hs_loglik(y, x, h, theta_tilde, alpha) -> float:
    """Gaussian log density of y given the non-centered parameters."""
    mean = hs_design(x, theta_tilde) @ np.asarray(alpha, dtype=float)
    resid = np.asarray(y, dtype=float) - mean
    h = np.asarray(h, dtype=float)
    return float(-0.5 * np.sum(np.log(2.0 * np.pi) + h + resid * resid * np.exp(-h)))


def update_hs(y, x, h, theta_tilde, state: HsState, rng) -> HsState:
    """Gibbs update of the horseshoe block.

    ``y`` may be None, in which case alpha is drawn from its prior (used to
    check the prior construction).
    """
    k2 = state.alpha.size
    prior_var = state.phi * state.lam
    if y is None:
        alpha = rng.standard_normal(k2) * np.sqrt(prior_var)
    else:
        X = hs_design(x, theta_tilde)
        wts = np.exp(-np.asarray(h, dtype=float))
        prec = (X * wts[:, None]).T @ X + np.diag(1.0 / prior_var)
        rhs = X.T @ (wts * np.asarray(y, dtype=float))
        try:
            chol = np.linalg.cholesky(prec)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular posterior precision in horseshoe regression") from exc
        mean = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        alpha = mean + np.linalg.solve(chol.T, rng.standard_normal(k2))
        if not np.all(np.isfinite(alpha)):
            raise NumericalError("non-finite horseshoe coefficients")
    a2 = alpha * alpha
    phi = np.atleast_1d(sample_inverse_gamma(1.0, 1.0 / state.v + a2 / (2.0 * state.lam), rng, size=k2))
    lam = float(sample_inverse_gamma(0.5 * (k2 + 1), 1.0 / state.w + np.sum(a2 / (2.0 * phi)), rng))
    v = np.atleast_1d(sample_inverse_gamma(1.0, 1.0 + 1.0 / phi, rng, size=k2))
    w = float(sample_inverse_gamma(1.0, 1.0 + 1.0 / lam, rng))
    return HsState(alpha=alpha, phi=phi, lam=lam, v=v, w=w)


# ---------------------------------------------------------------------------
# SHS


def update_shs(path, initial, state: ShsState, rng) -> ShsState:
    d = squared_increments(path, initial)
    T, k = d.shape
    lam = state.lam
    phi = sample_inverse_gamma(1.0, 1.0 / state.v + d / (2.0 * lam), rng, size=(T, k))
    lam = sample_inverse_gamma(0.5 * (T + 1), 1.0 / state.w + np.sum(d / (2.0 * phi), axis=0), rng, size=k)
    v = sample_inverse_gamma(1.0, 1.0 + 1.0 / phi, rng, size=(T, k))
    w = sample_inverse_gamma(1.0, 1.0 + 1.0 / lam, rng, size=k)
    return ShsState(lam=np.atleast_1d(lam), phi=phi, v=v, w=np.atleast_1d(w))


# ---------------------------------------------------------------------------
# DHS


def _dhs_ar_terms(xi, mu, phi, pri: DhsPriors):
    shift = (pri.a - pri.b) / (2.0 * xi)
    intercept = mu * (1.0 - phi) + shift
    return intercept, mu + shift[0], 1.0 / xi[0], 1.0 / xi


def _draw_dhs_mu(psi, xi, phi, pri: DhsPriors, rng):
    shift = (pri.a - pri.b) / (2.0 * xi)
    c = 1.0 - phi
    prec = xi[0] + c * c * np.sum(xi[1:]) + 1.0 / pri.mu_var
    u = psi[1:] - phi * psi[:-1] - shift[1:]
    b = xi[0] * (psi[0] - shift[0]) + c * np.sum(xi[1:] * u) + pri.mu_mean / pri.mu_var
    return b / prec + rng.standard_normal() / math.sqrt(prec)


def _draw_dhs_phi(psi, xi, mu, phi_cur, pri: DhsPriors, rng):
    shift = (pri.a - pri.b) / (2.0 * xi)
    lag = psi[:-1] - mu
    resp = psi[1:] - mu - shift[1:]
    prec = np.sum(xi[1:] * lag * lag)
    if prec <= 0.0:
        raise NumericalError("degenerate log-variance path")
    mean = np.sum(xi[1:] * lag * resp) / prec
    sd = 1.0 / math.sqrt(prec)
    for _ in range(pri.max_rejections):
        cand = mean + sd * rng.standard_normal()
        if abs(cand) < 1.0:
            break
    else:
        raise StationarityError("could not draw a stationary log-variance persistence")
    log_acc = (beta_dist.logpdf(0.5 * (cand + 1.0), pri.phi_a, pri.phi_b)
               - beta_dist.logpdf(0.5 * (phi_cur + 1.0), pri.phi_a, pri.phi_b))
    if math.log(rng.random()) < log_acc:
        return float(cand)
    return float(phi_cur)


def dhs_shocks(psi, mu, phi):
    """Innovations nu_jt of the log-variance AR(1); the first uses psi_j0 = mu_j."""
    psi = np.asarray(psi, dtype=float)
    nu = np.empty_like(psi)
    nu[0] = psi[0] - mu
    nu[1:] = psi[1:] - mu - phi * (psi[:-1] - mu)
    return nu


def update_dhs(path, initial, state: DhsState, rng, table: MixtureTable = OMORI10,
               sample_ar: bool = True, prior_only: bool = False) -> DhsState:
    """One Gibbs sweep over the dynamic horseshoe block.

    (i) mixture indicators and the log-variance paths by FFBS,
    (ii) Polya-gamma auxiliaries given the shocks,
    (iii) level and persistence of each AR(1) (skipped when ``sample_ar`` is False).

    With ``prior_only`` the increments are ignored and the sweep targets the prior.
    """
    pri = state.priors
    psi = state.psi.copy()
    T, k = psi.shape
    if prior_only:
        s_obs = np.full((T, k), np.nan)
    else:
        d = squared_increments(path, initial)
        s_obs = np.log(d + pri.offset)
    mu = state.mu.copy()
    phi = state.phi.copy()
    xi = state.xi

    obs = np.full((T, k), np.nan)
    var = np.ones((T, k))
    if not prior_only:
        ind = table.sample_indicators(s_obs - psi, rng)
        obs = s_obs - table.means[ind]
        var = table.variances[ind]
    for j in range(k):
        intercept, m1, p1, tv = _dhs_ar_terms(xi[:, j], mu[j], phi[j], pri)
        psi[:, j], _ = ar1_ffbs(obs[:, j], var[:, j], intercept, phi[j], tv, m1, p1, rng)

    nu = dhs_shocks(psi, mu, phi)
    xi = np.asarray(sample_polya_gamma(pri.a + pri.b, nu, rng))

    if sample_ar:
        for j in range(k):
            mu[j] = _draw_dhs_mu(psi[:, j], xi[:, j], phi[j], pri, rng)
            phi[j] = _draw_dhs_phi(psi[:, j], xi[:, j], mu[j], phi[j], pri, rng)
    return DhsState(psi=psi, mu=mu, phi=phi, xi=xi, priors=pri)


def dhs_step_ahead(psi_last, mu, phi, pri: DhsPriors, rng):
    """Propagate log-variances one step through their AR(1) with Z shocks."""
    nu, _ = sample_z_innovation(pri.a, pri.b, rng, size=np.shape(psi_last))
    return mu + phi * (np.asarray(psi_last) - mu) + nu


# ---------------------------------------------------------------------------
# shared helpers


def innovation_variances(kind: PriorKind, state, T: int) -> np.ndarray:
    """(T, k) array of state innovation variances implied by the prior state."""
    if kind is PriorKind.NONE:
        return np.broadcast_to(state.omega, (T, state.omega.size)).copy()
    if kind is PriorKind.HS:
        om = state.sqrt_omega**2
        return np.broadcast_to(om, (T, om.size)).copy()
    if kind is PriorKind.SHS:
        return state.lam[None, :] * state.phi
    if kind is PriorKind.DHS:
        return np.exp(state.psi)
    raise ValueError(f"unknown prior kind {kind!r}")


def state_innovation_covariance(kind: PriorKind, state, t: int) -> np.ndarray:
    """Diagonal innovation covariance at time ``t`` (1-based)."""
    kind = PriorKind.parse(kind)
    if kind in (PriorKind.NONE, PriorKind.HS):
        return np.diag(innovation_variances(kind, state, 1)[0])
    T = state.phi.shape[0] if kind is PriorKind.SHS else state.psi.shape[0]
    if not 1 <= t <= T:
        raise IndexError(f"t={t} outside 1..{T}")
    if kind is PriorKind.SHS:
        return np.diag(state.lam * state.phi[t - 1])
    return np.diag(np.exp(state.psi[t - 1]))


def initial_prior_state(kind: PriorKind, k: int, T: int, *, none_shape=3.0, none_scale=0.03,
                        dhs_priors: DhsPriors | None = None, theta0=None):
    """Starting values for a chain; variances start near the None prior mean."""
    kind = PriorKind.parse(kind)
    om0 = none_scale / (none_shape - 1.0)
    if kind is PriorKind.NONE:
        return NoneState(omega=np.full(k, om0), shape=none_shape, scale=none_scale)
    if kind is PriorKind.HS:
        th0 = np.zeros(k) if theta0 is None else np.asarray(theta0, dtype=float)
        alpha = np.concatenate([th0, np.full(k, math.sqrt(om0))])
        return HsState(alpha=alpha, phi=np.ones(2 * k), lam=1.0, v=np.ones(2 * k), w=1.0)
    if kind is PriorKind.SHS:
        return ShsState(lam=np.full(k, om0), phi=np.ones((T, k)), v=np.ones((T, k)), w=np.ones(k))
    pri = dhs_priors or DhsPriors()
    return DhsState(psi=np.full((T, k), math.log(om0)), mu=np.full(k, math.log(om0)),
                    phi=np.full(k, 0.5), xi=np.ones((T, k)), priors=pri)
