"""Synthetic data generators for the model families."""
from __future__ import annotations

import numpy as np
import pandas as pd


def simulate_svm(T, rng, *, gamma=0.2, mu=0.0, phi=0.95, delta=0.0, sigma2=0.05,
                 omega_tau=0.01, omega_gamma=0.0, tau0=0.0, h0=None):
    """Simulate a UC-SVM series; ``gamma=0`` with ``omega_gamma=0`` gives UC-SV data.

    Returns a dict with y, tau, gamma and h paths (all length T).
    """
    h = np.empty(T)
    y = np.empty(T)
    tau = tau0 + np.cumsum(rng.normal(0.0, np.sqrt(omega_tau), T))
    gam = gamma + np.cumsum(rng.normal(0.0, np.sqrt(omega_gamma), T)) if omega_gamma else np.full(T, float(gamma))
    prev_h = mu + np.sqrt(sigma2 / (1 - phi**2)) * rng.standard_normal() if h0 is None else h0
    for t in range(T):
        if t == 0:
            h[t] = prev_h
        else:
            h[t] = mu + phi * (h[t - 1] - mu) + delta * y[t - 1] + np.sqrt(sigma2) * rng.standard_normal()
        y[t] = tau[t] + gam[t] * np.exp(h[t]) + np.exp(h[t] / 2) * rng.standard_normal()
    return {"y": y, "tau": tau, "gamma": gam, "h": h}


def simulate_random_walk(T, rng, *, sigma=1.0, start=2.0):
    """Pure random walk pi_t = pi_{t-1} + eta_t."""
    return start + np.cumsum(rng.normal(0.0, sigma, T))


def prices_from_inflation(pi, p0=100.0):
    """Invert pi_t = 400 log(p_t / p_{t-1}); returns len(pi) + 1 price levels."""
    return p0 * np.exp(np.concatenate([[0.0], np.cumsum(np.asarray(pi) / 400.0)]))


def synthetic_vintages(pi, start="1960-Q1", *, first_vintage: int = 40, p0=100.0,
                       revision_sd=0.0, rng=None):
    """Triangular vintage set from an inflation path.

    Vintage ``v`` is published one quarter after its last observation and
    contains prices up to that observation; the first vintage holds
    ``first_vintage`` observations.  With ``revision_sd > 0`` every vintage
    adds its own noise to the most recent price, which later vintages revise.
    """
    from .vintages import VintageSet

    prices = prices_from_inflation(pi, p0)
    n = prices.size
    obs = pd.period_range(start=pd.Period(start.replace("-Q", "Q"), freq="Q"), periods=n, freq="Q")
    cols = []
    for last in range(first_vintage - 1, n):
        col = np.full(n, np.nan)
        col[: last + 1] = prices[: last + 1]
        if revision_sd and rng is not None:
            col[last] *= np.exp(rng.normal(0.0, revision_sd) / 400.0)
        cols.append(col)
    vint = obs[first_vintage - 1:] + 1
    return VintageSet(observations=obs, vintages=vint, values=np.column_stack(cols))
