"""Gibbs sampler for UC-SV, UC-SVM and TVP-SVM models.

Coefficient layout: ``theta_t = (tau_t, beta_t', gamma_t)'`` with loadings
``x_t = (1, z_t', exp(h_t))'``.  The UC-SV family drops the last column.
One sweep updates, in order, the coefficient path, the shrinkage block, the
log-volatility path and the volatility-equation parameters.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
import pandas as pd

from .errors import InputError, MCMCError, NumericalError
from .rng import make_rng
from .shrinkage import (
    DhsPriors,
    PriorKind,
    initial_prior_state,
    innovation_variances,
    update_dhs,
    update_hs,
    update_none,
    update_shs,
)
from .state_space import LinearGaussianSystem, ffbs
from .volatility import OMORI10, SvParams, SvPriors, sample_h_path, sample_sv_params

log = logging.getLogger(__name__)

MIN_OBS = 20
BAND_QUANTILES = (0.05, 0.16, 0.5, 0.84, 0.95)


class Family(str, enum.Enum):
    UC_SV = "UC-SV"
    UC_SVM = "UC-SVM"
    TVP_SVM = "TVP-SVM"

    @classmethod
    def parse(cls, text) -> "Family":
        if isinstance(text, cls):
            return text
        norm = str(text).upper().replace("_", "-")
        for fam in cls:
            if fam.value == norm:
                return fam
        raise ValueError(f"unknown model family {text!r}")

    @property
    def in_mean(self) -> bool:
        return self is not Family.UC_SV


@dataclass(frozen=True)
class ModelConfig:
    family: Family = Family.UC_SVM
    prior: PriorKind = PriorKind.NONE
    K: int = 0
    burn_in: int = 4000
    keep: int = 8000
    thin: int = 1
    seed: int = 0
    stream_id: int = 0
    include_delta: bool | None = None
    theta_p0: float = 10.0
    none_shape: float = 3.0
    none_scale: float = 0.03
    sv_priors: SvPriors = SvPriors()
    dhs_priors: DhsPriors = DhsPriors()
    h_offset: float = 1e-4
    tuning_window: int = 200
    min_accept: float = 0.10
    n_blocks: int = 10
    max_retries: int = 3

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        object.__setattr__(self, "prior", PriorKind.parse(self.prior))
        if self.burn_in < 0 or self.keep < 1 or self.thin < 1:
            raise ValueError("need burn_in >= 0, keep >= 1, thin >= 1")
        if self.family is not Family.TVP_SVM and self.K != 0:
            raise ValueError(f"{self.family.value} has no extra regressors (K must be 0)")
        if self.include_delta is None:
            object.__setattr__(self, "include_delta", self.family.in_mean)
        if self.sv_priors.include_delta != self.include_delta:
            object.__setattr__(self, "sv_priors", replace(self.sv_priors, include_delta=self.include_delta))

    @property
    def k(self) -> int:
        return 1 + self.K + int(self.family.in_mean)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "sv_priors" in d and isinstance(d["sv_priors"], dict):
            d["sv_priors"] = SvPriors(**d["sv_priors"])
        if "dhs_priors" in d and isinstance(d["dhs_priors"], dict):
            d["dhs_priors"] = DhsPriors(**d["dhs_priors"])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model settings: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["family"] = self.family.value
        out["prior"] = self.prior.value
        return out


@dataclass
class GibbsState:
    theta: np.ndarray  # (T, k)
    theta0: np.ndarray  # (k,)
    h: np.ndarray  # (T,)
    sv: SvParams
    prior: object
    theta_tilde: np.ndarray | None = None
    n_blocks: int = 1
    h_accept: float = 1.0


def design(z, h, family: Family) -> np.ndarray:
    """Loadings x_t = (1, z_t', exp(h_t))' stacked into a (T, k) array."""
    T = h.shape[0]
    cols = [np.ones((T, 1))]
    if z is not None and np.size(z):
        cols.append(np.asarray(z, dtype=float).reshape(T, -1))
    if family.in_mean:
        cols.append(np.exp(h)[:, None])
    return np.hstack(cols)


def split_mean(theta, z, family: Family):
    """Return (level_t, gamma_t): level is tau_t + beta_t' z_t, gamma zero for UC-SV."""
    level = theta[:, 0].copy()
    if z is not None and np.size(z):
        K = np.asarray(z).reshape(theta.shape[0], -1).shape[1]
        level += np.sum(theta[:, 1:1 + K] * np.asarray(z).reshape(theta.shape[0], K), axis=1)
    gamma = theta[:, -1] if family.in_mean else np.zeros(theta.shape[0])
    return level, gamma


def _initial_log_variance(y, span: int = 8) -> np.ndarray:
    # exponentially smoothed squared deviations from a smoothed level; a flat
    # start makes the first sigma2 draw collapse towards zero
    level = pd.Series(y).ewm(span=span).mean().to_numpy()
    dev2 = (y - level) ** 2
    smooth = pd.Series(dev2).ewm(span=span).mean().to_numpy()
    return np.log(np.maximum(smooth, 1e-4 * max(np.var(y), 1e-8)) + 1e-8)


def initial_state(y, z, config: ModelConfig) -> GibbsState:
    y = np.asarray(y, dtype=float)
    T, k = y.shape[0], config.k
    theta0 = np.zeros(k)
    theta0[0] = y.mean()
    h_path = _initial_log_variance(y)
    h0 = float(h_path.mean())
    prior = initial_prior_state(config.prior, k, T, none_shape=config.none_shape,
                                none_scale=config.none_scale, dhs_priors=config.dhs_priors,
                                theta0=theta0)
    return GibbsState(
        theta=np.tile(theta0, (T, 1)),
        theta0=theta0,
        h=h_path,
        sv=SvParams(mu=h0, phi=0.9, delta=0.0, sigma2=0.1),
        prior=prior,
        theta_tilde=np.zeros((T, k)) if config.prior is PriorKind.HS else None,
    )


def gibbs_step(y, z, state: GibbsState, config: ModelConfig, rng) -> GibbsState:
    """One full sweep; returns a new state and leaves ``state`` untouched."""
    y = np.asarray(y, dtype=float)
    T = y.shape[0]
    fam, kind = config.family, config.prior
    x = design(z, state.h, fam)
    r = np.exp(state.h)
    prior = state.prior
    theta_tilde = None

    if kind is PriorKind.HS:
        th0, sw = prior.theta0, prior.sqrt_omega
        sys = LinearGaussianSystem(y=y - x @ th0, x=x * sw, r=r, q=1.0, m0=0.0, p0=0.0)
        theta_tilde = ffbs(sys, rng).path
        prior = update_hs(y, x, state.h, theta_tilde, prior, rng)
        theta0 = prior.theta0.copy()
        theta = theta0 + prior.sqrt_omega * theta_tilde
    else:
        q = innovation_variances(kind, prior, T)
        sys = LinearGaussianSystem(y=y, x=x, r=r, q=q, m0=0.0, p0=config.theta_p0)
        draw = ffbs(sys, rng)
        theta, theta0 = draw.path, draw.initial
        if kind is PriorKind.NONE:
            prior = update_none(theta, theta0, prior, rng)
        elif kind is PriorKind.SHS:
            prior = update_shs(theta, theta0, prior, rng)
        else:
            prior = update_dhs(theta, theta0, prior, rng)

    level, gamma = split_mean(theta, z, fam)
    h, acc = sample_h_path(y, level, gamma, state.sv, state.h, rng, table=OMORI10,
                           n_blocks=state.n_blocks, include_delta=config.include_delta,
                           offset=config.h_offset)
    sv = sample_sv_params(h, y, state.sv, config.sv_priors, rng)
    return GibbsState(theta=theta, theta0=theta0, h=h, sv=sv, prior=prior,
                      theta_tilde=theta_tilde, n_blocks=state.n_blocks, h_accept=float(acc))


# ---------------------------------------------------------------------------
# posterior draws


@dataclass
class DrawSet:
    """Retained posterior draws plus what is needed to simulate forecasts."""

    family: Family
    prior: PriorKind
    y: np.ndarray
    theta: np.ndarray  # (n, T, k)
    h: np.ndarray  # (n, T)
    mu: np.ndarray
    phi: np.ndarray
    delta: np.ndarray
    sigma2: np.ndarray
    scales: dict = field(default_factory=dict)
    include_delta: bool = True
    dhs_priors: DhsPriors = DhsPriors()
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return self.h.shape[0]

    @property
    def T(self) -> int:
        return self.h.shape[1]

    @property
    def gamma(self) -> np.ndarray:
        if not self.family.in_mean:
            return np.zeros_like(self.h)
        return self.theta[:, :, -1]

    @property
    def tau(self) -> np.ndarray:
        return self.theta[:, :, 0]

    def concat(self, other: "DrawSet") -> "DrawSet":
        """Pool draws from another chain on the same data."""
        return replace(
            self,
            theta=np.concatenate([self.theta, other.theta]),
            h=np.concatenate([self.h, other.h]),
            mu=np.concatenate([self.mu, other.mu]),
            phi=np.concatenate([self.phi, other.phi]),
            delta=np.concatenate([self.delta, other.delta]),
            sigma2=np.concatenate([self.sigma2, other.sigma2]),
            scales={k: np.concatenate([v, other.scales[k]]) for k, v in self.scales.items()},
            diagnostics={"chains": [self.diagnostics, other.diagnostics]},
        )

    def scalar_frame(self) -> pd.DataFrame:
        data = {"mu_h": self.mu, "phi_h": self.phi, "delta": self.delta, "sigma2": self.sigma2}
        for name, arr in self.scales.items():
            arr = np.asarray(arr)
            if arr.ndim == 2:
                for j in range(arr.shape[1]):
                    data[f"{name}[{j}]"] = arr[:, j]
        df = pd.DataFrame(data)
        df.index.name = "draw"
        return df

    def to_csv(self, path, paths: bool = False) -> None:
        """Write draw index x parameter name; ``paths`` adds tau/gamma/h columns."""
        df = self.scalar_frame()
        if paths:
            extra = {}
            for t in range(self.T):
                extra[f"tau[{t}]"] = self.tau[:, t]
            if self.family.in_mean:
                for t in range(self.T):
                    extra[f"gamma[{t}]"] = self.gamma[:, t]
            for t in range(self.T):
                extra[f"h[{t}]"] = self.h[:, t]
            df = pd.concat([df, pd.DataFrame(extra, index=df.index)], axis=1)
        df.to_csv(path, float_format="%.10g")

    def to_npz(self, path) -> None:
        arrays = {"y": self.y, "theta": self.theta, "h": self.h, "mu": self.mu, "phi": self.phi,
                  "delta": self.delta, "sigma2": self.sigma2}
        arrays.update({f"scale__{k}": v for k, v in self.scales.items()})
        meta = {"family": self.family.value, "prior": self.prior.value,
                "include_delta": self.include_delta, "dhs_priors": asdict(self.dhs_priors)}
        np.savez_compressed(path, __meta__=np.array(repr(meta)), **arrays)

    @classmethod
    def from_npz(cls, path) -> "DrawSet":
        import ast

        with np.load(path, allow_pickle=False) as f:
            meta = ast.literal_eval(str(f["__meta__"]))
            scales = {k[len("scale__"):]: f[k] for k in f.files if k.startswith("scale__")}
            return cls(family=Family.parse(meta["family"]), prior=PriorKind.parse(meta["prior"]),
                       y=f["y"], theta=f["theta"], h=f["h"], mu=f["mu"], phi=f["phi"],
                       delta=f["delta"], sigma2=f["sigma2"], scales=scales,
                       include_delta=meta["include_delta"], dhs_priors=DhsPriors(**meta["dhs_priors"]))


def _forecast_scales(kind: PriorKind, prior) -> dict:
    if kind is PriorKind.NONE:
        return {"omega": prior.omega.copy()}
    if kind is PriorKind.HS:
        return {"omega": prior.sqrt_omega**2, "theta0": prior.theta0.copy(), "lam": np.array([prior.lam])}
    if kind is PriorKind.SHS:
        return {"lam": prior.lam.copy()}
    return {"psi_last": prior.psi[-1].copy(), "dhs_mu": prior.mu.copy(), "dhs_phi": prior.phi.copy()}


def effective_sample_size(x) -> float:
    """Effective sample size from the initial positive sequence of autocorrelations."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4 or np.var(x) == 0:
        return float(n)
    xc = x - x.mean()
    f = np.fft.rfft(xc, n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (n * np.var(x))
    total = 0.0
    for m in range(0, n - 1, 2):
        pair = acf[m] + acf[m + 1]
        if pair <= 0:
            break
        total += pair
    tau = max(2.0 * total - 1.0, 1.0 / n)
    return float(n / tau)


def _validate_inputs(y, z, config: ModelConfig):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise InputError("y must be one-dimensional")
    if not np.all(np.isfinite(y)):
        raise InputError("y contains NaN or infinite values")
    if y.size < MIN_OBS:
        raise InputError(f"need at least {MIN_OBS} observations, got {y.size}")
    if config.K:
        if z is None:
            raise InputError(f"config expects K={config.K} regressors but z is missing")
        z = np.asarray(z, dtype=float).reshape(y.size, -1)
        if z.shape[1] != config.K:
            raise InputError(f"z has {z.shape[1]} columns, config expects {config.K}")
        if not np.all(np.isfinite(z)):
            raise InputError("z contains NaN or infinite values")
    else:
        z = None
    return y, z


def run_mcmc(y, z=None, config: ModelConfig = ModelConfig(), rng=None, progress=None) -> DrawSet:
    """Run one chain: ``burn_in`` sweeps discarded, then ``keep`` draws every ``thin`` sweeps."""
    y, z = _validate_inputs(y, z, config)
    if rng is None:
        rng = make_rng(config.seed, config.stream_id)
    state = initial_state(y, z, config)
    T, k, n = y.size, config.k, config.keep
    total = config.burn_in + n * config.thin

    theta = np.empty((n, T, k))
    h = np.empty((n, T))
    sv = np.empty((n, 4))
    scales = {}
    acc_burn, acc_keep = [], []
    window = min(config.tuning_window, config.burn_in)
    stored = 0
    for it in range(total):
        for attempt in range(config.max_retries + 1):
            try:
                state = gibbs_step(y, z, state, config, rng)
                break
            except NumericalError as exc:
                log.debug("sweep %d attempt %d failed: %s", it, attempt, exc)
        else:
            raise MCMCError("repeated numerical failures", iteration=it)
        if it < config.burn_in:
            acc_burn.append(state.h_accept)
            if it + 1 == window and state.n_blocks == 1 and np.mean(acc_burn) < config.min_accept:
                log.info("whole-path acceptance %.3f below %.2f; switching to %d blocks",
                         np.mean(acc_burn), config.min_accept, config.n_blocks)
                state.n_blocks = config.n_blocks
            continue
        acc_keep.append(state.h_accept)
        if (it - config.burn_in) % config.thin:
            continue
        theta[stored] = state.theta
        h[stored] = state.h
        sv[stored] = (state.sv.mu, state.sv.phi, state.sv.delta, state.sv.sigma2)
        for name, val in _forecast_scales(config.prior, state.prior).items():
            scales.setdefault(name, np.empty((n,) + np.shape(val)))[stored] = val
        stored += 1
        if progress is not None:
            progress(stored, n)

    draws = DrawSet(family=config.family, prior=config.prior, y=y, theta=theta, h=h,
                    mu=sv[:, 0], phi=sv[:, 1], delta=sv[:, 2], sigma2=sv[:, 3], scales=scales,
                    include_delta=config.include_delta, dhs_priors=config.dhs_priors)
    draws.diagnostics = {
        "h_acceptance": float(np.mean(acc_keep)),
        "h_blocks": state.n_blocks,
        "ess": {
            "mu_h": effective_sample_size(draws.mu),
            "phi_h": effective_sample_size(draws.phi),
            "delta": effective_sample_size(draws.delta),
            "sigma2": effective_sample_size(draws.sigma2),
            "mean_gamma": effective_sample_size(draws.gamma.mean(axis=1)),
            "mean_h": effective_sample_size(draws.h.mean(axis=1)),
        },
    }
    return draws


def summarize_paths(draws: DrawSet, quantiles=BAND_QUANTILES) -> pd.DataFrame:
    """Per-t posterior median and central 68%/90% bands of h_t, gamma_t and tau_t.

    Returns a long frame with columns quantity, t, median, lo68, hi68, lo90, hi90.
    """
    if len(draws) == 0:
        raise InputError("empty DrawSet")
    q = np.asarray(quantiles, dtype=float)
    if q.size != 5:
        raise ValueError("expected five quantiles (lo90, lo68, median, hi68, hi90)")
    frames = []
    quantities = [("h", draws.h), ("tau", draws.tau)]
    if draws.family.in_mean:
        quantities.insert(1, ("gamma", draws.gamma))
    for name, arr in quantities:
        qs = np.quantile(arr, q, axis=0)
        frames.append(pd.DataFrame({
            "quantity": name,
            "t": np.arange(arr.shape[1]),
            "median": qs[2], "lo68": qs[1], "hi68": qs[3], "lo90": qs[0], "hi90": qs[4],
        }))
    return pd.concat(frames, ignore_index=True)
